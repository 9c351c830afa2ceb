//! Central-difference gradient checks on random MLP problems.

use clflow::autograd::{ParamId, Parameter, Tape, Tensor};
use clflow::models::{build_mlp, HeadKind, MlpModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-5;
pub const ORACLE_TOL: f64 = 1e-12;
/// Perturbations of size FD_STEP move every pre-activation by far less.
pub const KINK_MARGIN: f64 = 1e-3;

/// Below this magnitude the comparison is absolute: central differences on
/// an O(1) loss carry about 1e-11 of round-off.
pub const REL_FLOOR: f64 = 1e-5;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Smallest |pre-activation| of any hidden unit on `x`.
pub fn kink_margin(model: &MlpModel, x: &Tensor) -> f64 {
    let mut tape = Tape::new();
    let mut h = tape.constant(x.clone());
    let mut margin = f64::INFINITY;
    for layer in model.hidden_layers() {
        let z = layer.forward(&mut tape, h).unwrap();
        margin = tape
            .value(z)
            .data()
            .iter()
            .fold(margin, |m, v| m.min(v.abs()));
        h = tape.relu(z);
    }
    margin
}

/// A random MLP (fan-in scaled weights, uniform random biases) with a
/// random batch, resampled until no hidden pre-activation lies near the
/// ReLU kink, where central differences are undefined.
pub fn random_problem(rng: &mut ChaCha8Rng, seed: u64) -> (MlpModel, Tensor, Vec<usize>) {
    loop {
        let depth = rng.random_range(0..4);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..21)).collect();
        let (d, c, m) = (
            rng.random_range(1..8),
            rng.random_range(2..6),
            rng.random_range(1..6),
        );
        let mut model = build_mlp(d, &hidden, c, HeadKind::Incremental, seed).unwrap();
        for p in model.params_mut() {
            if p.value().shape().len() == 1 {
                for v in p.value_mut().data_mut() {
                    *v = rng.random_range(-0.5..0.5);
                }
            }
        }
        let x = random_tensor(rng, m, d, 1.0);
        let y: Vec<usize> = (0..m).map(|_| rng.random_range(0..c)).collect();
        if kink_margin(&model, &x) > KINK_MARGIN {
            return (model, x, y);
        }
    }
}

/// Worst relative error between backward and central differences.
pub fn mlp_gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut model, x, y) = random_problem(&mut rng, seed);
    let tasks = vec![0; y.len()];

    let loss_of = |model: &MlpModel| -> f64 {
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &x, &tasks).unwrap();
        let l = tape.cross_entropy(out, &y).unwrap();
        tape.value(l).item().unwrap()
    };

    let mut tape = Tape::new();
    let out = model.forward(&mut tape, &x, &tasks).unwrap();
    let l = tape.cross_entropy(out, &y).unwrap();
    let grads = tape.backward(l).unwrap();

    let mut worst = 0.0f64;
    let ids: Vec<ParamId> = model.params().iter().map(|p| p.id()).collect();
    for id in ids {
        let analytic = grads.get(id).unwrap().data().to_vec();
        for (k, &a) in analytic.iter().enumerate() {
            let orig = param(&model, id).value().data()[k];
            set(&mut model, id, k, orig + FD_STEP);
            let up = loss_of(&model);
            set(&mut model, id, k, orig - FD_STEP);
            let down = loss_of(&model);
            set(&mut model, id, k, orig);
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

pub fn param(model: &MlpModel, id: ParamId) -> &Parameter {
    model.params().into_iter().find(|p| p.id() == id).unwrap()
}

pub fn set(model: &mut MlpModel, id: ParamId, k: usize, v: f64) {
    let p = model
        .params_mut()
        .into_iter()
        .find(|p| p.id() == id)
        .unwrap();
    p.value_mut().data_mut()[k] = v;
}
