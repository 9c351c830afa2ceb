//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` may fail without failing the
//! target; every other failure exits non-zero.

#[path = "../../core/tests/common/gradcheck.rs"]
#[allow(dead_code)]
mod gradcheck;

use std::collections::BTreeSet;
use std::io::{self, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use clflow::autograd::{ParamId, Parameter, SgdOptimizer, Tape, Tensor};
use clflow::benchmarks::{
    benchmark_from_datasets, nc_benchmark, ni_benchmark, BenchmarkInstance, Experience, NcOptions,
};
use clflow::data::{DatasetRef, TensorDataset};
use clflow::evaluation::{Accuracy, ConfusionMatrix, EvaluationPlugin, Forgetting, Metric};
use clflow::logging::{JsonlLogger, Logger, TextLogger};
use clflow::models::{build_mlp, HeadKind, MlpModel};
use clflow::training::plugins::{
    consolidate_importance, path_integral_step, project, CwrStarPlugin, EwcMode, EwcPlugin,
    LwfPlugin, SiPlugin,
};
use clflow::training::{merge_experiences, Plugin, Strategy, StrategyState, TrainConfig};
use clflow_cli::{build_benchmark, build_model, build_strategy, resolve, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose stated target contradicts their own definition; see the
/// detail printed on their line.
const KNOWN_UNATTAINABLE: [u32; 1] = [7];

const EXACT_TOL: f64 = 1e-12;

const C1_CONFIGS: u64 = 100;
const C1_BUDGET: Duration = Duration::from_secs(30);
const C2_INSTANCES: u64 = 1000;
const C2_BUDGET: Duration = Duration::from_secs(60);
const C4_SEEDS: u64 = 5;
const C4_NAIVE_EXP0_MAX: f64 = 0.20;
const C4_CUMULATIVE_EXP0_MIN: f64 = 0.80;
const C4_STREAM_GAP_MIN: f64 = 0.20;
const C4_BUDGET: Duration = Duration::from_secs(120);
/// Frozen from the reference run: Replay led Naive by 0.65 and GDumb by
/// 0.70 in mean final stream accuracy.
const C5_MARGIN_MIN: f64 = 0.30;
const C6_RANDOM_PAIRS: usize = 10_000;
const C6_PROJECTION_TOL: f64 = 1e-12;
const C7_MAC_TARGET: u64 = 79_300;
const C9_BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// The benchmark of criteria 4, 5 and 10.
const REFERENCE: &str = r#"
loggers = []

[benchmark.source]
type = "synthetic"
n_classes = 10
train_per_class = 100
test_per_class = 50
input_dim = 20
class_separation = 6.0

[benchmark.scenario]
type = "nc"
n_experiences = 5

[model]
hidden_sizes = [32]

[strategy]
train_epochs = 4
train_mb_size = 32
eval_mb_size = 128
learning_rate = 0.05
momentum = 0.9
"#;

fn reference_config(seed: u64, strategy: &str) -> ExperimentConfig {
    let text = match strategy {
        "naive" => REFERENCE.to_string(),
        "cumulative" => REFERENCE.replace("[strategy]", "[strategy]\nname = \"cumulative\""),
        "replay" => {
            format!("{REFERENCE}\n[[strategy.plugins]]\ntype = \"replay\"\ncapacity = 200\n")
        }
        "gdumb" => format!("{REFERENCE}\n[[strategy.plugins]]\ntype = \"gdumb\"\ncapacity = 200\n"),
        other => unreachable!("no reference strategy {other}"),
    };
    let mut cfg = ExperimentConfig::from_toml(&text, Path::new(".")).unwrap();
    cfg.seed = seed;
    cfg
}

fn param_bits(model: &MlpModel) -> Vec<u64> {
    model
        .params()
        .iter()
        .flat_map(|p| {
            p.value()
                .data()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        })
        .collect()
}

struct ReferenceRun {
    exp0_acc: f64,
    stream_acc: f64,
    /// Evaluations whose parameter snapshots differed before and after.
    impure_evals: usize,
    evals: usize,
}

/// Trains on each experience, evaluating the whole test stream after each
/// and snapshotting parameters around every evaluation.
fn reference_run(seed: u64, strategy: &str) -> ReferenceRun {
    let mut cfg = reference_config(seed, strategy);
    let bench = build_benchmark(&cfg).unwrap();
    resolve(&mut cfg, &bench);
    let model = build_model(&cfg, &bench).unwrap();
    let mut s = build_strategy(&cfg, model, Vec::new(), "acceptance").unwrap();
    let (mut impure_evals, mut evals) = (0, 0);
    let mut last = None;
    for exp in bench.train_stream.iter() {
        s.train(std::slice::from_ref(exp)).unwrap();
        let before = param_bits(s.model());
        last = Some(s.eval(bench.test_stream.experiences()).unwrap());
        evals += 1;
        impure_evals += usize::from(param_bits(s.model()) != before);
    }
    let res = last.unwrap();
    ReferenceRun {
        exp0_acc: res["Top1_Acc_Exp/eval_phase/test_stream/Task000/Exp000"]
            .as_f64()
            .unwrap(),
        stream_acc: res["Top1_Acc_Stream/eval_phase/test_stream"]
            .as_f64()
            .unwrap(),
        impure_evals,
        evals,
    }
}

struct ReferenceRuns {
    runs: Vec<(&'static str, Vec<ReferenceRun>)>,
    naive_cumulative_time: Duration,
}

impl ReferenceRuns {
    fn collect() -> Self {
        let mut runs = Vec::new();
        let start = Instant::now();
        let mut naive_cumulative_time = Duration::ZERO;
        for name in ["naive", "cumulative", "replay", "gdumb"] {
            runs.push((
                name,
                (0..C4_SEEDS)
                    .map(|seed| reference_run(seed, name))
                    .collect(),
            ));
            if name == "cumulative" {
                naive_cumulative_time = start.elapsed();
            }
        }
        ReferenceRuns {
            runs,
            naive_cumulative_time,
        }
    }

    fn get(&self, name: &str) -> &[ReferenceRun] {
        &self.runs.iter().find(|(n, _)| *n == name).unwrap().1
    }

    fn mean_stream(&self, name: &str) -> f64 {
        let r = self.get(name);
        r.iter().map(|r| r.stream_acc).sum::<f64>() / r.len() as f64
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let worst = (0..C1_CONFIGS)
        .map(gradcheck::mlp_gradient_check)
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed();
    let detail = format!(
        "{C1_CONFIGS} configs, max rel err {worst:.2e} (< {:.0e}), {:.1}s",
        gradcheck::FD_REL_TOL,
        elapsed.as_secs_f64()
    );
    ensure(worst < gradcheck::FD_REL_TOL, detail.clone())?;
    ensure(elapsed < C1_BUDGET, detail.clone())?;
    Ok(detail)
}

fn tiny(n_classes: usize, per_class: usize) -> DatasetRef {
    let n = n_classes * per_class;
    let x = (0..n).map(|i| i as f64).collect();
    let y = (0..n).map(|i| i % n_classes).collect();
    Arc::new(TensorDataset::new(x, vec![1], y, None).unwrap())
}

fn source_classes(exp: &Experience, source: &DatasetRef) -> BTreeSet<usize> {
    exp.source_indices
        .as_ref()
        .unwrap()
        .iter()
        .map(|&i| source.target(i).unwrap())
        .collect()
}

fn check_nc_partition(
    b: &BenchmarkInstance,
    train: &DatasetRef,
    test: &DatasetRef,
    n_classes: usize,
) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    let mut total = 0;
    for (tr, te) in b.train_stream.iter().zip(b.test_stream.iter()) {
        let classes = source_classes(tr, train);
        ensure(classes.is_disjoint(&seen), "experiences share a class")?;
        ensure(
            source_classes(te, test) == classes,
            "test classes differ from train classes",
        )?;
        seen.extend(classes);
        total += tr.len();
    }
    ensure(
        seen.len() == n_classes && total == train.len(),
        "classes or patterns lost",
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (train, test) = (tiny(10, 20), tiny(10, 5));
    let opts = NcOptions {
        n_experiences: 5,
        seed: 0,
        ..NcOptions::default()
    };
    let split = nc_benchmark(&train, &test, &opts).map_err(|e| e.to_string())?;
    ensure(split.train_stream.len() == 5, "not 5 experiences")?;
    for e in split.train_stream.iter() {
        ensure(
            e.classes_in_this_experience.len() == 2,
            "experience without exactly 2 classes",
        )?;
    }
    check_nc_partition(&split, &train, &test, 10)?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..C2_INSTANCES {
        let seed = rng.random::<u64>();
        if i % 2 == 0 {
            let n_classes = rng.random_range(1..13);
            let per_class = rng.random_range(1..6);
            let divisors: Vec<usize> = (1..=n_classes).filter(|d| n_classes % d == 0).collect();
            let n_exp = divisors[rng.random_range(0..divisors.len())];
            let opts = NcOptions {
                n_experiences: n_exp,
                seed,
                task_labels: rng.random(),
                class_ids_from_zero_per_experience: rng.random(),
                ..NcOptions::default()
            };
            let (tr, te) = (tiny(n_classes, per_class), tiny(n_classes, 1));
            let a = nc_benchmark(&tr, &te, &opts).map_err(|e| e.to_string())?;
            let b = nc_benchmark(&tr, &te, &opts).map_err(|e| e.to_string())?;
            ensure(
                a.summary() == b.summary(),
                format!("NC instance {i} not deterministic"),
            )?;
            check_nc_partition(&a, &tr, &te, n_classes)
                .map_err(|e| format!("NC instance {i}: {e}"))?;
        } else {
            let tr = tiny(3, rng.random_range(1..67));
            let n = rng.random_range(1..=tr.len().min(20));
            let te = tiny(3, 1);
            let balance = rng.random();
            let a = ni_benchmark(&tr, &te, n, seed, balance).map_err(|e| e.to_string())?;
            let b = ni_benchmark(&tr, &te, n, seed, balance).map_err(|e| e.to_string())?;
            ensure(
                a.summary() == b.summary(),
                format!("NI instance {i} not deterministic"),
            )?;
            let sizes: Vec<usize> = a.train_stream.iter().map(Experience::len).collect();
            ensure(
                sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1,
                format!("NI instance {i}: sizes {sizes:?}"),
            )?;
            let mut all: Vec<usize> = a
                .train_stream
                .iter()
                .flat_map(|e| e.source_indices.clone().unwrap())
                .collect();
            all.sort_unstable();
            ensure(
                all == (0..tr.len()).collect::<Vec<_>>(),
                format!("NI instance {i}: not a partition"),
            )?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < C2_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!(
        "NC 10 classes over 5 experiences ok, {C2_INSTANCES} random instances ok, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

#[derive(Debug)]
struct Noop;

impl Plugin for Noop {
    fn name(&self) -> &str {
        "noop"
    }
}

/// Parameter bits after each experience of `bench`.
fn trajectory(
    bench: &BenchmarkInstance,
    plugins: Vec<Box<dyn Plugin>>,
    seed: u64,
) -> Vec<Vec<u64>> {
    let mut cfg = reference_config(seed, "naive");
    resolve(&mut cfg, bench);
    let model = build_model(&cfg, bench).unwrap();
    let s = &cfg.strategy;
    let mut strategy = Strategy::new(
        model,
        SgdOptimizer::new(s.learning_rate, s.momentum, s.weight_decay).unwrap(),
        TrainConfig {
            train_epochs: s.train_epochs,
            train_mb_size: s.train_mb_size,
            eval_mb_size: s.eval_mb_size,
            seed,
        },
        plugins,
        EvaluationPlugin::default(),
    )
    .unwrap();
    bench
        .train_stream
        .iter()
        .map(|e| {
            strategy.train(std::slice::from_ref(e)).unwrap();
            param_bits(strategy.model())
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let seed = 11;
    let bench = build_benchmark(&reference_config(seed, "naive")).unwrap();
    let naive = trajectory(&bench, Vec::new(), seed);
    let cases: Vec<(&str, Vec<Box<dyn Plugin>>)> = vec![
        ("no-op plugin", vec![Box::new(Noop)]),
        (
            "EWC(lambda=0)",
            vec![Box::new(EwcPlugin::new(0.0, EwcMode::Separate, 8).unwrap())],
        ),
        (
            "LwF(alpha=0)",
            vec![Box::new(LwfPlugin::new(0.0, 2.0).unwrap())],
        ),
    ];
    for (name, plugins) in cases {
        ensure(
            trajectory(&bench, plugins, seed) == naive,
            format!("{name} differs from Naive"),
        )?;
    }

    let mut cfg = reference_config(seed, "naive");
    resolve(&mut cfg, &bench);
    let s = &cfg.strategy;
    let tc = TrainConfig {
        train_epochs: s.train_epochs,
        train_mb_size: s.train_mb_size,
        eval_mb_size: s.eval_mb_size,
        seed,
    };
    let opt = || SgdOptimizer::new(s.learning_rate, s.momentum, s.weight_decay).unwrap();
    let mut joint = Strategy::joint_training(
        build_model(&cfg, &bench).unwrap(),
        opt(),
        tc.clone(),
        Vec::new(),
        EvaluationPlugin::default(),
    )
    .unwrap();
    joint.train(bench.train_stream.experiences()).unwrap();
    let merged = merge_experiences(bench.train_stream.experiences()).unwrap();
    let single = benchmark_from_datasets(
        std::slice::from_ref(&merged.dataset),
        std::slice::from_ref(&merged.dataset),
        None,
    )
    .unwrap();
    let mut naive_single = Strategy::new(
        build_model(&cfg, &bench).unwrap(),
        opt(),
        tc,
        Vec::new(),
        EvaluationPlugin::default(),
    )
    .unwrap();
    naive_single
        .train(single.train_stream.experiences())
        .unwrap();
    ensure(
        param_bits(joint.model()) == param_bits(naive_single.model()),
        "JointTraining differs from Naive on the concatenation",
    )?;
    Ok("no-op, EWC(0), LwF(0), Joint vs concatenated Naive: bitwise equal".into())
}

fn criterion_4(runs: &ReferenceRuns) -> Outcome {
    let naive_exp0 = runs
        .get("naive")
        .iter()
        .map(|r| r.exp0_acc)
        .fold(0.0, f64::max);
    let cum_exp0 = runs
        .get("cumulative")
        .iter()
        .map(|r| r.exp0_acc)
        .fold(1.0, f64::min);
    let gap = runs.mean_stream("cumulative") - runs.mean_stream("naive");
    let t = runs.naive_cumulative_time;
    let detail = format!(
        "Naive exp0 acc max {naive_exp0:.3} (< {C4_NAIVE_EXP0_MAX}), Cumulative exp0 acc min {cum_exp0:.3} (> {C4_CUMULATIVE_EXP0_MIN}), stream gap {gap:.3} (>= {C4_STREAM_GAP_MIN}), {:.1}s",
        t.as_secs_f64()
    );
    ensure(
        naive_exp0 < C4_NAIVE_EXP0_MAX
            && cum_exp0 > C4_CUMULATIVE_EXP0_MIN
            && gap >= C4_STREAM_GAP_MIN
            && t < C4_BUDGET,
        detail.clone(),
    )?;
    Ok(detail)
}

fn criterion_5(runs: &ReferenceRuns) -> Outcome {
    let naive = runs.mean_stream("naive");
    let replay = runs.mean_stream("replay") - naive;
    let gdumb = runs.mean_stream("gdumb") - naive;
    let detail = format!(
        "mean stream acc Naive {naive:.3}; Replay(200) +{replay:.3}, GDumb(200) +{gdumb:.3} (>= {C5_MARGIN_MIN})"
    );
    ensure(
        replay >= C5_MARGIN_MIN && gdumb >= C5_MARGIN_MIN,
        detail.clone(),
    )?;
    Ok(detail)
}

fn hand_state(model: MlpModel, exp: &Experience) -> StrategyState {
    let mut state = StrategyState::new(
        model,
        SgdOptimizer::new(0.1, 0.0, 0.0).unwrap(),
        TrainConfig {
            train_epochs: 1,
            train_mb_size: 2,
            eval_mb_size: 2,
            seed: 0,
        },
    );
    state.experience = Some(exp.clone());
    state.train_data = Some(exp.dataset.clone());
    state
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXACT_TOL
}

fn criterion_6() -> Outcome {
    // A-GEM.
    ensure(
        project(&[1.0, 0.0], &[1.0, 1.0]) == vec![1.0, 0.0],
        "aligned gradient changed",
    )?;
    let p = project(&[1.0, 2.0], &[1.0, -1.0]);
    ensure(
        close(p[0], 1.5) && close(p[1], 1.5),
        format!("projection {p:?} != [1.5, 1.5]"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..C6_RANDOM_PAIRS {
        let d = rng.random_range(1..12);
        let g: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dot: f64 = project(&g, &r).iter().zip(&r).map(|(a, b)| a * b).sum();
        ensure(dot >= -C6_PROJECTION_TOL, format!("projected dot {dot:e}"))?;
    }

    // EWC: F = 2, lambda = 1, theta - theta* = 3.
    let theta = Parameter::new(ParamId(0), Tensor::vector(vec![4.0]));
    let mut tape = Tape::new();
    let v = tape.param(&theta);
    let d = tape.weighted_sq_dist(v, &[1.0], &[2.0]).unwrap();
    let pen = tape.scale(d, 1.0 / 2.0);
    let pen = tape.value(pen).item().unwrap();
    ensure(close(pen, 9.0), format!("EWC penalty {pen}"))?;

    // SI, one plain SGD step with lr 0.1 and g = 2.
    let mut omega = [0.0];
    path_integral_step(&mut omega, &[2.0], &[1.0], &[0.8]);
    let mut big = [0.0];
    consolidate_importance(&mut big, &omega, &[1.0], &[0.8], 0.1);
    ensure(
        close(big[0], 0.4 / (0.04 + 0.1)),
        format!("SI importance {}", big[0]),
    )?;
    let ds: DatasetRef =
        Arc::new(TensorDataset::new(vec![1.0, -1.0], vec![1], vec![0, 1], None).unwrap());
    let exp = Experience::new(ds.clone(), 0, "train").unwrap();
    let mut state = hand_state(
        build_mlp(1, &[], 2, HeadKind::Incremental, 3).unwrap(),
        &exp,
    );
    let mut si = SiPlugin::new(1.0, 0.1).unwrap();
    si.before_training_exp(&mut state).unwrap();
    state.mb = clflow::data::collate(ds.as_ref(), &[0, 1]).unwrap();
    state.tape = Tape::new();
    let out = state
        .model
        .forward(&mut state.tape, &state.mb.x, &state.mb.t)
        .unwrap();
    let loss = state.tape.cross_entropy(out, &state.mb.y).unwrap();
    state
        .tape
        .backward(loss)
        .unwrap()
        .accumulate_into(state.model.params_mut())
        .unwrap();
    si.after_backward(&mut state).unwrap();
    let g: Vec<f64> = state
        .model
        .params()
        .iter()
        .flat_map(|p| p.grad().data().to_vec())
        .collect();
    state.optimizer.step(state.model.params_mut());
    si.after_update(&mut state).unwrap();
    si.after_training_exp(&mut state).unwrap();
    let imp: Vec<f64> = si.importance().values().flatten().copied().collect();
    for (k, gk) in g.iter().enumerate() {
        // Delta = -0.1 g, omega = 0.1 g^2, Omega = omega / (Delta^2 + xi).
        let expect = 0.1 * gk * gk / (0.01 * gk * gk + 0.1);
        ensure(
            close(imp[k], expect),
            format!("SI plugin importance {} != {expect}", imp[k]),
        )?;
    }

    // CWR*: first occurrence, then equal-count consolidation.
    let labelled = |ys: Vec<usize>| -> DatasetRef {
        Arc::new(TensorDataset::new(vec![0.0; 2 * ys.len()], vec![2], ys, None).unwrap())
    };
    let e0 = Experience::new(labelled(vec![0, 0, 1, 1]), 0, "train").unwrap();
    let e1 = Experience::new(labelled(vec![1, 1, 2, 2]), 1, "train").unwrap();
    let mut model = build_mlp(2, &[], 1, HeadKind::Incremental, 4).unwrap();
    model.adapt_to_experience(&e0).unwrap();
    let mut state = hand_state(model, &e0);
    let mut cwr = CwrStarPlugin::new();
    cwr.before_training_exp(&mut state).unwrap();
    let layer = state.model.incremental_layer_mut().unwrap();
    layer
        .weight
        .value_mut()
        .data_mut()
        .copy_from_slice(&[1.0, 2.0, 3.0, 6.0]);
    cwr.after_training_exp(&mut state).unwrap();
    ensure(
        cwr.consolidated()[&0].weight == vec![-2.0, -1.0],
        "CWR* first occurrence (class 0)",
    )?;
    ensure(
        cwr.consolidated()[&1].weight == vec![0.0, 3.0],
        "CWR* first occurrence (class 1)",
    )?;
    state.model.adapt_to_experience(&e1).unwrap();
    state.train_data = Some(e1.dataset.clone());
    state.experience = Some(e1);
    cwr.before_training_exp(&mut state).unwrap();
    let layer = state.model.incremental_layer_mut().unwrap();
    layer.weight.value_mut().data_mut()[2..6].copy_from_slice(&[4.0, 2.0, 0.0, 2.0]);
    cwr.after_training_exp(&mut state).unwrap();
    // mean 2; class 1 temporary centred (2, 0); averaged with (0, 3).
    ensure(
        cwr.consolidated()[&1].weight == vec![1.0, 1.5],
        "CWR* equal-count consolidation",
    )?;
    ensure(
        cwr.consolidated()[&0].weight == vec![-2.0, -1.0],
        "CWR* absent class changed",
    )?;
    Ok(format!(
        "A-GEM cases + {C6_RANDOM_PAIRS} random pairs, EWC = 9, SI single step, CWR* cases (tol {EXACT_TOL:e})"
    ))
}

fn criterion_7() -> Outcome {
    let mut acc = Accuracy::new();
    acc.update(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap();
    ensure(acc.result() == 0.75, "accuracy example")?;
    let mut pooled = Accuracy::new();
    pooled.update(&[0, 1], &[0, 0]).unwrap();
    pooled.update(&[2, 2, 2], &[2, 2, 2]).unwrap();
    ensure(close(pooled.result(), 0.8), "pooled accuracy")?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let (mut a, mut cm) = (Accuracy::new(), ConfusionMatrix::new());
        for _ in 0..rng.random_range(1..5) {
            let n = rng.random_range(1..40);
            let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..6)).collect();
            let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..6)).collect();
            a.update(&p, &y).unwrap();
            cm.update(&p, &y).unwrap();
        }
        let m = cm.result();
        let trace: u64 = (0..m.len()).map(|i| m[i][i]).sum();
        let total: u64 = m.iter().flatten().sum();
        ensure(
            trace as f64 / total as f64 == a.result(),
            "confusion diagonal != accuracy",
        )?;
    }

    let mut f = Forgetting::new();
    f.update(0, 0.9, true).unwrap();
    f.update(0, 0.7, false).unwrap();
    f.update(1, 0.9, true).unwrap();
    f.update(1, 0.95, false).unwrap();
    f.update(2, 0.8, true).unwrap();
    let r = f.result();
    ensure(
        close(r[&0], 0.2) && close(r[&1], -0.05) && !r.contains_key(&2),
        format!("forgetting table {r:?}"),
    )?;
    let single = build_mlp(10, &[], 10, HeadKind::Incremental, 0).unwrap();
    ensure(single.mac_count(0) == 100, "MAC of a 10->10 layer")?;

    let mac = build_mlp(784, &[100], 10, HeadKind::Incremental, 0)
        .unwrap()
        .mac_count(0);
    let detail = format!(
        "pooled accuracy, confusion diagonal, forgetting table ok; MAC(784-100-10) = {mac} = 784*100 + 100*10, target {C7_MAC_TARGET}"
    );
    ensure(mac == C7_MAC_TARGET, detail.clone())?;
    Ok(detail)
}

#[derive(Clone, Default)]
struct SharedBuf(Arc<Mutex<Vec<u8>>>);

impl Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl SharedBuf {
    fn text(&self) -> String {
        String::from_utf8(self.0.lock().unwrap().clone()).unwrap()
    }
}

fn logged_run(
    seed: u64,
    loggers: Vec<Box<dyn Logger>>,
) -> (Vec<u64>, clflow::evaluation::ResultsDict) {
    let mut cfg = reference_config(seed, "replay");
    cfg.strategy.train_epochs = 1;
    let bench = build_benchmark(&cfg).unwrap();
    resolve(&mut cfg, &bench);
    let model = build_model(&cfg, &bench).unwrap();
    let mut s = build_strategy(&cfg, model, loggers, "acceptance").unwrap();
    for e in bench.train_stream.iter() {
        s.train(std::slice::from_ref(e)).unwrap();
        s.eval(bench.test_stream.experiences()).unwrap();
    }
    s.evaluator_mut().flush().unwrap();
    (param_bits(s.model()), s.evaluator().all_results().clone())
}

fn criterion_8() -> Outcome {
    let (a, b) = (SharedBuf::default(), SharedBuf::default());
    logged_run(8, vec![Box::new(TextLogger::new(a.clone()))]);
    logged_run(8, vec![Box::new(TextLogger::new(b.clone()))]);
    ensure(
        !a.text().is_empty() && a.text() == b.text(),
        "text logs differ",
    )?;

    let j = SharedBuf::default();
    let (bits_logged, res_logged) = logged_run(
        8,
        vec![
            Box::new(JsonlLogger::new(j.clone())),
            Box::new(TextLogger::new(SharedBuf::default())),
        ],
    );
    let keys = [
        "name",
        "x",
        "value",
        "phase",
        "stream",
        "task",
        "experience",
        "timestamp",
        "run_id",
    ];
    let text = j.text();
    for line in text.lines() {
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(line).map_err(|e| format!("unparseable line: {e}"))?;
        ensure(
            obj.len() == 9 && keys.iter().all(|k| obj.contains_key(*k)),
            format!("keys of {line}"),
        )?;
    }
    let (bits_bare, res_bare) = logged_run(8, Vec::new());
    ensure(
        bits_bare == bits_logged && res_bare == res_logged,
        "loggers changed the run",
    )?;
    Ok(format!(
        "text logs byte-identical, {} JSONL lines with 9 keys, loggers leave trajectories bitwise unchanged",
        text.lines().count()
    ))
}

fn stripped_jsonl(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join(clflow_cli::METRICS_FILE)).unwrap();
    text.lines()
        .map(|l| {
            let mut v: serde_json::Map<String, serde_json::Value> =
                serde_json::from_str(l).unwrap();
            v.remove("timestamp");
            serde_json::to_string(&v).unwrap() + "\n"
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let demo = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let tmp = tempfile::tempdir().unwrap();
    let mut logs = Vec::new();
    let mut slowest = Duration::ZERO;
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let start = Instant::now();
        let res = Command::new(env!("CARGO_BIN_EXE_clflow"))
            .arg("run")
            .arg(&demo)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        slowest = slowest.max(start.elapsed());
        ensure(
            res.status.success(),
            String::from_utf8_lossy(&res.stderr).into_owned(),
        )?;
        let dir = std::fs::read_dir(&out)
            .unwrap()
            .next()
            .unwrap()
            .unwrap()
            .path();
        logs.push(stripped_jsonl(&dir));
    }
    let detail = format!(
        "demo run twice: {} JSONL lines, identical without timestamps, slowest run {:.1}s (< {}s)",
        logs[0].lines().count(),
        slowest.as_secs_f64(),
        C9_BUDGET.as_secs()
    );
    ensure(logs[0] == logs[1] && !logs[0].is_empty(), detail.clone())?;
    ensure(slowest < C9_BUDGET, detail.clone())?;
    Ok(detail)
}

fn criterion_10(runs: &ReferenceRuns) -> Outcome {
    let (mut impure, mut total) = (0, 0);
    for (_, rs) in &runs.runs {
        for r in rs {
            impure += r.impure_evals;
            total += r.evals;
        }
    }
    let detail = format!("{total} evaluations in the reference runs, {impure} changed parameters");
    ensure(impure == 0, detail.clone())?;
    Ok(detail)
}

fn main() -> ExitCode {
    let mut out = io::stdout().lock();
    let mut unexpected = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        let known = if outcome.is_err() && KNOWN_UNATTAINABLE.contains(&id) {
            " [known unattainable]"
        } else {
            ""
        };
        if outcome.is_err() && known.is_empty() {
            unexpected += 1;
        }
        writeln!(out, "criterion {id:>2} {status} {name}: {detail}{known}").unwrap();
    };
    report(1, "gradient oracle", &mut criterion_1);
    report(2, "benchmark partitions", &mut criterion_2);
    report(3, "oracle equivalences", &mut criterion_3);
    let runs = ReferenceRuns::collect();
    report(4, "forgetting reproduction", &mut || criterion_4(&runs));
    report(5, "mitigation ordering", &mut || criterion_5(&runs));
    report(6, "strategy unit formulas", &mut criterion_6);
    report(7, "metric suite", &mut criterion_7);
    report(8, "logging golden files", &mut criterion_8);
    report(9, "end-to-end determinism", &mut criterion_9);
    report(10, "eval purity", &mut || criterion_10(&runs));
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
