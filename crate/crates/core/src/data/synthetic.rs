use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::TensorDataset;
use crate::error::{Error, Result};
use crate::seed::derive_rng;

/// Gaussian-cluster classification data.
///
/// Class `c` is centered at a unit-norm direction drawn from `seed`, scaled
/// by `class_separation`; samples add unit-variance isotropic noise. Train
/// and test splits share the centers but use independent noise streams.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub input_dim: usize,
    pub class_separation: f64,
    pub seed: u64,
}

fn centers(n_classes: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = derive_rng(seed, "synthetic/centers");
    (0..n_classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|a| a / norm).collect();
            }
        })
        .collect()
}

fn draw(
    centers: &[Vec<f64>],
    per_class: usize,
    separation: f64,
    seed: u64,
    label: &str,
) -> Result<TensorDataset> {
    let dim = centers.first().map_or(0, Vec::len);
    let mut rng = derive_rng(seed, label);
    let mut features = Vec::with_capacity(centers.len() * per_class * dim);
    let mut targets = Vec::with_capacity(centers.len() * per_class);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            for &u in center {
                features.push(separation * u + rng.sample::<f64, _>(StandardNormal));
            }
            targets.push(c);
        }
    }
    TensorDataset::new(features, vec![dim], targets, None)
}

fn validate(n_classes: usize, per_class: usize, dim: usize) -> Result<()> {
    if n_classes == 0 || per_class == 0 || dim == 0 {
        return Err(Error::invalid(
            "synthetic data needs positive class count, samples per class and input dimension",
        ));
    }
    Ok(())
}

/// Samples are stored class by class in ascending class order.
pub fn make_synthetic_classification(
    n_classes: usize,
    samples_per_class: usize,
    input_dim: usize,
    seed: u64,
    class_separation: f64,
) -> Result<Arc<TensorDataset>> {
    validate(n_classes, samples_per_class, input_dim)?;
    let c = centers(n_classes, input_dim, seed);
    Ok(Arc::new(draw(
        &c,
        samples_per_class,
        class_separation,
        seed,
        "synthetic/train",
    )?))
}

/// Train and test splits over shared centers. The train split equals
/// [`make_synthetic_classification`] with the same arguments.
pub fn make_synthetic_split(
    spec: &SyntheticSpec,
) -> Result<(Arc<TensorDataset>, Arc<TensorDataset>)> {
    validate(spec.n_classes, spec.train_per_class, spec.input_dim)?;
    validate(spec.n_classes, spec.test_per_class, spec.input_dim)?;
    let c = centers(spec.n_classes, spec.input_dim, spec.seed);
    let train = draw(
        &c,
        spec.train_per_class,
        spec.class_separation,
        spec.seed,
        "synthetic/train",
    )?;
    let test = draw(
        &c,
        spec.test_per_class,
        spec.class_separation,
        spec.seed,
        "synthetic/test",
    )?;
    Ok((Arc::new(train), Arc::new(test)))
}
