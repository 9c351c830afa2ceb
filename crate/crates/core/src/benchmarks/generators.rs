use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde_json::json;

use super::{BenchmarkInstance, Experience, RecipeMetadata, Stream, TEST_STREAM, TRAIN_STREAM};
use crate::data::{targets_of, DatasetRef, Sample, SubsetView, TransformedDataset};
use crate::error::{Error, Result};
use crate::seed::derive_rng;

/// Options of the New Classes generator.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NcOptions {
    pub n_experiences: usize,
    pub seed: u64,
    /// Permutation of all classes; replaces the seeded shuffle.
    pub fixed_class_order: Option<Vec<usize>>,
    /// Number of classes in each experience; must sum to the class count.
    pub per_experience_classes: Option<Vec<usize>>,
    /// Experience `i` gets task label `i`; otherwise every label is 0.
    pub task_labels: bool,
    /// Relabel classes to `0..k` inside every experience (train and test).
    pub class_ids_from_zero_per_experience: bool,
}

/// New Classes: partitions the classes over experiences and assigns every
/// pattern of an experience's classes to it, on both streams.
pub fn nc_benchmark(
    train: &DatasetRef,
    test: &DatasetRef,
    opts: &NcOptions,
) -> Result<BenchmarkInstance> {
    let n = opts.n_experiences;
    if n == 0 {
        return Err(Error::invalid("n_experiences must be positive"));
    }
    let train_targets = targets_of(train.as_ref())?;
    let test_targets = targets_of(test.as_ref())?;
    let classes: BTreeSet<usize> = train_targets.iter().copied().collect();

    let order = match &opts.fixed_class_order {
        Some(order) => {
            let as_set: BTreeSet<usize> = order.iter().copied().collect();
            if as_set != classes || order.len() != classes.len() {
                return Err(Error::invalid(format!(
                    "fixed_class_order {order:?} is not a permutation of the classes {classes:?}"
                )));
            }
            order.clone()
        }
        None => {
            let mut order: Vec<usize> = classes.iter().copied().collect();
            order.shuffle(&mut derive_rng(opts.seed, "nc/class_order"));
            order
        }
    };

    let sizes = match &opts.per_experience_classes {
        Some(sizes) => {
            if sizes.len() != n
                || sizes.iter().sum::<usize>() != classes.len()
                || sizes.contains(&0)
            {
                return Err(Error::invalid(format!(
                    "per_experience_classes {sizes:?} must list {n} positive counts summing to {}",
                    classes.len()
                )));
            }
            sizes.clone()
        }
        None => {
            if !classes.len().is_multiple_of(n) {
                return Err(Error::invalid(format!(
                    "{} classes cannot be split evenly into {n} experiences",
                    classes.len()
                )));
            }
            vec![classes.len() / n; n]
        }
    };

    let mut train_exps = Vec::with_capacity(n);
    let mut test_exps = Vec::with_capacity(n);
    let mut start = 0;
    for (i, &k) in sizes.iter().enumerate() {
        let chunk = &order[start..start + k];
        start += k;
        let members: BTreeSet<usize> = chunk.iter().copied().collect();
        let task = if opts.task_labels { i } else { 0 };
        let class_map: Option<BTreeMap<usize, usize>> = opts
            .class_ids_from_zero_per_experience
            .then(|| chunk.iter().enumerate().map(|(j, &c)| (c, j)).collect());

        for (source, targets, out, stream) in [
            (train, &train_targets, &mut train_exps, TRAIN_STREAM),
            (test, &test_targets, &mut test_exps, TEST_STREAM),
        ] {
            let idx: Vec<usize> = targets
                .iter()
                .enumerate()
                .filter(|(_, y)| members.contains(y))
                .map(|(j, _)| j)
                .collect();
            let mut view = SubsetView::new(source.clone(), idx.clone())?.with_task_label(task);
            if let Some(map) = &class_map {
                view = view.with_class_map(map.clone());
            }
            out.push(Experience::new(Arc::new(view), i, stream)?.with_source_indices(idx));
        }
    }

    let recipe = RecipeMetadata {
        generator: "nc".into(),
        seed: Some(opts.seed),
        n_experiences: n,
        class_order: Some(order),
        params: BTreeMap::from([
            ("task_labels".into(), json!(opts.task_labels)),
            (
                "class_ids_from_zero_per_experience".into(),
                json!(opts.class_ids_from_zero_per_experience),
            ),
            ("per_experience_classes".into(), json!(sizes)),
        ]),
    };
    Ok(BenchmarkInstance {
        train_stream: Stream::new(TRAIN_STREAM, train_exps),
        test_stream: Stream::new(TEST_STREAM, test_exps),
        recipe,
    })
}

/// Splits `items` into `n` consecutive parts whose sizes differ by at most
/// one; the first `len % n` parts (counted from `offset`) get the extra item.
fn near_equal_split(items: &[usize], n: usize, offset: usize) -> Vec<Vec<usize>> {
    let base = items.len() / n;
    let extra = items.len() % n;
    let mut parts = Vec::with_capacity(n);
    let mut pos = 0;
    for i in 0..n {
        let gets_extra = (i + n - offset % n) % n < extra;
        let size = base + usize::from(gets_extra);
        parts.push(items[pos..pos + size].to_vec());
        pos += size;
    }
    parts
}

/// New Instances: random near-equal split of the training patterns; the
/// test stream is a single experience holding the whole test set.
pub fn ni_benchmark(
    train: &DatasetRef,
    test: &DatasetRef,
    n_experiences: usize,
    seed: u64,
    balance_classes: bool,
) -> Result<BenchmarkInstance> {
    let n = n_experiences;
    if n == 0 || n > train.len() {
        return Err(Error::invalid(format!(
            "n_experiences must lie in 1..={}, got {n}",
            train.len()
        )));
    }
    let mut rng = derive_rng(seed, "ni/shuffle");
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); n];
    if balance_classes {
        let targets = targets_of(train.as_ref())?;
        let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &y) in targets.iter().enumerate() {
            by_class.entry(y).or_default().push(i);
        }
        let mut offset = 0;
        for idx in by_class.values_mut() {
            idx.shuffle(&mut rng);
            for (part, chunk) in parts.iter_mut().zip(near_equal_split(idx, n, offset)) {
                part.extend(chunk);
            }
            offset += idx.len() % n;
        }
    } else {
        let mut idx: Vec<usize> = (0..train.len()).collect();
        idx.shuffle(&mut rng);
        parts = near_equal_split(&idx, n, 0);
    }

    let mut train_exps = Vec::with_capacity(n);
    for (i, mut idx) in parts.into_iter().enumerate() {
        idx.sort_unstable();
        let view = SubsetView::new(train.clone(), idx.clone())?.with_task_label(0);
        train_exps.push(Experience::new(Arc::new(view), i, TRAIN_STREAM)?.with_source_indices(idx));
    }
    let all: Vec<usize> = (0..test.len()).collect();
    let test_view = SubsetView::new(test.clone(), all.clone())?.with_task_label(0);
    let test_exp = Experience::new(Arc::new(test_view), 0, TEST_STREAM)?.with_source_indices(all);

    Ok(BenchmarkInstance {
        train_stream: Stream::new(TRAIN_STREAM, train_exps),
        test_stream: Stream::new(TEST_STREAM, vec![test_exp]),
        recipe: RecipeMetadata {
            generator: "ni".into(),
            seed: Some(seed),
            n_experiences: n,
            class_order: None,
            params: BTreeMap::from([("balance_classes".into(), json!(balance_classes))]),
        },
    })
}

fn feature_dim(ds: &DatasetRef) -> Result<usize> {
    if ds.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    Ok(ds.get(0)?.x.len())
}

/// Feature permutation of experience `index`: identity for 0, otherwise
/// drawn from `seed`.
pub fn experience_permutation(dim: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..dim).collect();
    if index > 0 {
        perm.shuffle(&mut derive_rng(seed, &format!("permutation/{index}")));
    }
    perm
}

fn permuted_view(base: &DatasetRef, perm: Arc<Vec<usize>>, task: usize) -> Result<DatasetRef> {
    let all: Vec<usize> = (0..base.len()).collect();
    let view: DatasetRef = Arc::new(SubsetView::new(base.clone(), all)?.with_task_label(task));
    Ok(Arc::new(TransformedDataset::new(
        view,
        Arc::new(move |mut s: Sample| {
            let src = s.x.data().to_vec();
            for (dst, &p) in s.x.data_mut().iter_mut().zip(perm.iter()) {
                *dst = src[p];
            }
            s
        }),
    )))
}

/// Every experience holds all patterns with features reordered by the
/// experience's permutation.
pub fn permutation_benchmark(
    train: &DatasetRef,
    test: &DatasetRef,
    n_experiences: usize,
    seed: u64,
    task_labels: bool,
) -> Result<BenchmarkInstance> {
    if n_experiences == 0 {
        return Err(Error::invalid("n_experiences must be positive"));
    }
    let dim = feature_dim(train)?;
    let mut train_exps = Vec::with_capacity(n_experiences);
    let mut test_exps = Vec::with_capacity(n_experiences);
    for i in 0..n_experiences {
        let perm = Arc::new(experience_permutation(dim, seed, i));
        let task = if task_labels { i } else { 0 };
        train_exps.push(Experience::new(
            permuted_view(train, perm.clone(), task)?,
            i,
            TRAIN_STREAM,
        )?);
        test_exps.push(Experience::new(
            permuted_view(test, perm, task)?,
            i,
            TEST_STREAM,
        )?);
    }
    Ok(BenchmarkInstance {
        train_stream: Stream::new(TRAIN_STREAM, train_exps),
        test_stream: Stream::new(TEST_STREAM, test_exps),
        recipe: RecipeMetadata {
            generator: "permuted".into(),
            seed: Some(seed),
            n_experiences,
            class_order: None,
            params: BTreeMap::from([("task_labels".into(), json!(task_labels))]),
        },
    })
}

/// Exact sine/cosine for multiples of 90 degrees.
fn sin_cos_degrees(degrees: f64) -> (f64, f64) {
    let d = degrees.rem_euclid(360.0);
    match d {
        0.0 => (0.0, 1.0),
        90.0 => (1.0, 0.0),
        180.0 => (0.0, -1.0),
        270.0 => (-1.0, 0.0),
        _ => d.to_radians().sin_cos(),
    }
}

/// Rotates a square row-major image counter-clockwise about its center with
/// nearest-neighbour resampling. Pixels sampled from outside become 0.
pub fn rotate_image(pixels: &[f64], side: usize, degrees: f64) -> Vec<f64> {
    let (sin, cos) = sin_cos_degrees(degrees);
    let center = (side as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            let dy = r as f64 - center;
            let dx = c as f64 - center;
            let sx = (cos * dx - sin * dy + center).round();
            let sy = (sin * dx + cos * dy + center).round();
            if sx >= 0.0 && sy >= 0.0 && (sx as usize) < side && (sy as usize) < side {
                out[r * side + c] = pixels[sy as usize * side + sx as usize];
            }
        }
    }
    out
}

fn rotated_view(base: &DatasetRef, side: usize, degrees: f64) -> DatasetRef {
    Arc::new(TransformedDataset::new(
        base.clone(),
        Arc::new(move |mut s: Sample| {
            let rotated = rotate_image(s.x.data(), side, degrees);
            s.x.data_mut().copy_from_slice(&rotated);
            s
        }),
    ))
}

/// Experience `i` rotates every image by `angles[i]` degrees.
pub fn rotation_benchmark(
    train: &DatasetRef,
    test: &DatasetRef,
    n_experiences: usize,
    angles: &[f64],
) -> Result<BenchmarkInstance> {
    if angles.len() != n_experiences || n_experiences == 0 {
        return Err(Error::invalid(format!(
            "expected {n_experiences} angles (one per experience), got {}",
            angles.len()
        )));
    }
    let dim = feature_dim(train)?;
    let side = (dim as f64).sqrt().round() as usize;
    if side * side != dim {
        return Err(Error::invalid(format!(
            "{dim} features do not form a square image"
        )));
    }
    let mut train_exps = Vec::with_capacity(n_experiences);
    let mut test_exps = Vec::with_capacity(n_experiences);
    for (i, &angle) in angles.iter().enumerate() {
        train_exps.push(Experience::new(
            rotated_view(train, side, angle),
            i,
            TRAIN_STREAM,
        )?);
        test_exps.push(Experience::new(
            rotated_view(test, side, angle),
            i,
            TEST_STREAM,
        )?);
    }
    Ok(BenchmarkInstance {
        train_stream: Stream::new(TRAIN_STREAM, train_exps),
        test_stream: Stream::new(TEST_STREAM, test_exps),
        recipe: RecipeMetadata {
            generator: "rotated".into(),
            seed: None,
            n_experiences,
            class_order: None,
            params: BTreeMap::from([("angles".into(), json!(angles))]),
        },
    })
}

/// Streams that mirror the given dataset lists verbatim. `task_labels`, when
/// given, overrides the task label of each train experience (and of the
/// matching test experience when the lists have equal length); otherwise the
/// datasets' own per-pattern labels pass through.
pub fn benchmark_from_datasets(
    train_datasets: &[DatasetRef],
    test_datasets: &[DatasetRef],
    task_labels: Option<&[usize]>,
) -> Result<BenchmarkInstance> {
    if train_datasets.is_empty() {
        return Err(Error::invalid("at least one train dataset is required"));
    }
    if test_datasets.len() != 1 && test_datasets.len() != train_datasets.len() {
        return Err(Error::invalid(format!(
            "expected 1 or {} test datasets, got {}",
            train_datasets.len(),
            test_datasets.len()
        )));
    }
    if let Some(t) = task_labels {
        if t.len() != train_datasets.len() {
            return Err(Error::Length {
                expected: train_datasets.len(),
                actual: t.len(),
            });
        }
    }
    let wrap = |ds: &DatasetRef, task: Option<usize>| -> Result<DatasetRef> {
        Ok(match task {
            Some(t) => {
                let all: Vec<usize> = (0..ds.len()).collect();
                Arc::new(SubsetView::new(ds.clone(), all)?.with_task_label(t))
            }
            None => ds.clone(),
        })
    };
    let paired = test_datasets.len() == train_datasets.len();
    let train_exps = train_datasets
        .iter()
        .enumerate()
        .map(|(i, ds)| Experience::new(wrap(ds, task_labels.map(|t| t[i]))?, i, TRAIN_STREAM))
        .collect::<Result<Vec<_>>>()?;
    let test_exps = test_datasets
        .iter()
        .enumerate()
        .map(|(i, ds)| {
            let task = if paired {
                task_labels.map(|t| t[i])
            } else {
                None
            };
            Experience::new(wrap(ds, task)?, i, TEST_STREAM)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkInstance {
        train_stream: Stream::new(TRAIN_STREAM, train_exps),
        test_stream: Stream::new(TEST_STREAM, test_exps),
        recipe: RecipeMetadata {
            generator: "datasets".into(),
            seed: None,
            n_experiences: train_datasets.len(),
            class_order: None,
            params: BTreeMap::from([("task_labels".into(), json!(task_labels))]),
        },
    })
}
