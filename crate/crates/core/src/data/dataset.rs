use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::autograd::Tensor;
use crate::error::{Error, Result};

/// One supervised pattern: features, class and task label.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Tensor,
    pub y: usize,
    pub t: usize,
}

/// Random-access collection of samples.
///
/// `get` is lazy: implementations may load or compute the payload on every
/// call. `target` and `task_label` give access to metadata and should be
/// overridden when that is cheaper than materializing the sample.
pub trait Dataset: Send + Sync + fmt::Debug {
    fn len(&self) -> usize;

    fn get(&self, index: usize) -> Result<Sample>;

    fn target(&self, index: usize) -> Result<usize> {
        Ok(self.get(index)?.y)
    }

    fn task_label(&self, index: usize) -> Result<usize> {
        Ok(self.get(index)?.t)
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub type DatasetRef = Arc<dyn Dataset>;

pub(crate) fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(Error::Index {
            what: "sample",
            index,
            bound: len,
        });
    }
    Ok(())
}

/// Distinct class indices of a dataset, read through [`Dataset::target`].
pub fn classes_of(ds: &dyn Dataset) -> Result<BTreeSet<usize>> {
    (0..ds.len()).map(|i| ds.target(i)).collect()
}

pub fn task_labels_of(ds: &dyn Dataset) -> Result<BTreeSet<usize>> {
    (0..ds.len()).map(|i| ds.task_label(i)).collect()
}

pub fn targets_of(ds: &dyn Dataset) -> Result<Vec<usize>> {
    (0..ds.len()).map(|i| ds.target(i)).collect()
}

/// In-memory dataset of equally sized feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorDataset {
    features: Vec<f64>,
    feature_shape: Vec<usize>,
    targets: Vec<usize>,
    tasks: Vec<usize>,
}

impl TensorDataset {
    /// `features` holds `targets.len()` rows of `product(feature_shape)` values.
    pub fn new(
        features: Vec<f64>,
        feature_shape: Vec<usize>,
        targets: Vec<usize>,
        tasks: Option<Vec<usize>>,
    ) -> Result<Self> {
        let dim: usize = feature_shape.iter().product();
        if features.len() != dim * targets.len() {
            return Err(Error::Length {
                expected: dim * targets.len(),
                actual: features.len(),
            });
        }
        let tasks = tasks.unwrap_or_else(|| vec![0; targets.len()]);
        if tasks.len() != targets.len() {
            return Err(Error::Length {
                expected: targets.len(),
                actual: tasks.len(),
            });
        }
        Ok(TensorDataset {
            features,
            feature_shape,
            targets,
            tasks,
        })
    }

    pub fn from_samples(samples: &[Sample]) -> Result<Self> {
        let shape = samples
            .first()
            .map(|s| s.x.shape().to_vec())
            .unwrap_or_else(|| vec![0]);
        let mut features = Vec::new();
        for s in samples {
            if s.x.shape() != shape.as_slice() {
                return Err(Error::Shape {
                    op: "from_samples",
                    lhs: shape.clone(),
                    rhs: s.x.shape().to_vec(),
                });
            }
            features.extend_from_slice(s.x.data());
        }
        let targets = samples.iter().map(|s| s.y).collect();
        let tasks = samples.iter().map(|s| s.t).collect();
        Self::new(features, shape, targets, Some(tasks))
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_shape.iter().product()
    }
}

impl Dataset for TensorDataset {
    fn len(&self) -> usize {
        self.targets.len()
    }

    fn get(&self, index: usize) -> Result<Sample> {
        check_index(index, self.len())?;
        let d = self.feature_dim();
        let x = Tensor::new(
            self.feature_shape.clone(),
            self.features[index * d..(index + 1) * d].to_vec(),
        )?;
        Ok(Sample {
            x,
            y: self.targets[index],
            t: self.tasks[index],
        })
    }

    fn target(&self, index: usize) -> Result<usize> {
        check_index(index, self.len())?;
        Ok(self.targets[index])
    }

    fn task_label(&self, index: usize) -> Result<usize> {
        check_index(index, self.len())?;
        Ok(self.tasks[index])
    }
}

/// Index view over a base dataset with optional class remapping and task
/// label override. Holds indices only.
#[derive(Clone, Debug)]
pub struct SubsetView {
    base: DatasetRef,
    indices: Arc<Vec<usize>>,
    class_map: Option<Arc<BTreeMap<usize, usize>>>,
    task_override: Option<usize>,
}

impl SubsetView {
    pub fn new(base: DatasetRef, indices: Vec<usize>) -> Result<Self> {
        let n = base.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Index {
                what: "subset",
                index: bad,
                bound: n,
            });
        }
        Ok(SubsetView {
            base,
            indices: Arc::new(indices),
            class_map: None,
            task_override: None,
        })
    }

    /// Relabels classes through `map`; classes missing from the map keep
    /// their original index.
    pub fn with_class_map(mut self, map: BTreeMap<usize, usize>) -> Self {
        self.class_map = Some(Arc::new(map));
        self
    }

    pub fn with_task_label(mut self, t: usize) -> Self {
        self.task_override = Some(t);
        self
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    fn map_class(&self, y: usize) -> usize {
        match &self.class_map {
            Some(map) => map.get(&y).copied().unwrap_or(y),
            None => y,
        }
    }
}

impl Dataset for SubsetView {
    fn len(&self) -> usize {
        self.indices.len()
    }

    fn get(&self, index: usize) -> Result<Sample> {
        check_index(index, self.len())?;
        let mut s = self.base.get(self.indices[index])?;
        s.y = self.map_class(s.y);
        if let Some(t) = self.task_override {
            s.t = t;
        }
        Ok(s)
    }

    fn target(&self, index: usize) -> Result<usize> {
        check_index(index, self.len())?;
        Ok(self.map_class(self.base.target(self.indices[index])?))
    }

    fn task_label(&self, index: usize) -> Result<usize> {
        check_index(index, self.len())?;
        match self.task_override {
            Some(t) => Ok(t),
            None => self.base.task_label(self.indices[index]),
        }
    }
}

/// Ordered concatenation of datasets.
#[derive(Clone, Debug)]
pub struct ConcatDataset {
    bases: Vec<DatasetRef>,
    // offsets[k] = total length of bases[..k]
    offsets: Vec<usize>,
    len: usize,
}

impl ConcatDataset {
    pub fn new(bases: Vec<DatasetRef>) -> Self {
        let mut offsets = Vec::with_capacity(bases.len());
        let mut len = 0;
        for b in &bases {
            offsets.push(len);
            len += b.len();
        }
        ConcatDataset {
            bases,
            offsets,
            len,
        }
    }

    fn locate(&self, index: usize) -> Result<(usize, usize)> {
        check_index(index, self.len)?;
        // Last base starting at or before `index`; empty bases sharing an
        // offset precede it.
        let k = self.offsets.partition_point(|&o| o <= index) - 1;
        Ok((k, index - self.offsets[k]))
    }
}

impl Dataset for ConcatDataset {
    fn len(&self) -> usize {
        self.len
    }

    fn get(&self, index: usize) -> Result<Sample> {
        let (k, i) = self.locate(index)?;
        self.bases[k].get(i)
    }

    fn target(&self, index: usize) -> Result<usize> {
        let (k, i) = self.locate(index)?;
        self.bases[k].target(i)
    }

    fn task_label(&self, index: usize) -> Result<usize> {
        let (k, i) = self.locate(index)?;
        self.bases[k].task_label(i)
    }
}

pub type TransformFn = Arc<dyn Fn(Sample) -> Sample + Send + Sync>;

/// Applies a pure per-sample transform on access.
///
/// The transform must not change the class or task label; metadata queries
/// bypass it.
#[derive(Clone)]
pub struct TransformedDataset {
    base: DatasetRef,
    transform: TransformFn,
}

impl fmt::Debug for TransformedDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformedDataset")
            .field("base", &self.base)
            .finish_non_exhaustive()
    }
}

impl TransformedDataset {
    pub fn new(base: DatasetRef, transform: TransformFn) -> Self {
        TransformedDataset { base, transform }
    }
}

impl Dataset for TransformedDataset {
    fn len(&self) -> usize {
        self.base.len()
    }

    fn get(&self, index: usize) -> Result<Sample> {
        Ok((self.transform)(self.base.get(index)?))
    }

    fn target(&self, index: usize) -> Result<usize> {
        self.base.target(index)
    }

    fn task_label(&self, index: usize) -> Result<usize> {
        self.base.task_label(index)
    }
}

pub fn subset(ds: &DatasetRef, indices: Vec<usize>) -> Result<SubsetView> {
    SubsetView::new(ds.clone(), indices)
}

pub fn concat(datasets: &[DatasetRef]) -> ConcatDataset {
    ConcatDataset::new(datasets.to_vec())
}

pub fn with_transform(ds: &DatasetRef, f: TransformFn) -> TransformedDataset {
    TransformedDataset::new(ds.clone(), f)
}
