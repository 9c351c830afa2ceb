use rand::seq::SliceRandom;

use crate::autograd::Tensor;
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// A collated minibatch: features stacked as `m x d` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub x: Tensor,
    pub y: Vec<usize>,
    pub t: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.x.cols()
    }

    /// Appends the rows of `other`.
    pub fn extend(&mut self, other: &Batch) -> Result<()> {
        if other.is_empty() {
            return Ok(());
        }
        if !self.is_empty() && self.feature_dim() != other.feature_dim() {
            return Err(Error::Shape {
                op: "batch extend",
                lhs: self.x.shape().to_vec(),
                rhs: other.x.shape().to_vec(),
            });
        }
        let d = other.feature_dim();
        let mut data = self.x.data().to_vec();
        data.extend_from_slice(other.x.data());
        self.y.extend_from_slice(&other.y);
        self.t.extend_from_slice(&other.t);
        self.x = Tensor::matrix(self.y.len(), d, data)?;
        Ok(())
    }
}

/// Loads `indices` from `ds` and stacks them into a batch.
pub fn collate(ds: &dyn Dataset, indices: &[usize]) -> Result<Batch> {
    let samples = indices
        .iter()
        .map(|&i| ds.get(i))
        .collect::<Result<Vec<_>>>()?;
    Batch::from_samples(&samples)
}

impl Batch {
    /// Stacks samples of equal feature size.
    pub fn from_samples(samples: &[Sample]) -> Result<Batch> {
        let mut data = Vec::new();
        let mut y = Vec::with_capacity(samples.len());
        let mut t = Vec::with_capacity(samples.len());
        let dim = samples.first().map_or(0, |s| s.x.len());
        for s in samples {
            if s.x.len() != dim {
                return Err(Error::Shape {
                    op: "collate",
                    lhs: vec![dim],
                    rhs: s.x.shape().to_vec(),
                });
            }
            data.extend_from_slice(s.x.data());
            y.push(s.y);
            t.push(s.t);
        }
        let x = Tensor::matrix(samples.len(), dim, data)?;
        Ok(Batch { x, y, t })
    }
}

/// Yields index batches over `0..len`. With a shuffle seed the order is a
/// permutation that depends only on the seed; otherwise ascending.
#[derive(Clone, Debug)]
pub struct BatchIterator {
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl BatchIterator {
    pub fn new(len: usize, batch_size: usize, shuffle_seed: Option<u64>) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        let mut order: Vec<usize> = (0..len).collect();
        if let Some(seed) = shuffle_seed {
            order.shuffle(&mut rng_from_seed(seed));
        }
        Ok(BatchIterator {
            order,
            batch_size,
            pos: 0,
        })
    }

    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl Iterator for BatchIterator {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(batch)
    }
}
