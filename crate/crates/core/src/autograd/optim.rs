use std::collections::BTreeMap;

use super::{ParamId, Parameter};
use crate::error::{Error, Result};

/// Stochastic gradient descent with heavy-ball momentum and L2 weight decay:
/// `v <- momentum * v + g + weight_decay * theta`, `theta <- theta - lr * v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdOptimizer {
    learning_rate: f64,
    momentum: f64,
    weight_decay: f64,
    velocity: BTreeMap<ParamId, Vec<f64>>,
}

impl SgdOptimizer {
    pub fn new(learning_rate: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        if !(weight_decay >= 0.0) {
            return Err(Error::invalid(format!(
                "weight decay must be non-negative, got {weight_decay}"
            )));
        }
        Ok(SgdOptimizer {
            learning_rate,
            momentum,
            weight_decay,
            velocity: BTreeMap::new(),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn weight_decay(&self) -> f64 {
        self.weight_decay
    }

    /// Drops all velocity buffers.
    pub fn reset_state(&mut self) {
        self.velocity.clear();
    }

    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Parameter>) {
        for p in params {
            let n = p.len();
            let v = self.velocity.entry(p.id()).or_default();
            // Parameters only grow by appending rows, so new entries start at rest.
            v.resize(n, 0.0);
            let (value, grad) = {
                let g = p.grad().data().to_vec();
                (p.value_mut().data_mut(), g)
            };
            for i in 0..n {
                v[i] = self.momentum * v[i] + grad[i] + self.weight_decay * value[i];
                value[i] -= self.learning_rate * v[i];
            }
        }
    }
}

pub fn zero_grad<'a>(params: impl IntoIterator<Item = &'a mut Parameter>) {
    for p in params {
        p.zero_grad();
    }
}
