use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::models::Dense;
use crate::training::{Plugin, StrategyState};

/// Consolidated output weights of one class.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsolidatedUnit {
    pub weight: Vec<f64>,
    pub bias: f64,
    /// Patterns of this class consolidated so far.
    pub past: usize,
}

/// Copy-weights-with-reinit: the output units of the current classes are
/// trained from zero and then merged into per-class consolidated weights,
/// which are what the classifier holds between experiences.
#[derive(Debug, Default)]
pub struct CwrStarPlugin {
    consolidated: BTreeMap<usize, ConsolidatedUnit>,
    current: BTreeMap<usize, usize>,
}

impl CwrStarPlugin {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn consolidated(&self) -> &BTreeMap<usize, ConsolidatedUnit> {
        &self.consolidated
    }
}

fn layer(state: &mut StrategyState) -> Result<&mut Dense> {
    state.model.incremental_layer_mut().ok_or_else(|| {
        Error::Configuration("cwr_star requires a single incremental classifier".into())
    })
}

impl Plugin for CwrStarPlugin {
    fn name(&self) -> &str {
        "cwr_star"
    }

    fn before_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        layer(state)?;
        self.current.clear();
        if let Some(ds) = &state.train_data {
            for i in 0..ds.len() {
                *self.current.entry(ds.target(i)?).or_insert(0) += 1;
            }
        }
        let current: Vec<usize> = self.current.keys().copied().collect();
        let dense = layer(state)?;
        let cols = dense.in_features();
        for c in current {
            dense.weight.value_mut().data_mut()[c * cols..(c + 1) * cols].fill(0.0);
            dense.bias.value_mut().data_mut()[c] = 0.0;
        }
        Ok(())
    }

    fn after_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        let current = std::mem::take(&mut self.current);
        let dense = layer(state)?;
        let cols = dense.in_features();
        if !current.is_empty() {
            let w = dense.weight.value().data();
            let b = dense.bias.value().data();
            let n = current.len() as f64;
            let w_mean = current
                .keys()
                .map(|&c| w[c * cols..(c + 1) * cols].iter().sum::<f64>())
                .sum::<f64>()
                / (n * cols as f64);
            let b_mean = current.keys().map(|&c| b[c]).sum::<f64>() / n;
            for (&c, &cur) in &current {
                let tw: Vec<f64> = w[c * cols..(c + 1) * cols]
                    .iter()
                    .map(|v| v - w_mean)
                    .collect();
                let tb = b[c] - b_mean;
                match self.consolidated.get_mut(&c) {
                    Some(unit) if unit.past > 0 => {
                        let wpast = (unit.past as f64 / cur as f64).sqrt();
                        for (cw, t) in unit.weight.iter_mut().zip(&tw) {
                            *cw = (*cw * wpast + t) / (wpast + 1.0);
                        }
                        unit.bias = (unit.bias * wpast + tb) / (wpast + 1.0);
                        unit.past += cur;
                    }
                    _ => {
                        self.consolidated.insert(
                            c,
                            ConsolidatedUnit {
                                weight: tw,
                                bias: tb,
                                past: cur,
                            },
                        );
                    }
                }
            }
        }
        for (&c, unit) in &self.consolidated {
            dense.weight.value_mut().data_mut()[c * cols..(c + 1) * cols]
                .copy_from_slice(&unit.weight);
            dense.bias.value_mut().data_mut()[c] = unit.bias;
        }
        Ok(())
    }
}
