use serde::{Deserialize, Serialize};

use super::{padded, param_values, quadratic_penalty, ParamVecs};
use crate::data::{collate, BatchIterator};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::training::{batch_gradients, Plugin, StrategyState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EwcMode {
    /// One Fisher/anchor pair per past experience.
    Separate,
    /// A single running pair, `F <- decay * F_old + F_new`.
    Online { decay: f64 },
}

/// Elastic weight consolidation: adds
/// `(lambda / 2) * sum_k sum_j F_kj (theta_j - theta*_kj)^2` to the loss.
#[derive(Debug)]
pub struct EwcPlugin {
    lambda: f64,
    mode: EwcMode,
    fisher_batches: usize,
    /// (Fisher diagonal, anchor) per consolidated experience.
    consolidated: Vec<(ParamVecs, ParamVecs)>,
}

impl EwcPlugin {
    pub fn new(lambda: f64, mode: EwcMode, fisher_batches: usize) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "ewc lambda must be >= 0, got {lambda}"
            )));
        }
        if let EwcMode::Online { decay } = mode {
            if !(0.0..=1.0).contains(&decay) {
                return Err(Error::invalid(format!(
                    "ewc decay must lie in [0, 1], got {decay}"
                )));
            }
        }
        if fisher_batches == 0 {
            return Err(Error::invalid("fisher_batches must be positive"));
        }
        Ok(EwcPlugin {
            lambda,
            mode,
            fisher_batches,
            consolidated: Vec::new(),
        })
    }

    /// Stored (Fisher, anchor) pairs, oldest first.
    pub fn consolidated(&self) -> &[(ParamVecs, ParamVecs)] {
        &self.consolidated
    }

    /// Empirical Fisher diagonal: mean squared minibatch loss gradient over
    /// up to `fisher_batches` shuffled minibatches of the training data.
    fn fisher(&self, state: &StrategyState) -> Result<ParamVecs> {
        let mut fisher: ParamVecs = state
            .model
            .params()
            .into_iter()
            .map(|p| (p.id(), vec![0.0; p.len()]))
            .collect();
        let Some(data) = &state.train_data else {
            return Ok(fisher);
        };
        let seed = derive_seed(
            state.config.seed,
            &format!("ewc/fisher/{}", state.trained_experiences),
        );
        let batches = BatchIterator::new(data.len(), state.config.train_mb_size, Some(seed))?;
        let mut used = 0usize;
        for idx in batches.take(self.fisher_batches) {
            let batch = collate(data.as_ref(), &idx)?;
            let grads = batch_gradients(&state.model, &batch)?;
            for (id, g) in grads.iter() {
                if let Some(f) = fisher.get_mut(id) {
                    for (fi, gi) in f.iter_mut().zip(g.data()) {
                        *fi += gi * gi;
                    }
                }
            }
            used += 1;
        }
        if used > 0 {
            for f in fisher.values_mut() {
                f.iter_mut().for_each(|v| *v /= used as f64);
            }
        }
        Ok(fisher)
    }
}

impl Plugin for EwcPlugin {
    fn name(&self) -> &str {
        "ewc"
    }

    fn before_backward(&mut self, state: &mut StrategyState) -> Result<()> {
        if self.lambda == 0.0 || self.consolidated.is_empty() {
            return Ok(());
        }
        for (fisher, anchor) in &self.consolidated {
            if let Some(p) = quadratic_penalty(state, anchor, fisher)? {
                let term = state.tape.scale(p, self.lambda / 2.0);
                state.add_to_loss(term)?;
            }
        }
        Ok(())
    }

    fn after_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        if self.lambda == 0.0 {
            return Ok(());
        }
        let fisher = self.fisher(state)?;
        let anchor = param_values(state);
        match self.mode {
            EwcMode::Separate => self.consolidated.push((fisher, anchor)),
            EwcMode::Online { decay } => {
                let merged = match self.consolidated.pop() {
                    None => fisher,
                    Some((old, _)) => fisher
                        .into_iter()
                        .map(|(id, new)| {
                            let prev = old
                                .get(&id)
                                .map_or_else(|| vec![0.0; new.len()], |o| padded(o, new.len()));
                            let f = new.iter().zip(&prev).map(|(n, o)| decay * o + n).collect();
                            (id, f)
                        })
                        .collect(),
                };
                self.consolidated.push((merged, anchor));
            }
        }
        Ok(())
    }
}
