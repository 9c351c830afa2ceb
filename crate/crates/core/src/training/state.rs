use crate::autograd::{SgdOptimizer, Tape, Tensor, Var};
use crate::benchmarks::Experience;
use crate::data::{Batch, DatasetRef};
use crate::error::{Error, Result};
use crate::models::MlpModel;
use crate::training::Phase;

/// Loop sizes and the root seed of a strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub train_epochs: usize,
    pub train_mb_size: usize,
    pub eval_mb_size: usize,
    /// Root of every seed the loop derives (minibatch shuffling, plugin
    /// sampling).
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            train_epochs: 1,
            train_mb_size: 32,
            eval_mb_size: 128,
            seed: 0,
        }
    }
}

/// Mutable loop state shared with plugins.
#[derive(Debug)]
pub struct StrategyState {
    pub model: MlpModel,
    pub optimizer: SgdOptimizer,
    pub config: TrainConfig,
    pub phase: Phase,
    /// Experience being trained on or evaluated.
    pub experience: Option<Experience>,
    /// Data iterated for the current training experience. Starts as the
    /// experience's own dataset; plugins may replace it in
    /// `before_training_exp`.
    pub train_data: Option<DatasetRef>,
    pub epoch: usize,
    /// Completed training iterations over the whole lifetime; never
    /// decreases.
    pub iteration: u64,
    /// Iterations completed in the current epoch or eval experience.
    pub window_iteration: usize,
    /// Iterations the current epoch or eval experience will run.
    pub window_total: usize,
    /// Number of experiences whose training has started.
    pub trained_experiences: usize,
    pub mb: Batch,
    pub tape: Tape,
    pub mb_output: Option<Var>,
    pub loss: Option<Var>,
}

impl StrategyState {
    pub fn new(model: MlpModel, optimizer: SgdOptimizer, config: TrainConfig) -> Self {
        StrategyState {
            model,
            optimizer,
            config,
            phase: Phase::Training,
            experience: None,
            train_data: None,
            epoch: 0,
            iteration: 0,
            window_iteration: 0,
            window_total: 0,
            trained_experiences: 0,
            mb: Batch {
                x: Tensor::zeros(&[0, 0]),
                y: Vec::new(),
                t: Vec::new(),
            },
            tape: Tape::new(),
            mb_output: None,
            loss: None,
        }
    }

    pub fn mb_output_value(&self) -> Option<&Tensor> {
        self.mb_output.map(|v| self.tape.value(v))
    }

    pub fn loss_value(&self) -> Option<f64> {
        self.loss.and_then(|v| self.tape.value(v).item().ok())
    }

    /// Argmax predictions of the current minibatch output.
    pub fn predictions(&self) -> Vec<usize> {
        self.mb_output_value()
            .map(Tensor::argmax_rows)
            .unwrap_or_default()
    }

    /// Adds a scalar term to the current loss.
    pub fn add_to_loss(&mut self, term: Var) -> Result<()> {
        let loss = self
            .loss
            .ok_or_else(|| Error::State("no loss recorded for this iteration".into()))?;
        self.loss = Some(self.tape.add(loss, term)?);
        Ok(())
    }

    pub fn current_task(&self) -> usize {
        self.experience.as_ref().map_or(0, Experience::task_label)
    }
}
