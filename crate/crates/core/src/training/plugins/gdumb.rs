use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::derive_rng;
use crate::training::{GreedyBalancedBuffer, Plugin, StrategyState};

/// Greedy class-balanced memory; the model is re-initialized and trained
/// on the memory alone at every experience.
#[derive(Debug)]
pub struct GDumbPlugin {
    buffer: GreedyBalancedBuffer,
    rng: Option<ChaCha8Rng>,
}

impl GDumbPlugin {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("gdumb capacity must be positive"));
        }
        Ok(GDumbPlugin {
            buffer: GreedyBalancedBuffer::new(capacity),
            rng: None,
        })
    }

    pub fn buffer(&self) -> &GreedyBalancedBuffer {
        &self.buffer
    }
}

impl Plugin for GDumbPlugin {
    fn name(&self) -> &str {
        "gdumb"
    }

    fn before_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        let Some(exp) = &state.experience else {
            return Ok(());
        };
        let rng = self
            .rng
            .get_or_insert_with(|| derive_rng(state.config.seed, "gdumb/evict"));
        self.buffer.insert_dataset(exp.dataset.as_ref(), rng)?;
        state.model.reset_parameters();
        state.optimizer.reset_state();
        state.train_data = Some(Arc::new(self.buffer.to_dataset()?));
        Ok(())
    }
}
