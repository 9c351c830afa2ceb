use rand_chacha::ChaCha8Rng;

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::seed::derive_rng;
use crate::training::{BufferPolicy, Plugin, ReplayBuffer, StrategyState};

/// Rehearsal: every training minibatch is extended with samples drawn from
/// a bounded memory of past experiences.
#[derive(Debug)]
pub struct ReplayPlugin {
    buffer: ReplayBuffer,
    storage_rng: Option<ChaCha8Rng>,
    draw_rng: Option<ChaCha8Rng>,
}

impl ReplayPlugin {
    pub fn new(capacity: usize, policy: BufferPolicy) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        Ok(ReplayPlugin {
            buffer: ReplayBuffer::new(capacity, policy),
            storage_rng: None,
            draw_rng: None,
        })
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }
}

impl Plugin for ReplayPlugin {
    fn name(&self) -> &str {
        "replay"
    }

    fn before_training_iteration(&mut self, state: &mut StrategyState) -> Result<()> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let rng = self
            .draw_rng
            .get_or_insert_with(|| derive_rng(state.config.seed, "replay/draw"));
        let drawn = self.buffer.draw(state.config.train_mb_size, rng);
        state.mb.extend(&Batch::from_samples(&drawn)?)
    }

    fn after_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        let Some(exp) = &state.experience else {
            return Ok(());
        };
        let rng = self
            .storage_rng
            .get_or_insert_with(|| derive_rng(state.config.seed, "replay/storage"));
        self.buffer.insert_dataset(exp.dataset.as_ref(), rng)
    }
}
