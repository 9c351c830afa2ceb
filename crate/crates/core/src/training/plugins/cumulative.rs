use std::sync::Arc;

use crate::data::{concat, DatasetRef};
use crate::error::Result;
use crate::training::{Plugin, StrategyState};

/// Replaces each experience's training data with the concatenation of
/// every experience seen so far, the current one included.
#[derive(Debug, Default)]
pub struct CumulativePlugin {
    seen: Vec<DatasetRef>,
}

impl Plugin for CumulativePlugin {
    fn name(&self) -> &str {
        "cumulative"
    }

    fn before_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        if let Some(ds) = state.train_data.clone() {
            self.seen.push(ds);
            state.train_data = Some(Arc::new(concat(&self.seen)));
        }
        Ok(())
    }
}
