//! Training and evaluation loops, the plugin callback system and the
//! built-in continual learning strategies.

mod buffer;
mod hooks;
mod plugin;
pub mod plugins;
mod state;
mod strategy;

pub use buffer::{BufferPolicy, GreedyBalancedBuffer, ReplayBuffer};
pub use hooks::{Hook, Phase};
pub use plugin::Plugin;
pub use state::{StrategyState, TrainConfig};
pub use strategy::{batch_gradients, merge_experiences, MetricsDict, Strategy, STRATEGY_NAMES};
