//! Config-driven experiment runner.
//!
//! A TOML config names a benchmark, a model, a training loop with plugins,
//! metrics and loggers. [`run`] executes it and writes a results bundle:
//! the echoed config, the metrics JSONL log, the final metrics, the
//! benchmark recipe and the final model.

mod config;
mod error;
mod runner;

pub use config::{
    default_metrics, BenchmarkConfig, ExperimentConfig, LoggerKind, LoopKind, ModelConfig,
    PluginConfig, ScenarioConfig, SourceConfig, StrategyConfig,
};
pub use error::{CliError, Result};
pub use runner::{
    build_benchmark, build_model, build_plugin, build_strategy, inspect, list, resolve, run,
    run_loop, RunOutcome, BENCHMARK_FILE, CONFIG_FILE, FINAL_METRICS_FILE, LIST_TOPICS,
    METRICS_FILE, MODEL_FILE, TEXT_LOG_FILE,
};
