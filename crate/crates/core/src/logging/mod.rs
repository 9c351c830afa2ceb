//! Loggers rendering metric emissions: a plain text log, an interactive
//! terminal logger with a progress bar, and a line-delimited JSON log.

mod interactive;
mod jsonl;
mod text;

use serde::{Deserialize, Serialize};

pub use interactive::InteractiveLogger;
pub use jsonl::JsonlLogger;
pub use text::{format_metric_line, TextLogger};

use crate::error::Result;
use crate::evaluation::MetricValue;
use crate::training::Phase;

/// A metric value as handed to loggers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    #[serde(flatten)]
    pub metric: MetricValue,
    /// Seconds since the Unix epoch at emission.
    pub timestamp: f64,
    pub run_id: String,
}

/// Loop boundaries reported to loggers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoopEvent {
    PhaseStart(Phase),
    PhaseEnd(Phase),
    ExperienceStart {
        phase: Phase,
        experience: usize,
    },
    ExperienceEnd {
        phase: Phase,
        experience: usize,
    },
    EpochStart {
        epoch: usize,
    },
    EpochEnd {
        epoch: usize,
    },
    /// A training epoch or evaluation experience of `total` iterations
    /// begins.
    ProgressStart {
        total: usize,
    },
    Progress {
        done: usize,
        total: usize,
    },
}

/// Sink for metric records. Loggers observe; they never alter metric
/// state.
pub trait Logger {
    fn log_metric(&mut self, record: &LogRecord) -> Result<()>;

    fn on_event(&mut self, _event: &LoopEvent) -> Result<()> {
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}
