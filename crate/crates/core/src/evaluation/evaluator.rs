use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use indexmap::IndexMap;

use super::plugin_metrics::{default_metrics, PluginMetric};
use super::value::{MetricData, MetricValue};
use crate::error::{Error, Result};
use crate::logging::{LogRecord, Logger, LoopEvent};
use crate::training::{Hook, MetricsDict, Phase, StrategyState};

/// Every emission so far: metric name to `(x, value)` pairs, in first
/// emission order.
pub type ResultsDict = IndexMap<String, Vec<(u64, MetricData)>>;

/// Collects plugin-metric emissions and forwards them to loggers.
pub struct EvaluationPlugin {
    metrics: Vec<Box<dyn PluginMetric>>,
    loggers: Vec<Box<dyn Logger>>,
    results: ResultsDict,
    window: MetricsDict,
    run_id: String,
}

impl fmt::Debug for EvaluationPlugin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvaluationPlugin")
            .field("metrics", &self.metrics)
            .field("loggers", &self.loggers.len())
            .field("run_id", &self.run_id)
            .finish_non_exhaustive()
    }
}

impl Default for EvaluationPlugin {
    fn default() -> Self {
        Self::new(default_metrics(), Vec::new())
    }
}

impl EvaluationPlugin {
    pub fn new(metrics: Vec<Box<dyn PluginMetric>>, loggers: Vec<Box<dyn Logger>>) -> Self {
        EvaluationPlugin {
            metrics,
            loggers,
            results: ResultsDict::new(),
            window: MetricsDict::new(),
            run_id: String::new(),
        }
    }

    pub fn with_run_id(mut self, run_id: impl Into<String>) -> Self {
        self.run_id = run_id.into();
        self
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn add_logger(&mut self, logger: Box<dyn Logger>) {
        self.loggers.push(logger);
    }

    pub fn metric_ids(&self) -> Vec<String> {
        self.metrics.iter().map(|m| m.id()).collect()
    }

    pub fn all_results(&self) -> &ResultsDict {
        &self.results
    }

    /// Last value of every metric emitted so far.
    pub fn last_results(&self) -> MetricsDict {
        self.results
            .iter()
            .filter_map(|(k, v)| Some((k.clone(), v.last()?.1.clone())))
            .collect()
    }

    /// Starts a new window for [`EvaluationPlugin::window_results`].
    pub fn begin_window(&mut self) {
        self.window.clear();
    }

    /// Last value of every metric emitted since [`EvaluationPlugin::begin_window`].
    pub fn window_results(&self) -> MetricsDict {
        self.window.clone()
    }

    /// Records `value` and forwards it to every logger in registration
    /// order.
    pub fn route(&mut self, value: MetricValue) -> Result<()> {
        let series = self.results.entry(value.name.clone()).or_default();
        if let Some(&(last, _)) = series.last() {
            if value.x < last {
                return Err(Error::State(format!(
                    "metric {} emitted at x={} after x={last}",
                    value.name, value.x
                )));
            }
        }
        series.push((value.x, value.value.clone()));
        self.window.insert(value.name.clone(), value.value.clone());
        let record = LogRecord {
            metric: value,
            timestamp: unix_time(),
            run_id: self.run_id.clone(),
        };
        for l in &mut self.loggers {
            l.log_metric(&record)?;
        }
        Ok(())
    }

    /// Runs every metric on `hook`, routes their emissions, then notifies
    /// the loggers of loop boundaries.
    pub fn on_hook(&mut self, hook: Hook, state: &StrategyState) -> Result<()> {
        let mut emitted = Vec::new();
        for m in &mut self.metrics {
            emitted.extend(m.on_hook(hook, state)?);
        }
        for v in emitted {
            self.route(v)?;
        }
        for event in loop_events(hook, state) {
            for l in &mut self.loggers {
                l.on_event(&event)?;
            }
        }
        Ok(())
    }

    /// Flushes every logger.
    pub fn flush(&mut self) -> Result<()> {
        for l in &mut self.loggers {
            l.flush()?;
        }
        Ok(())
    }
}

fn unix_time() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn loop_events(hook: Hook, state: &StrategyState) -> Vec<LoopEvent> {
    let exp = state.experience.as_ref().map_or(0, |e| e.index);
    let progress = LoopEvent::Progress {
        done: state.window_iteration,
        total: state.window_total,
    };
    let start = LoopEvent::ProgressStart {
        total: state.window_total,
    };
    match hook {
        Hook::BeforeTraining => vec![LoopEvent::PhaseStart(Phase::Training)],
        Hook::AfterTraining => vec![LoopEvent::PhaseEnd(Phase::Training)],
        Hook::BeforeEval => vec![LoopEvent::PhaseStart(Phase::Eval)],
        Hook::AfterEval => vec![LoopEvent::PhaseEnd(Phase::Eval)],
        Hook::BeforeTrainingExp => vec![LoopEvent::ExperienceStart {
            phase: Phase::Training,
            experience: exp,
        }],
        Hook::AfterTrainingExp => vec![LoopEvent::ExperienceEnd {
            phase: Phase::Training,
            experience: exp,
        }],
        Hook::BeforeTrainingEpoch => vec![LoopEvent::EpochStart { epoch: state.epoch }, start],
        Hook::AfterTrainingEpoch => vec![LoopEvent::EpochEnd { epoch: state.epoch }],
        Hook::BeforeEvalExp => vec![
            LoopEvent::ExperienceStart {
                phase: Phase::Eval,
                experience: exp,
            },
            start,
        ],
        Hook::AfterEvalExp => vec![LoopEvent::ExperienceEnd {
            phase: Phase::Eval,
            experience: exp,
        }],
        Hook::AfterTrainingIteration | Hook::AfterEvalIteration => vec![progress],
        _ => Vec::new(),
    }
}
