use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::standalone::{Accuracy, ConfusionMatrix, Forgetting, LossMetric, Metric, Timing};
use super::value::{MetricData, MetricValue};
use crate::benchmarks::TRAIN_STREAM;
use crate::error::{Error, Result};
use crate::training::{Hook, Phase, StrategyState};

/// Emission window of a plugin metric. Minibatch and epoch metrics observe
/// training; experience and stream metrics observe evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Minibatch,
    Epoch,
    Experience,
    Stream,
}

impl Granularity {
    fn suffix(self) -> &'static str {
        match self {
            Granularity::Minibatch => "MB",
            Granularity::Epoch => "Epoch",
            Granularity::Experience => "Exp",
            Granularity::Stream => "Stream",
        }
    }

    fn phase(self) -> Phase {
        match self {
            Granularity::Minibatch | Granularity::Epoch => Phase::Training,
            Granularity::Experience | Granularity::Stream => Phase::Eval,
        }
    }

    fn resets_at(self, hook: Hook) -> bool {
        matches!(
            (self, hook),
            (Granularity::Minibatch, Hook::BeforeTrainingIteration)
                | (Granularity::Epoch, Hook::BeforeTrainingEpoch)
                | (Granularity::Experience, Hook::BeforeEvalExp)
                | (Granularity::Stream, Hook::BeforeEval)
        )
    }

    fn updates_at(self, hook: Hook) -> bool {
        match self {
            Granularity::Minibatch | Granularity::Epoch => hook == Hook::AfterTrainingIteration,
            Granularity::Experience | Granularity::Stream => hook == Hook::AfterEvalIteration,
        }
    }

    fn emits_at(self, hook: Hook) -> bool {
        matches!(
            (self, hook),
            (Granularity::Minibatch, Hook::AfterTrainingIteration)
                | (Granularity::Epoch, Hook::AfterTrainingEpoch)
                | (Granularity::Experience, Hook::AfterEvalExp)
                | (Granularity::Stream, Hook::AfterEval)
        )
    }

    fn value_for(self, id: &str, x: u64, value: MetricData, state: &StrategyState) -> MetricValue {
        let stream = stream_of(state);
        let task = state.current_task();
        let exp = state.experience.as_ref().map(|e| e.index);
        let (task, exp) = match self {
            Granularity::Minibatch | Granularity::Epoch => (Some(task), None),
            Granularity::Experience => (Some(task), exp),
            Granularity::Stream => (None, None),
        };
        MetricValue::new(id, x, value, self.phase(), stream, task, exp)
    }
}

fn stream_of(state: &StrategyState) -> &str {
    match state.phase {
        Phase::Training => TRAIN_STREAM,
        Phase::Eval => state
            .experience
            .as_ref()
            .map_or(crate::benchmarks::TEST_STREAM, |e| e.origin_stream.as_str()),
    }
}

/// A metric attached to the loops. `on_hook` is called at every hook with
/// read-only access to the loop state and returns the values to emit.
pub trait PluginMetric: fmt::Debug {
    /// Metric id, the first segment of emitted names.
    fn id(&self) -> String;

    fn on_hook(&mut self, hook: Hook, state: &StrategyState) -> Result<Vec<MetricValue>>;

    fn reset(&mut self);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ScalarKind {
    Accuracy,
    Loss,
}

/// Top-1 accuracy or loss over a window.
#[derive(Clone, Debug)]
pub struct ScalarMetric {
    kind: ScalarKind,
    granularity: Granularity,
    accuracy: Accuracy,
    loss: LossMetric,
    active: bool,
}

impl ScalarMetric {
    pub fn accuracy(granularity: Granularity) -> Self {
        Self::new(ScalarKind::Accuracy, granularity)
    }

    pub fn loss(granularity: Granularity) -> Self {
        Self::new(ScalarKind::Loss, granularity)
    }

    fn new(kind: ScalarKind, granularity: Granularity) -> Self {
        ScalarMetric {
            kind,
            granularity,
            accuracy: Accuracy::new(),
            loss: LossMetric::new(),
            active: false,
        }
    }
}

impl PluginMetric for ScalarMetric {
    fn id(&self) -> String {
        let base = match self.kind {
            ScalarKind::Accuracy => "Top1_Acc",
            ScalarKind::Loss => "Loss",
        };
        format!("{base}_{}", self.granularity.suffix())
    }

    fn on_hook(&mut self, hook: Hook, state: &StrategyState) -> Result<Vec<MetricValue>> {
        let g = self.granularity;
        if g.resets_at(hook) {
            self.reset();
            self.active = true;
        }
        if g.updates_at(hook) {
            match self.kind {
                ScalarKind::Accuracy => self.accuracy.update(&state.predictions(), &state.mb.y)?,
                // A minibatch whose targets have no output unit has no loss;
                // it does not contribute to the mean.
                ScalarKind::Loss => {
                    if let Some(l) = state.loss_value() {
                        self.loss.update(l, state.mb.len())?;
                    }
                }
            }
        }
        if g.emits_at(hook) && self.active {
            if g != Granularity::Minibatch {
                self.active = false;
            }
            let v = match self.kind {
                ScalarKind::Accuracy => self.accuracy.result(),
                ScalarKind::Loss => self.loss.result(),
            };
            return Ok(vec![g.value_for(
                &self.id(),
                state.iteration,
                MetricData::Float(v),
                state,
            )]);
        }
        Ok(Vec::new())
    }

    fn reset(&mut self) {
        self.accuracy.reset();
        self.loss.reset();
    }
}

/// Forgetting per evaluated experience (`experience` granularity) or its
/// mean over the evaluated experiences (`stream` granularity). The first
/// evaluation of an experience after training on it records the initial
/// accuracy; values are emitted once a later evaluation exists.
#[derive(Clone, Debug)]
pub struct ForgettingMetric {
    stream_level: bool,
    forgetting: Forgetting,
    pending: BTreeSet<usize>,
    current: Accuracy,
    evaluated: Vec<usize>,
}

impl ForgettingMetric {
    pub fn experience() -> Self {
        Self::new(false)
    }

    pub fn stream() -> Self {
        Self::new(true)
    }

    fn new(stream_level: bool) -> Self {
        ForgettingMetric {
            stream_level,
            forgetting: Forgetting::new(),
            pending: BTreeSet::new(),
            current: Accuracy::new(),
            evaluated: Vec::new(),
        }
    }

    pub fn forgetting(&self) -> &Forgetting {
        &self.forgetting
    }
}

impl PluginMetric for ForgettingMetric {
    fn id(&self) -> String {
        if self.stream_level {
            "StreamForgetting".into()
        } else {
            "ExperienceForgetting".into()
        }
    }

    fn on_hook(&mut self, hook: Hook, state: &StrategyState) -> Result<Vec<MetricValue>> {
        match hook {
            Hook::AfterTrainingExp => {
                if let Some(e) = &state.experience {
                    if !self.forgetting.has_initial(e.index) {
                        self.pending.insert(e.index);
                    }
                }
            }
            Hook::BeforeEval => self.evaluated.clear(),
            Hook::BeforeEvalExp => self.current.reset(),
            Hook::AfterEvalIteration => self.current.update(&state.predictions(), &state.mb.y)?,
            Hook::AfterEvalExp => {
                let Some(exp) = &state.experience else {
                    return Ok(Vec::new());
                };
                let acc = self.current.result();
                if self.pending.remove(&exp.index) {
                    self.forgetting.update(exp.index, acc, true)?;
                } else if self.forgetting.has_initial(exp.index) {
                    self.forgetting.update(exp.index, acc, false)?;
                    self.evaluated.push(exp.index);
                    if !self.stream_level {
                        let f = self
                            .forgetting
                            .get(exp.index)
                            .expect("both values recorded");
                        return Ok(vec![Granularity::Experience.value_for(
                            &self.id(),
                            state.iteration,
                            MetricData::Float(f),
                            state,
                        )]);
                    }
                }
            }
            Hook::AfterEval if self.stream_level && !self.evaluated.is_empty() => {
                let values: Vec<f64> = self
                    .evaluated
                    .iter()
                    .filter_map(|&e| self.forgetting.get(e))
                    .collect();
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                return Ok(vec![Granularity::Stream.value_for(
                    &self.id(),
                    state.iteration,
                    MetricData::Float(mean),
                    state,
                )]);
            }
            _ => {}
        }
        Ok(Vec::new())
    }

    fn reset(&mut self) {
        self.forgetting.reset();
        self.pending.clear();
        self.current.reset();
        self.evaluated.clear();
    }
}

/// Confusion matrix over a whole evaluation stream.
#[derive(Clone, Debug, Default)]
pub struct ConfusionMatrixMetric {
    matrix: ConfusionMatrix,
    active: bool,
}

impl ConfusionMatrixMetric {
    pub fn new() -> Self {
        Self::default()
    }
}

impl PluginMetric for ConfusionMatrixMetric {
    fn id(&self) -> String {
        "ConfusionMatrix_Stream".into()
    }

    fn on_hook(&mut self, hook: Hook, state: &StrategyState) -> Result<Vec<MetricValue>> {
        match hook {
            Hook::BeforeEval => {
                self.reset();
                self.active = true;
            }
            Hook::AfterEvalIteration => self.matrix.update(&state.predictions(), &state.mb.y)?,
            Hook::AfterEval if self.active => {
                self.active = false;
                let m = MetricData::Matrix(self.matrix.result());
                return Ok(vec![Granularity::Stream.value_for(
                    &self.id(),
                    state.iteration,
                    m,
                    state,
                )]);
            }
            _ => {}
        }
        Ok(Vec::new())
    }

    fn reset(&mut self) {
        self.matrix.reset();
    }
}

/// Wall-clock seconds of a training epoch, an evaluation experience or a
/// whole evaluation stream.
#[derive(Clone, Debug)]
pub struct TimingMetric {
    granularity: Granularity,
    timing: Timing,
    started: Option<Instant>,
}

impl TimingMetric {
    pub fn new(granularity: Granularity) -> Result<Self> {
        if granularity == Granularity::Minibatch {
            return Err(Error::invalid(
                "timing is measured per epoch, experience or stream",
            ));
        }
        Ok(TimingMetric {
            granularity,
            timing: Timing::new(),
            started: None,
        })
    }
}

impl PluginMetric for TimingMetric {
    fn id(&self) -> String {
        format!("Time_{}", self.granularity.suffix())
    }

    fn on_hook(&mut self, hook: Hook, state: &StrategyState) -> Result<Vec<MetricValue>> {
        let g = self.granularity;
        if g.resets_at(hook) {
            self.reset();
            self.started = Some(Instant::now());
        }
        if g.emits_at(hook) {
            if let Some(start) = self.started.take() {
                self.timing.update_window(start, Instant::now());
                let v = MetricData::Float(self.timing.result());
                return Ok(vec![g.value_for(&self.id(), state.iteration, v, state)]);
            }
        }
        Ok(Vec::new())
    }

    fn reset(&mut self) {
        self.timing.reset();
        self.started = None;
    }
}

/// Forward-pass multiply-accumulate count, emitted per evaluation
/// experience.
#[derive(Clone, Debug, Default)]
pub struct MacMetric;

impl PluginMetric for MacMetric {
    fn id(&self) -> String {
        "MAC_Exp".into()
    }

    fn on_hook(&mut self, hook: Hook, state: &StrategyState) -> Result<Vec<MetricValue>> {
        if hook != Hook::AfterEvalExp {
            return Ok(Vec::new());
        }
        let macs = state.model.mac_count(state.current_task());
        let v = MetricData::Int(macs as i64);
        Ok(vec![Granularity::Experience.value_for(
            &self.id(),
            state.iteration,
            v,
            state,
        )])
    }

    fn reset(&mut self) {}
}

/// Every metric id [`metric_by_id`] understands.
pub const METRIC_IDS: [&str; 15] = [
    "Top1_Acc_MB",
    "Top1_Acc_Epoch",
    "Top1_Acc_Exp",
    "Top1_Acc_Stream",
    "Loss_MB",
    "Loss_Epoch",
    "Loss_Exp",
    "Loss_Stream",
    "ExperienceForgetting",
    "StreamForgetting",
    "ConfusionMatrix_Stream",
    "Time_Epoch",
    "Time_Exp",
    "Time_Stream",
    "MAC_Exp",
];

pub fn metric_by_id(id: &str) -> Result<Box<dyn PluginMetric>> {
    use Granularity::*;
    Ok(match id {
        "Top1_Acc_MB" => Box::new(ScalarMetric::accuracy(Minibatch)),
        "Top1_Acc_Epoch" => Box::new(ScalarMetric::accuracy(Epoch)),
        "Top1_Acc_Exp" => Box::new(ScalarMetric::accuracy(Experience)),
        "Top1_Acc_Stream" => Box::new(ScalarMetric::accuracy(Stream)),
        "Loss_MB" => Box::new(ScalarMetric::loss(Minibatch)),
        "Loss_Epoch" => Box::new(ScalarMetric::loss(Epoch)),
        "Loss_Exp" => Box::new(ScalarMetric::loss(Experience)),
        "Loss_Stream" => Box::new(ScalarMetric::loss(Stream)),
        "ExperienceForgetting" => Box::new(ForgettingMetric::experience()),
        "StreamForgetting" => Box::new(ForgettingMetric::stream()),
        "ConfusionMatrix_Stream" => Box::new(ConfusionMatrixMetric::new()),
        "Time_Epoch" => Box::new(TimingMetric::new(Epoch)?),
        "Time_Exp" => Box::new(TimingMetric::new(Experience)?),
        "Time_Stream" => Box::new(TimingMetric::new(Stream)?),
        "MAC_Exp" => Box::new(MacMetric),
        other => {
            return Err(Error::Configuration(format!(
                "unknown metric `{other}`; known metrics: {}",
                METRIC_IDS.join(", ")
            )))
        }
    })
}

/// Deterministic default set: accuracy and loss per epoch, experience and
/// stream, forgetting, and the stream confusion matrix.
pub fn default_metrics() -> Vec<Box<dyn PluginMetric>> {
    [
        "Top1_Acc_Epoch",
        "Loss_Epoch",
        "Top1_Acc_Exp",
        "Loss_Exp",
        "Top1_Acc_Stream",
        "Loss_Stream",
        "ExperienceForgetting",
        "StreamForgetting",
        "ConfusionMatrix_Stream",
    ]
    .into_iter()
    .map(|id| metric_by_id(id).expect("known id"))
    .collect()
}
