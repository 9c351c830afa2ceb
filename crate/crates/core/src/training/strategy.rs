use std::sync::Arc;

use indexmap::IndexMap;

use super::plugin::dispatch;
use super::plugins::CumulativePlugin;
use super::{Hook, Phase, Plugin, StrategyState, TrainConfig};
use crate::autograd::{Gradients, SgdOptimizer, Tape};
use crate::benchmarks::{Experience, TRAIN_STREAM};
use crate::data::{collate, concat, Batch, BatchIterator, DatasetRef};
use crate::error::{Error, Result};
use crate::evaluation::{EvaluationPlugin, MetricData};
use crate::models::MlpModel;
use crate::seed::derive_seed;

/// Metric name to last emitted value, in emission order.
pub type MetricsDict = IndexMap<String, MetricData>;

/// Training/evaluation loops plus an ordered plugin list and an evaluator.
#[derive(Debug)]
pub struct Strategy {
    pub state: StrategyState,
    plugins: Vec<Box<dyn Plugin>>,
    evaluator: EvaluationPlugin,
    joint: bool,
    joint_done: bool,
}

impl Strategy {
    /// Naive fine-tuning loop with the given plugins (fired in list order).
    pub fn new(
        model: MlpModel,
        optimizer: SgdOptimizer,
        config: TrainConfig,
        plugins: Vec<Box<dyn Plugin>>,
        evaluator: EvaluationPlugin,
    ) -> Result<Self> {
        if config.train_epochs == 0 || config.train_mb_size == 0 || config.eval_mb_size == 0 {
            return Err(Error::invalid(
                "epochs and minibatch sizes must be positive",
            ));
        }
        Ok(Strategy {
            state: StrategyState::new(model, optimizer, config),
            plugins,
            evaluator,
            joint: false,
            joint_done: false,
        })
    }

    pub fn naive(
        model: MlpModel,
        optimizer: SgdOptimizer,
        config: TrainConfig,
        evaluator: EvaluationPlugin,
    ) -> Result<Self> {
        Self::new(model, optimizer, config, Vec::new(), evaluator)
    }

    /// Trains each experience on the union of all experiences seen so far.
    pub fn cumulative(
        model: MlpModel,
        optimizer: SgdOptimizer,
        config: TrainConfig,
        mut plugins: Vec<Box<dyn Plugin>>,
        evaluator: EvaluationPlugin,
    ) -> Result<Self> {
        plugins.insert(0, Box::new(CumulativePlugin::default()));
        Self::new(model, optimizer, config, plugins, evaluator)
    }

    /// Offline upper bound: `train` receives the whole stream once and fits
    /// the concatenation of its experiences.
    pub fn joint_training(
        model: MlpModel,
        optimizer: SgdOptimizer,
        config: TrainConfig,
        plugins: Vec<Box<dyn Plugin>>,
        evaluator: EvaluationPlugin,
    ) -> Result<Self> {
        let mut s = Self::new(model, optimizer, config, plugins, evaluator)?;
        s.joint = true;
        Ok(s)
    }

    pub fn evaluator(&self) -> &EvaluationPlugin {
        &self.evaluator
    }

    pub fn evaluator_mut(&mut self) -> &mut EvaluationPlugin {
        &mut self.evaluator
    }

    pub fn plugins(&self) -> &[Box<dyn Plugin>] {
        &self.plugins
    }

    pub fn model(&self) -> &MlpModel {
        &self.state.model
    }

    fn fire(&mut self, hook: Hook) -> Result<()> {
        for p in self.plugins.iter_mut() {
            dispatch(p.as_mut(), hook, &mut self.state)?;
        }
        self.evaluator.on_hook(hook, &self.state)
    }

    /// Trains on each experience in order and returns the metrics emitted
    /// during this call.
    pub fn train(&mut self, experiences: &[Experience]) -> Result<MetricsDict> {
        if experiences.is_empty() {
            return Err(Error::invalid("no experiences to train on"));
        }
        if self.joint {
            if self.joint_done {
                return Err(Error::State(
                    "joint training fits the whole stream once; incremental calls are not supported".into(),
                ));
            }
            let merged = merge_experiences(experiences)?;
            self.joint_done = true;
            return self.train_experiences(std::slice::from_ref(&merged));
        }
        self.train_experiences(experiences)
    }

    fn train_experiences(&mut self, experiences: &[Experience]) -> Result<MetricsDict> {
        self.evaluator.begin_window();
        self.state.phase = Phase::Training;
        self.fire(Hook::BeforeTraining)?;
        for exp in experiences {
            self.train_experience(exp)?;
        }
        self.state.phase = Phase::Training;
        self.fire(Hook::AfterTraining)?;
        Ok(self.evaluator.window_results())
    }

    fn train_experience(&mut self, exp: &Experience) -> Result<()> {
        if exp.is_empty() {
            return Err(Error::invalid(format!(
                "train experience {} is empty",
                exp.index
            )));
        }
        let state = &mut self.state;
        state.phase = Phase::Training;
        state.model.adapt_to_experience(exp)?;
        state.experience = Some(exp.clone());
        state.train_data = Some(exp.dataset.clone());
        state.epoch = 0;
        self.fire(Hook::BeforeTrainingExp)?;

        let data = self
            .state
            .train_data
            .clone()
            .expect("set before before_training_exp");
        let exp_counter = self.state.trained_experiences;
        self.state.trained_experiences += 1;

        for epoch in 0..self.state.config.train_epochs {
            self.state.epoch = epoch;
            let seed = derive_seed(
                self.state.config.seed,
                &format!("shuffle/{exp_counter}/{epoch}"),
            );
            let batches =
                BatchIterator::new(data.len(), self.state.config.train_mb_size, Some(seed))?;
            self.state.window_total = batches.num_batches();
            self.state.window_iteration = 0;
            self.fire(Hook::BeforeTrainingEpoch)?;
            for idx in batches {
                self.state.mb = collate(data.as_ref(), &idx)?;
                self.training_iteration()?;
            }
            self.fire(Hook::AfterTrainingEpoch)?;
        }
        self.fire(Hook::AfterTrainingExp)
    }

    fn training_iteration(&mut self) -> Result<()> {
        self.fire(Hook::BeforeTrainingIteration)?;

        let state = &mut self.state;
        state.model.zero_grad();
        state.tape = Tape::new();
        let out = state
            .model
            .forward(&mut state.tape, &state.mb.x, &state.mb.t)?;
        state.mb_output = Some(out);
        state.loss = None;
        self.fire(Hook::AfterForward)?;

        let state = &mut self.state;
        state.loss = Some(state.tape.cross_entropy(out, &state.mb.y)?);
        self.fire(Hook::BeforeBackward)?;

        let state = &mut self.state;
        let loss = state.loss.expect("loss set above");
        let grads = state.tape.backward(loss)?;
        grads.accumulate_into(state.model.params_mut())?;
        self.fire(Hook::AfterBackward)?;

        let state = &mut self.state;
        state.optimizer.step(state.model.params_mut());
        self.fire(Hook::AfterUpdate)?;

        self.state.iteration += 1;
        self.state.window_iteration += 1;
        self.fire(Hook::AfterTrainingIteration)
    }

    /// Evaluates every experience without touching parameters, buffers or
    /// plugin accumulators; returns the metrics emitted during this call.
    pub fn eval(&mut self, experiences: &[Experience]) -> Result<MetricsDict> {
        self.evaluator.begin_window();
        self.state.phase = Phase::Eval;
        self.fire(Hook::BeforeEval)?;
        for exp in experiences {
            self.state.phase = Phase::Eval;
            self.state.experience = Some(exp.clone());
            let batches = BatchIterator::new(exp.len(), self.state.config.eval_mb_size, None)?;
            self.state.window_total = batches.num_batches();
            self.state.window_iteration = 0;
            self.fire(Hook::BeforeEvalExp)?;
            for idx in batches {
                let state = &mut self.state;
                state.mb = collate(exp.dataset.as_ref(), &idx)?;
                state.tape = Tape::new();
                let out = state
                    .model
                    .forward(&mut state.tape, &state.mb.x, &state.mb.t)?;
                state.mb_output = Some(out);
                let width = state.tape.value(out).cols();
                // Classes the model has no unit for yet carry no defined loss.
                state.loss = if state.mb.y.iter().all(|&y| y < width) {
                    Some(state.tape.cross_entropy(out, &state.mb.y)?)
                } else {
                    None
                };
                self.fire(Hook::AfterEvalForward)?;
                self.state.window_iteration += 1;
                self.fire(Hook::AfterEvalIteration)?;
            }
            self.fire(Hook::AfterEvalExp)?;
        }
        self.fire(Hook::AfterEval)?;
        Ok(self.evaluator.window_results())
    }
}

/// One training experience holding the concatenation of `experiences`.
pub fn merge_experiences(experiences: &[Experience]) -> Result<Experience> {
    let datasets: Vec<DatasetRef> = experiences.iter().map(|e| e.dataset.clone()).collect();
    let merged: DatasetRef = Arc::new(concat(&datasets));
    let mut exp = Experience::new(merged, 0, TRAIN_STREAM)?;
    exp.classes_seen_so_far = exp.classes_in_this_experience.clone();
    Ok(exp)
}

/// Loss gradients of `model` on `batch`, computed on a private tape.
pub fn batch_gradients(model: &MlpModel, batch: &Batch) -> Result<Gradients> {
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, &batch.x, &batch.t)?;
    let loss = tape.cross_entropy(out, &batch.y)?;
    tape.backward(loss)
}

/// Names of the built-in strategies.
pub const STRATEGY_NAMES: [&str; 10] = [
    "naive",
    "cumulative",
    "joint_training",
    "replay",
    "gdumb",
    "ewc",
    "si",
    "lwf",
    "agem",
    "cwr_star",
];
