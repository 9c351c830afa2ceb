#![allow(dead_code)]

pub mod gradcheck;

use std::sync::{Arc, Mutex};

use clflow::autograd::SgdOptimizer;
use clflow::benchmarks::{nc_benchmark, BenchmarkInstance, NcOptions};
use clflow::data::{make_synthetic_split, DatasetRef, SyntheticSpec};
use clflow::evaluation::{default_metrics, EvaluationPlugin};
use clflow::logging::{LogRecord, Logger, LoopEvent};
use clflow::models::{build_mlp, HeadKind, MlpModel};
use clflow::training::{Plugin, Strategy, TrainConfig};

/// Small class-incremental benchmark: `n_classes` synthetic classes split
/// into `n_exp` experiences.
pub fn small_nc(n_classes: usize, n_exp: usize, seed: u64) -> BenchmarkInstance {
    let spec = SyntheticSpec {
        n_classes,
        train_per_class: 20,
        test_per_class: 10,
        input_dim: 8,
        class_separation: 4.0,
        seed,
    };
    let (train, test) = make_synthetic_split(&spec).unwrap();
    let (train, test): (DatasetRef, DatasetRef) = (train, test);
    nc_benchmark(
        &train,
        &test,
        &NcOptions {
            n_experiences: n_exp,
            seed,
            ..NcOptions::default()
        },
    )
    .unwrap()
}

pub fn small_model(seed: u64) -> MlpModel {
    build_mlp(8, &[16], 2, HeadKind::Incremental, seed).unwrap()
}

pub fn config(seed: u64) -> TrainConfig {
    TrainConfig {
        train_epochs: 2,
        train_mb_size: 16,
        eval_mb_size: 32,
        seed,
    }
}

pub fn strategy(seed: u64, plugins: Vec<Box<dyn Plugin>>) -> Strategy {
    Strategy::new(
        small_model(seed),
        SgdOptimizer::new(0.1, 0.9, 0.0).unwrap(),
        config(seed),
        plugins,
        EvaluationPlugin::new(default_metrics(), Vec::new()),
    )
    .unwrap()
}

/// Parameter values and per-iteration losses after training on every
/// experience of `bench`.
pub fn trajectory(s: &mut Strategy, bench: &BenchmarkInstance) -> (Vec<Vec<f64>>, Vec<(u64, f64)>) {
    s.evaluator_mut().add_logger(Box::new(LossSpy));
    let mut snaps = Vec::new();
    for exp in bench.train_stream.iter() {
        s.train(std::slice::from_ref(exp)).unwrap();
        snaps.push(flat_params(s.model()));
    }
    let losses = s
        .evaluator()
        .all_results()
        .iter()
        .filter(|(k, _)| k.starts_with("Loss_Epoch"))
        .flat_map(|(_, v)| v.iter().map(|(x, d)| (*x, d.as_f64().unwrap())))
        .collect();
    (snaps, losses)
}

pub fn flat_params(model: &MlpModel) -> Vec<f64> {
    model
        .params()
        .iter()
        .flat_map(|p| p.value().data().to_vec())
        .collect()
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Logger that discards everything.
#[derive(Default)]
pub struct LossSpy;

impl Logger for LossSpy {
    fn log_metric(&mut self, _record: &LogRecord) -> clflow::Result<()> {
        Ok(())
    }
}

/// Logger that records every call into a shared log.
#[derive(Clone, Default)]
pub struct RecordingLogger {
    pub tag: &'static str,
    pub records: Arc<Mutex<Vec<(&'static str, LogRecord)>>>,
    pub events: Arc<Mutex<Vec<LoopEvent>>>,
}

impl Logger for RecordingLogger {
    fn log_metric(&mut self, record: &LogRecord) -> clflow::Result<()> {
        self.records
            .lock()
            .unwrap()
            .push((self.tag, record.clone()));
        Ok(())
    }

    fn on_event(&mut self, event: &LoopEvent) -> clflow::Result<()> {
        self.events.lock().unwrap().push(event.clone());
        Ok(())
    }
}
