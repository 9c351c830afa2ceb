//! Experiment configuration files.
//!
//! A config is a single TOML document. Unknown keys anywhere are rejected,
//! and every default is written out when the config is echoed, so the echo
//! alone reproduces a run.

use std::path::{Path, PathBuf};

use clflow::evaluation::METRIC_IDS;
use clflow::models::HeadKind;
use clflow::training::plugins::EwcMode;
use clflow::training::BufferPolicy;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every derived seed.
    #[serde(default)]
    pub seed: u64,
    /// Directory receiving one results bundle per run.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Plugin-metric ids, see `clflow list metrics`.
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    /// Loggers besides the metrics JSONL file, which is always written.
    #[serde(default = "default_loggers")]
    pub loggers: Vec<LoggerKind>,
    pub benchmark: BenchmarkConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub strategy: StrategyConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoggerKind {
    /// Text lines and a progress bar on standard output.
    Interactive,
    /// Text lines in `log.txt` inside the results bundle.
    Text,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub source: SourceConfig,
    pub scenario: ScenarioConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Gaussian class clusters.
    Synthetic {
        n_classes: usize,
        #[serde(default = "default_train_per_class")]
        train_per_class: usize,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
        #[serde(default = "default_input_dim")]
        input_dim: usize,
        #[serde(default = "default_separation")]
        class_separation: f64,
    },
    /// MNIST-style IDX image and label files. Relative paths are resolved
    /// against the config file's directory.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    /// New Classes.
    Nc {
        n_experiences: usize,
        #[serde(default)]
        task_labels: bool,
        #[serde(default)]
        class_ids_from_zero_per_experience: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fixed_class_order: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        per_experience_classes: Option<Vec<usize>>,
    },
    /// New Instances.
    Ni {
        n_experiences: usize,
        #[serde(default)]
        balance_classes: bool,
    },
    Permuted {
        n_experiences: usize,
        #[serde(default)]
        task_labels: bool,
    },
    /// Square images only; one angle in degrees per experience.
    Rotated {
        n_experiences: usize,
        angles: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_hidden")]
    pub hidden_sizes: Vec<usize>,
    #[serde(default = "default_head")]
    pub head: HeadKind,
    /// Output units initialized at build time. Defaults to the largest
    /// class id of the first training experience plus one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_classes: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_sizes: default_hidden(),
            head: default_head(),
            initial_classes: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Naive,
    Cumulative,
    JointTraining,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    #[serde(default = "default_loop")]
    pub name: LoopKind,
    #[serde(default = "default_epochs")]
    pub train_epochs: usize,
    #[serde(default = "default_train_mb")]
    pub train_mb_size: usize,
    #[serde(default = "default_eval_mb")]
    pub eval_mb_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Fired in list order at every hook.
    #[serde(default)]
    pub plugins: Vec<PluginConfig>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            name: default_loop(),
            train_epochs: default_epochs(),
            train_mb_size: default_train_mb(),
            eval_mb_size: default_eval_mb(),
            learning_rate: default_lr(),
            momentum: 0.0,
            weight_decay: 0.0,
            plugins: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PluginConfig {
    Replay {
        capacity: usize,
        #[serde(default)]
        policy: BufferPolicy,
    },
    Gdumb {
        capacity: usize,
    },
    Ewc {
        lambda: f64,
        #[serde(default = "default_ewc_mode")]
        mode: EwcMode,
        #[serde(default = "default_fisher_batches")]
        fisher_batches: usize,
    },
    Si {
        c: f64,
        #[serde(default = "default_xi")]
        xi: f64,
    },
    Lwf {
        alpha: f64,
        #[serde(default = "default_temperature")]
        temperature: f64,
    },
    Agem {
        patterns_per_experience: usize,
        sample_size: usize,
    },
    CwrStar,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

pub fn default_metrics() -> Vec<String> {
    clflow::evaluation::default_metrics()
        .iter()
        .map(|m| m.id())
        .collect()
}

fn default_loggers() -> Vec<LoggerKind> {
    vec![LoggerKind::Interactive]
}

fn default_train_per_class() -> usize {
    100
}

fn default_test_per_class() -> usize {
    50
}

fn default_input_dim() -> usize {
    20
}

fn default_separation() -> f64 {
    6.0
}

fn default_hidden() -> Vec<usize> {
    vec![32]
}

fn default_head() -> HeadKind {
    HeadKind::Incremental
}

fn default_loop() -> LoopKind {
    LoopKind::Naive
}

fn default_epochs() -> usize {
    1
}

fn default_train_mb() -> usize {
    32
}

fn default_eval_mb() -> usize {
    128
}

fn default_lr() -> f64 {
    0.01
}

fn default_ewc_mode() -> EwcMode {
    EwcMode::Separate
}

fn default_fisher_batches() -> usize {
    16
}

fn default_xi() -> f64 {
    0.1
}

fn default_temperature() -> f64 {
    2.0
}

impl ExperimentConfig {
    /// Parses and validates a config document. Relative IDX paths are
    /// resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let SourceConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } = &mut cfg.benchmark.source
        {
            for p in [train_images, train_labels, test_images, test_labels] {
                if p.is_relative() {
                    *p = base_dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses the config at `path`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Checks the values serde cannot: metric ids and loop settings.
    pub fn validate(&self) -> Result<()> {
        for id in &self.metrics {
            if !METRIC_IDS.contains(&id.as_str()) {
                return Err(CliError::Config(format!(
                    "metrics: unknown metric id `{id}` (known: {})",
                    METRIC_IDS.join(", ")
                )));
            }
        }
        let s = &self.strategy;
        if s.train_epochs == 0 || s.train_mb_size == 0 || s.eval_mb_size == 0 {
            return Err(CliError::Config(
                "strategy: train_epochs, train_mb_size and eval_mb_size must be positive".into(),
            ));
        }
        Ok(())
    }

    /// The config as TOML with every default written out.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }
}
