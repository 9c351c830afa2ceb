//! Building and running experiments from a config.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clflow::autograd::SgdOptimizer;
use clflow::benchmarks::{
    nc_benchmark, ni_benchmark, permutation_benchmark, rotation_benchmark, BenchmarkInstance,
    NcOptions,
};
use clflow::data::{idx_dataset, make_synthetic_split, DatasetRef, SyntheticSpec};
use clflow::evaluation::{metric_by_id, EvaluationPlugin};
use clflow::logging::{InteractiveLogger, JsonlLogger, Logger, TextLogger};
use clflow::models::{build_mlp, MlpModel};
use clflow::seed::{derive_seed, stable_hash};
use clflow::training::plugins::{
    AgemPlugin, CwrStarPlugin, EwcPlugin, GDumbPlugin, LwfPlugin, ReplayPlugin, SiPlugin,
};
use clflow::training::{MetricsDict, Plugin, Strategy, TrainConfig};
use time::macros::format_description;
use time::OffsetDateTime;

use crate::config::{
    ExperimentConfig, LoggerKind, LoopKind, PluginConfig, ScenarioConfig, SourceConfig,
};
use crate::error::{CliError, Context, Result};

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const FINAL_METRICS_FILE: &str = "final_metrics.json";
pub const BENCHMARK_FILE: &str = "benchmark.json";
pub const MODEL_FILE: &str = "model.json";
pub const TEXT_LOG_FILE: &str = "log.txt";

/// Where a finished run left its artifacts.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub run_id: String,
    pub final_metrics: MetricsDict,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).context(format!("reading {}", path.display()))
}

fn source_datasets(source: &SourceConfig, seed: u64) -> Result<(DatasetRef, DatasetRef)> {
    match source {
        SourceConfig::Synthetic {
            n_classes,
            train_per_class,
            test_per_class,
            input_dim,
            class_separation,
        } => {
            let spec = SyntheticSpec {
                n_classes: *n_classes,
                train_per_class: *train_per_class,
                test_per_class: *test_per_class,
                input_dim: *input_dim,
                class_separation: *class_separation,
                seed: derive_seed(seed, "benchmark/data"),
            };
            let (train, test) = make_synthetic_split(&spec).context("generating synthetic data")?;
            Ok((train, test))
        }
        SourceConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train = idx_dataset(&read(train_images)?, &read(train_labels)?)
                .context("decoding training IDX files")?;
            let test = idx_dataset(&read(test_images)?, &read(test_labels)?)
                .context("decoding test IDX files")?;
            Ok((train, test))
        }
    }
}

/// Builds the benchmark instance described by `cfg`; nothing else.
pub fn build_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkInstance> {
    let (train, test) = source_datasets(&cfg.benchmark.source, cfg.seed)?;
    let seed = derive_seed(cfg.seed, "benchmark/scenario");
    let bench = match &cfg.benchmark.scenario {
        ScenarioConfig::Nc {
            n_experiences,
            task_labels,
            class_ids_from_zero_per_experience,
            fixed_class_order,
            per_experience_classes,
        } => nc_benchmark(
            &train,
            &test,
            &NcOptions {
                n_experiences: *n_experiences,
                seed,
                fixed_class_order: fixed_class_order.clone(),
                per_experience_classes: per_experience_classes.clone(),
                task_labels: *task_labels,
                class_ids_from_zero_per_experience: *class_ids_from_zero_per_experience,
            },
        ),
        ScenarioConfig::Ni {
            n_experiences,
            balance_classes,
        } => ni_benchmark(&train, &test, *n_experiences, seed, *balance_classes),
        ScenarioConfig::Permuted {
            n_experiences,
            task_labels,
        } => permutation_benchmark(&train, &test, *n_experiences, seed, *task_labels),
        ScenarioConfig::Rotated {
            n_experiences,
            angles,
        } => rotation_benchmark(&train, &test, *n_experiences, angles),
    };
    bench.context("building benchmark")
}

/// Fills in defaults that depend on the benchmark.
pub fn resolve(cfg: &mut ExperimentConfig, bench: &BenchmarkInstance) {
    if cfg.model.initial_classes.is_none() {
        let first = bench.train_stream.get(0);
        let max = first.and_then(|e| e.classes_in_this_experience.last().copied());
        cfg.model.initial_classes = Some(max.map_or(1, |m| m + 1));
    }
}

fn input_dim(bench: &BenchmarkInstance) -> Result<usize> {
    let exp = bench
        .train_stream
        .get(0)
        .ok_or_else(|| CliError::Config("benchmark has no training experience".into()))?;
    let sample = exp
        .dataset
        .get(0)
        .context("reading the first training sample")?;
    Ok(sample.x.len())
}

pub fn build_model(cfg: &ExperimentConfig, bench: &BenchmarkInstance) -> Result<MlpModel> {
    build_mlp(
        input_dim(bench)?,
        &cfg.model.hidden_sizes,
        cfg.model.initial_classes.unwrap_or(1),
        cfg.model.head,
        derive_seed(cfg.seed, "model/init"),
    )
    .context("building model")
}

pub fn build_plugin(p: &PluginConfig) -> clflow::Result<Box<dyn Plugin>> {
    Ok(match *p {
        PluginConfig::Replay { capacity, policy } => Box::new(ReplayPlugin::new(capacity, policy)?),
        PluginConfig::Gdumb { capacity } => Box::new(GDumbPlugin::new(capacity)?),
        PluginConfig::Ewc {
            lambda,
            mode,
            fisher_batches,
        } => Box::new(EwcPlugin::new(lambda, mode, fisher_batches)?),
        PluginConfig::Si { c, xi } => Box::new(SiPlugin::new(c, xi)?),
        PluginConfig::Lwf { alpha, temperature } => Box::new(LwfPlugin::new(alpha, temperature)?),
        PluginConfig::Agem {
            patterns_per_experience,
            sample_size,
        } => Box::new(AgemPlugin::new(patterns_per_experience, sample_size)?),
        PluginConfig::CwrStar => Box::new(CwrStarPlugin::new()),
    })
}

/// Strategy with the configured loop, plugins, metrics and `loggers`.
pub fn build_strategy(
    cfg: &ExperimentConfig,
    model: MlpModel,
    loggers: Vec<Box<dyn Logger>>,
    run_id: &str,
) -> Result<Strategy> {
    let s = &cfg.strategy;
    let optimizer = SgdOptimizer::new(s.learning_rate, s.momentum, s.weight_decay)
        .context("strategy optimizer")?;
    let train_config = TrainConfig {
        train_epochs: s.train_epochs,
        train_mb_size: s.train_mb_size,
        eval_mb_size: s.eval_mb_size,
        seed: cfg.seed,
    };
    let plugins = s
        .plugins
        .iter()
        .map(build_plugin)
        .collect::<clflow::Result<Vec<_>>>()
        .context("strategy plugins")?;
    let metrics = cfg
        .metrics
        .iter()
        .map(|id| metric_by_id(id))
        .collect::<clflow::Result<Vec<_>>>()
        .context("metrics")?;
    let evaluator = EvaluationPlugin::new(metrics, loggers).with_run_id(run_id);
    let ctor = match s.name {
        LoopKind::Naive => Strategy::new,
        LoopKind::Cumulative => Strategy::cumulative,
        LoopKind::JointTraining => Strategy::joint_training,
    };
    ctor(model, optimizer, train_config, plugins, evaluator).context("building strategy")
}

/// Trains on each experience in turn, evaluating on the whole test stream
/// after each. Joint training sees the whole stream at once.
pub fn run_loop(
    strategy: &mut Strategy,
    cfg: &ExperimentConfig,
    bench: &BenchmarkInstance,
) -> Result<()> {
    let test = bench.test_stream.experiences();
    if cfg.strategy.name == LoopKind::JointTraining {
        strategy
            .train(bench.train_stream.experiences())
            .context("training")?;
        strategy.eval(test).context("evaluating")?;
        return Ok(());
    }
    for exp in bench.train_stream.iter() {
        strategy
            .train(std::slice::from_ref(exp))
            .context(format!("training on experience {}", exp.index))?;
        strategy
            .eval(test)
            .context(format!("evaluating after experience {}", exp.index))?;
    }
    Ok(())
}

fn create_run_dir(out: &Path, hash: &str) -> Result<PathBuf> {
    fs::create_dir_all(out).context(format!("creating {}", out.display()))?;
    let stamp = OffsetDateTime::now_utc()
        .format(format_description!(
            "[year][month][day]T[hour][minute][second]"
        ))
        .unwrap_or_default();
    for attempt in 0u32.. {
        let name = match attempt {
            0 => format!("{stamp}-{hash}"),
            n => format!("{stamp}-{hash}-{n}"),
        };
        let dir = out.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => {
                return Err(CliError::Io {
                    context: format!("creating {}", dir.display()),
                    source: e,
                })
            }
        }
    }
    unreachable!("run directory attempts exhausted")
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).context(format!("writing {}", path.display()))
}

/// Runs the experiment and writes its results bundle under
/// `cfg.output_dir`.
pub fn run(mut cfg: ExperimentConfig) -> Result<RunOutcome> {
    let bench = build_benchmark(&cfg)?;
    resolve(&mut cfg, &bench);
    let echo = cfg.to_toml()?;
    // The output location does not change results, so it stays out of the id.
    let identity = ExperimentConfig {
        output_dir: PathBuf::new(),
        ..cfg.clone()
    }
    .to_toml()?;
    let hash = format!("{:016x}", stable_hash(identity.as_bytes()));
    let run_id = hash[..12].to_string();
    let dir = create_run_dir(&cfg.output_dir, &run_id)?;
    fs::write(dir.join(CONFIG_FILE), &echo).context("writing config echo")?;
    write_json(&dir.join(BENCHMARK_FILE), &bench.summary())?;

    let mut loggers: Vec<Box<dyn Logger>> = vec![Box::new(
        JsonlLogger::create(&dir.join(METRICS_FILE)).context("opening metrics log")?,
    )];
    for kind in &cfg.loggers {
        match kind {
            LoggerKind::Interactive => loggers.push(Box::new(InteractiveLogger::stdout())),
            LoggerKind::Text => loggers.push(Box::new(
                TextLogger::create(&dir.join(TEXT_LOG_FILE)).context("opening text log")?,
            )),
        }
    }
    let model = build_model(&cfg, &bench)?;
    let mut strategy = build_strategy(&cfg, model, loggers, &run_id)?;
    run_loop(&mut strategy, &cfg, &bench)?;
    strategy
        .evaluator_mut()
        .flush()
        .context("flushing loggers")?;

    let final_metrics = strategy.evaluator().last_results();
    write_json(&dir.join(FINAL_METRICS_FILE), &final_metrics)?;
    write_json(&dir.join(MODEL_FILE), &strategy.model().snapshot())?;
    Ok(RunOutcome {
        dir,
        run_id,
        final_metrics,
    })
}

/// Per-experience table of the benchmark described by `cfg`. Only the
/// benchmark section is used.
pub fn inspect(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<()> {
    let bench = build_benchmark(cfg)?;
    let summary = bench.summary();
    let io = |r: std::io::Result<()>| r.context("writing inspect output");
    io(writeln!(
        out,
        "generator: {}  experiences: {}",
        summary.recipe.generator, summary.recipe.n_experiences
    ))?;
    io(writeln!(
        out,
        "{:<6} {:>4} {:>7}  {:<24} tasks",
        "stream", "exp", "size", "classes"
    ))?;
    for row in summary.train.iter().chain(&summary.test) {
        let classes = format!("{:?}", row.classes);
        io(writeln!(
            out,
            "{:<6} {:>4} {:>7}  {:<24} {:?}",
            row.stream, row.index, row.size, classes, row.task_labels
        ))?;
    }
    Ok(())
}

/// Names that `list` can print.
pub const LIST_TOPICS: [&str; 3] = ["strategies", "benchmarks", "metrics"];

/// Registered names with their parameters, one per line.
pub fn list(topic: &str) -> Result<Vec<String>> {
    let lines: &[&str] = match topic {
        "strategies" => &[
            "naive           strategy.name = \"naive\"",
            "cumulative      strategy.name = \"cumulative\"",
            "joint_training  strategy.name = \"joint_training\"",
            "replay          plugin: capacity, policy = class_balanced | reservoir",
            "gdumb           plugin: capacity",
            "ewc             plugin: lambda, mode = {type = separate | online, decay}, fisher_batches",
            "si              plugin: c, xi",
            "lwf             plugin: alpha, temperature",
            "agem            plugin: patterns_per_experience, sample_size",
            "cwr_star        plugin: (none)",
        ],
        "benchmarks" => &[
            "source synthetic  n_classes, train_per_class, test_per_class, input_dim, class_separation",
            "source idx        train_images, train_labels, test_images, test_labels",
            "scenario nc       n_experiences, task_labels, class_ids_from_zero_per_experience, fixed_class_order, per_experience_classes",
            "scenario ni       n_experiences, balance_classes",
            "scenario permuted n_experiences, task_labels",
            "scenario rotated  n_experiences, angles",
        ],
        "metrics" => &clflow::evaluation::METRIC_IDS,
        other => {
            return Err(CliError::Config(format!(
                "unknown list topic `{other}` (expected one of {})",
                LIST_TOPICS.join(", ")
            )))
        }
    };
    Ok(lines.iter().map(|s| s.to_string()).collect())
}
