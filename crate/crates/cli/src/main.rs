use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clflow_cli::{ExperimentConfig, Result};

/// Continual-learning experiment runner.
#[derive(Parser)]
#[command(name = "clflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides the config's root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print registered strategies, benchmarks or metrics.
    List {
        #[arg(value_parser = clflow_cli::LIST_TOPICS)]
        what: String,
    },
    /// Print the streams of a config's benchmark without training.
    Inspect {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = load(&config, seed)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let outcome = clflow_cli::run(cfg)?;
            println!("results written to {}", outcome.dir.display());
        }
        Command::List { what } => {
            for line in clflow_cli::list(&what)? {
                println!("{line}");
            }
        }
        Command::Inspect { config, seed } => {
            let cfg = load(&config, seed)?;
            clflow_cli::inspect(&cfg, &mut std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}
