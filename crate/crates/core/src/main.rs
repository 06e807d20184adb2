use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarmformer::experiment::{run, Command, ExperimentConfig, RunOptions};

/// Swarm-tuned transformer classifier and tree baselines for tabular
/// heart-disease data.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything serially.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Correlation matrix and heatmap of the data.
    Correlate,
    /// Decision tree, random forest and boosted trees on the test split.
    Baselines,
    /// Swarm hyperparameter search for the transformer.
    Search {
        /// Continue from an interrupted search log in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a saved or configured transformer and rebuild the comparison.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    let (command, options) = match cli.command {
        Cmd::Correlate => (Command::Correlate, RunOptions::default()),
        Cmd::Baselines => (Command::Baselines, RunOptions::default()),
        Cmd::Search { resume } => (Command::Search, RunOptions { resume }),
        Cmd::Report => (Command::Report, RunOptions::default()),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n.max(1));
    }
    let outcome = match pool.build() {
        Ok(pool) => pool.install(|| run(command, &cfg, options)),
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::FAILURE;
        }
    };
    match outcome {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            println!();
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
