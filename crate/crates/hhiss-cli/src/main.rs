//! Batch front end for the hhiss pipeline.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Method, TaggedPath};
use config::{FileConfig, SynthOverrides, TrainOverrides};
use hhiss::error::Error;

#[derive(Parser)]
#[command(
    name = "hhiss",
    version,
    about = "Person-invariant stress-model training: feature extraction, training, evaluation, and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract windowed features from raw session directories.
    Extract {
        /// Directory of session directories (or a single session directory).
        #[arg(long)]
        raw_dir: PathBuf,
        /// Output feature file (a manifest sidecar is written next to it).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one method on a feature file.
    Train {
        /// Input feature file.
        #[arg(long)]
        features: PathBuf,
        /// Training method.
        #[arg(long, value_enum)]
        method: Method,
        /// Structured config file ([train] section).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Trace log path (default: checkpoint path with .trace.jsonl).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Evaluate a checkpoint on tagged feature files.
    Eval {
        /// Checkpoint to evaluate.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Datasets as tag=path (repeatable).
        #[arg(long = "data", required = true)]
        data: Vec<TaggedPath>,
        /// Tags counted into the out-of-distribution mean
        /// (default: tags starting with "ood").
        #[arg(long, value_delimiter = ',')]
        ood_tags: Option<Vec<String>>,
        /// Write per-feature saliency JSON here.
        #[arg(long)]
        saliency: Option<PathBuf>,
        /// Also write the results table to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate the synthetic domain-shift benchmark.
    Synth {
        /// Output directory for train.csv / ood.csv.
        #[arg(long)]
        out_dir: PathBuf,
        /// Structured config file ([synth] section).
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: SynthOverrides,
    },
    /// Run the multi-seed method comparison on the synthetic benchmark.
    Bench {
        /// Structured config file ([bench] section).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seeds to run (overrides the config list).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Methods to compare (overrides the config list).
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Also write the summary to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> hhiss::error::Result<()> {
    match cli.command {
        Command::Extract { raw_dir, out } => commands::cmd_extract(&raw_dir, &out),
        Command::Train {
            features,
            method,
            config,
            out,
            trace,
            overrides,
        } => {
            let mut cfg = FileConfig::load(config.as_deref())?.train;
            overrides.apply(&mut cfg)?;
            commands::cmd_train(&features, method, &cfg, &out, trace.as_deref())
        }
        Command::Eval {
            checkpoint,
            data,
            ood_tags,
            saliency,
            report,
        } => commands::cmd_eval(
            &checkpoint,
            &data,
            ood_tags.as_deref(),
            saliency.as_deref(),
            report.as_deref(),
        ),
        Command::Synth {
            out_dir,
            config,
            overrides,
        } => {
            let mut spec = FileConfig::load(config.as_deref())?.synth;
            overrides.apply(&mut spec);
            commands::cmd_synth(&spec, &out_dir)
        }
        Command::Bench {
            config,
            seeds,
            methods,
            out,
        } => {
            let mut bench = FileConfig::load(config.as_deref())?.bench;
            if let Some(seeds) = seeds {
                bench.seeds = seeds;
            }
            if let Some(methods) = methods {
                bench.methods = methods;
            }
            commands::cmd_bench(&bench, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is
            // a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}
