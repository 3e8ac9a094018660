mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "leafnet", version, about = "Leaf disease recognition pipeline")]
struct Cli {
    /// JSON pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic labelled leaf corpus with ground-truth boxes.
    MakeCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        per_class: Option<usize>,
    },
    /// Locate, crop and resize every image to the network input size.
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Grow a segmented dataset with rotations, flips and noise.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Per-class target totals as JSON (`{"class": count}`).
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Stratified train/test split of a dataset directory.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Train the CNN on a split.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train a grid of configurations and summarize the verdicts.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = Preset::Desk)]
        preset: Preset,
        /// Iterations per desk-preset run.
        #[arg(long)]
        iterations: Option<usize>,
        /// Print the grid and exit without training.
        #[arg(long)]
        list: bool,
        /// Run configurations concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Fit and compare classifiers on the same split.
    Baseline {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated classifier names.
        #[arg(long, value_delimiter = ',', default_values_t = ["cnn".to_string(), "svm".to_string(), "bp".to_string()])]
        methods: Vec<String>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score a saved model on a manifest.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Classifier name the model was saved by.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        manifest: PathBuf,
        /// Write the report JSON and confusion CSV with this path stem.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize runs, sweeps and baselines found in a work directory.
    Report {
        #[arg(long)]
        work: PathBuf,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Directory holding `train.json` and `test.json` from `split`.
    #[arg(long)]
    split: PathBuf,
    /// Output directory.
    #[arg(long)]
    work: PathBuf,
}

#[derive(Args, Debug, Default)]
struct TrainArgs {
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    eval_interval: Option<usize>,
    #[arg(long, conflicts_with = "no_dropout")]
    dropout: bool,
    #[arg(long)]
    no_dropout: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Preset {
    Desk,
    PaperTable6,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .format_target(false)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let divergence = e
        .chain()
        .any(|c| matches!(c.downcast_ref::<leafnet_core::Error>(), Some(leafnet_core::Error::Divergence { .. })));
    if divergence {
        3
    } else {
        2
    }
}
