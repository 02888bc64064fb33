use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use erg_cli::{Pipeline, PipelineConfig, Stage};

/// Event relation graphs for conspiracy article classification.
#[derive(Parser)]
#[command(name = "erg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Dotted-key overrides, e.g. --set erg.epochs=10.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and normalize the corpora into the cache.
    Ingest(StageArgs),
    /// Assign documents to train/dev/test.
    Split(StageArgs),
    /// Train the joint event relation extractors.
    TrainErg(StageArgs),
    /// Extract an event relation graph per document.
    BuildGraphs(StageArgs),
    /// Aggregate structural statistics over stored graphs.
    Profile(StageArgs),
    /// Distill graph soft labels into an event-aware encoder.
    Distill(StageArgs),
    /// Train the article classifier.
    TrainClassifier(StageArgs),
    /// Score predictions against gold labels.
    Evaluate(StageArgs),
    /// Predict labels for one split.
    Predict(StageArgs),
    /// Generate synthetic fixture corpora.
    Synth(StageArgs),
    /// Emit the ablation and variant config suite.
    Ablations(StageArgs),
}

impl Command {
    fn split(self) -> (Stage, StageArgs) {
        match self {
            Command::Ingest(args) => (Stage::Ingest, args),
            Command::Split(args) => (Stage::Split, args),
            Command::TrainErg(args) => (Stage::TrainErg, args),
            Command::BuildGraphs(args) => (Stage::BuildGraphs, args),
            Command::Profile(args) => (Stage::Profile, args),
            Command::Distill(args) => (Stage::Distill, args),
            Command::TrainClassifier(args) => (Stage::TrainClassifier, args),
            Command::Evaluate(args) => (Stage::Evaluate, args),
            Command::Predict(args) => (Stage::Predict, args),
            Command::Synth(args) => (Stage::Synth, args),
            Command::Ablations(args) => (Stage::Ablations, args),
        }
    }
}

fn main() {
    let (stage, args) = Cli::parse().command.split();
    let config = match PipelineConfig::load(&args.config, &args.set) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    };
    match Pipeline::new(config).run(stage) {
        Ok(report) => print!("{}", report.render_table()),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
