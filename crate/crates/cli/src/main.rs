use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{CommonArgs, FileConfig, Settings};

/// Mixed-membership stochastic block model recommender.
#[derive(Debug, Parser)]
#[command(name = "mmsbm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit an ensemble of EM runs and write a model snapshot plus likelihood traces.
    Fit,
    /// Predict rating distributions for (user, item) pairs from a query file.
    Predict {
        /// Model snapshot (default: <out>/model.snap).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Query file with one `user item` pair per line.
        #[arg(long)]
        queries: Option<PathBuf>,
    },
    /// Cross-validate the selected methods.
    Evaluate,
    /// Time EM iterations on nested subsets of the dataset (or a synthetic one).
    Benchmark {
        /// Comma-separated subset fractions.
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
    /// Generate ratings from a planted model.
    Synthesize {
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        ratings_per_user: Option<usize>,
    },
    /// Compare inferred user profiles across gender and age groups.
    Analyze {
        /// User metadata file (`user|age|gender|...`).
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Model snapshot; without one, an ensemble is fitted on the dataset.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut settings = Settings::resolve(&cli.common, &file)?;
    match &cli.command {
        Command::Predict { model, queries } => {
            settings.predict_model = model.clone().or(settings.predict_model);
            settings.queries = queries.clone().or(settings.queries);
        }
        Command::Benchmark { fractions: Some(f) } => settings.fractions = f.clone(),
        Command::Synthesize {
            users,
            items,
            ratings_per_user,
        } => {
            settings.synth_users = users.unwrap_or(settings.synth_users);
            settings.synth_items = items.unwrap_or(settings.synth_items);
            settings.synth_ratings_per_user = ratings_per_user.unwrap_or(settings.synth_ratings_per_user);
        }
        Command::Analyze { metadata, model } => {
            settings.metadata = metadata.clone().or(settings.metadata);
            settings.analyze_model = model.clone().or(settings.analyze_model);
        }
        _ => {}
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .context("starting worker pool")?;
    pool.install(|| match cli.command {
        Command::Fit => commands::fit(&settings),
        Command::Predict { .. } => commands::predict(&settings),
        Command::Evaluate => commands::evaluate(&settings),
        Command::Benchmark { .. } => commands::benchmark(&settings),
        Command::Synthesize { .. } => commands::synthesize(&settings),
        Command::Analyze { .. } => commands::analyze(&settings),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
