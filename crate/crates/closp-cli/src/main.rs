//! `closp`: generate, train, index, search, and score tri-modal
//! text/SAR/MSI retrieval models on a synthetic labelled corpus.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use closp::evalsuite::Scope;
use closp::Error;

#[derive(Parser)]
#[command(name = "closp", version, about = "Tri-modal remote-sensing retrieval workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labelled SAR/MSI corpus
    GenCorpus {
        /// Generator settings as key=value lines
        #[arg(long)]
        config: Option<PathBuf>,
        /// Root seed; every derived stream is keyed off it
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corpus directory to create
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on the corpus's training split
    Train {
        /// Encoder and schedule settings as key=value lines
        #[arg(long)]
        config: Option<PathBuf>,
        /// Corpus directory
        #[arg(long)]
        corpus: PathBuf,
        /// Checkpoint file to write
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the config file
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the location mixing weight from the config file
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Embed the held-out split into a searchable index
    Index {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Index file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank indexed scenes against a text query
    Query {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Index file; pass twice to fuse two single-modality indices
        #[arg(long = "index")]
        index: Vec<PathBuf>,
        /// Label names joined by ". " or by commas
        #[arg(long)]
        text: String,
        /// How many hits to return
        #[arg(long, default_value_t = 1000)]
        k: usize,
        /// Ranked list as JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Score retrieval over every query the indexed labels admit
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        index: PathBuf,
        /// all, sar, or msi
        #[arg(long, default_value = "all")]
        scope: String,
        /// Metrics as flat JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Zero-shot label assignment over the held-out split
    Classify {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Per-class and macro scores as flat JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlate embedding distance with geographic distance
    GeoProbe {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Number of disjoint scene pairs to sample
        #[arg(long, default_value_t = 200)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pair distances as CSV
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> closp::Result<()> {
    match cli.command {
        Command::GenCorpus { config, seed, out } => {
            commands::gen_corpus(config.as_deref(), seed, &out)
        }
        Command::Train {
            config,
            corpus,
            out,
            seed,
            alpha,
        } => commands::train_model(config.as_deref(), &corpus, &out, seed, alpha),
        Command::Index {
            checkpoint,
            corpus,
            out,
        } => commands::build_index(&checkpoint, &corpus, &out),
        Command::Query {
            checkpoint,
            index,
            text,
            k,
            out,
        } => commands::run_query(&checkpoint, &index, &text, k, &out),
        Command::Eval {
            checkpoint,
            index,
            scope,
            out,
        } => commands::evaluate(&checkpoint, &index, Scope::parse(&scope)?, &out),
        Command::Classify {
            checkpoint,
            corpus,
            out,
        } => commands::classify(&checkpoint, &corpus, &out),
        Command::GeoProbe {
            checkpoint,
            corpus,
            k,
            seed,
            out,
        } => commands::geo_probe(&checkpoint, &corpus, k, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numeric { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
