//! `mwpcl`: pipeline runner for equation-aware contrastive learning.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{PipelineConfig, KEYS};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mwpcl", version, about = "Equation-aware contrastive learning for math word problems")]
struct Cli {
    /// Pipeline config file (`key = value` lines).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.tau=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize raw problems into a canonical corpus.
    Ingest(IngestArgs),
    /// Build the template similarity matrix of a corpus.
    Simmatrix(SimmatrixArgs),
    /// Generate QR and RODA augments.
    Augment(AugmentArgs),
    /// Sample a seeded challenge set of augments from the dev corpus.
    ChallengeSet(ChallengeArgs),
    /// Retrieve one hard triplet per anchor.
    Retrieve(RetrieveArgs),
    /// Train the encoder on retrieved triplets.
    Train(TrainArgs),
    /// Representation diagnostics of a checkpoint.
    Eval(EvalArgs),
    /// Write encoder embeddings for every record.
    DumpEmbeddings(DumpArgs),
    /// Train and evaluate every strategy combination.
    StrategyGrid(GridArgs),
    /// List the recognised config keys.
    Keys,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    raw: Option<String>,
    #[arg(long)]
    origin: Option<String>,
    /// Drop invalid records instead of failing; the artifact header counts them.
    #[arg(long)]
    skip_invalid: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimmatrixArgs {
    #[arg(long)]
    corpus: Option<String>,
    /// Include the templates of these augments.
    #[arg(long)]
    augments: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    corpus: Option<String>,
    /// Comma-separated subset of qr,roda.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChallengeArgs {
    #[arg(long)]
    dev: Option<String>,
    #[arg(long)]
    size: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    augments: Option<String>,
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long)]
    embeddings: Option<String>,
    /// em | nn
    #[arg(long)]
    eq_strategy: Option<String>,
    /// random | embedding-cos | bi-bleu
    #[arg(long)]
    text_metric: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    augments: Option<String>,
    #[arg(long)]
    triplets: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Directory for `checkpoint.txt` and `metrics.jsonl`.
    #[arg(long)]
    output_dir: Option<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    augments: Option<String>,
    #[arg(long)]
    triplets: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    augments: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    augments: Option<String>,
    #[arg(long)]
    embeddings: Option<String>,
    /// Evaluation corpus; defaults to the training corpus.
    #[arg(long)]
    dev: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn flag_overrides(command: &Command) -> Vec<(&'static str, &String)> {
    let pairs: Vec<(&'static str, &Option<String>)> = match command {
        Command::Ingest(a) => vec![("raw", &a.raw), ("ingest.origin", &a.origin)],
        Command::Simmatrix(a) => vec![("corpus", &a.corpus), ("augments", &a.augments)],
        Command::Augment(a) => vec![
            ("corpus", &a.corpus),
            ("augment.methods", &a.methods),
            ("augment.seed", &a.seed),
        ],
        Command::ChallengeSet(a) => vec![
            ("dev", &a.dev),
            ("challenge.size", &a.size),
            ("challenge.seed", &a.seed),
        ],
        Command::Retrieve(a) => vec![
            ("corpus", &a.corpus),
            ("augments", &a.augments),
            ("matrix", &a.matrix),
            ("embeddings", &a.embeddings),
            ("retrieval.eq_strategy", &a.eq_strategy),
            ("retrieval.text_metric", &a.text_metric),
            ("retrieval.seed", &a.seed),
        ],
        Command::Train(a) => vec![
            ("corpus", &a.corpus),
            ("augments", &a.augments),
            ("triplets", &a.triplets),
            ("train.steps", &a.steps),
            ("train.seed", &a.seed),
            ("output_dir", &a.output_dir),
        ],
        Command::Eval(a) => vec![
            ("corpus", &a.corpus),
            ("augments", &a.augments),
            ("triplets", &a.triplets),
            ("checkpoint", &a.checkpoint),
        ],
        Command::DumpEmbeddings(a) => vec![
            ("corpus", &a.corpus),
            ("augments", &a.augments),
            ("checkpoint", &a.checkpoint),
        ],
        Command::StrategyGrid(a) => vec![
            ("corpus", &a.corpus),
            ("augments", &a.augments),
            ("embeddings", &a.embeddings),
            ("dev", &a.dev),
            ("train.steps", &a.steps),
        ],
        Command::Keys => Vec::new(),
    };
    pairs
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
        .collect()
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            PipelineConfig::parse(&text)?
        }
        None => PipelineConfig::default(),
    };
    for o in &cli.overrides {
        config.apply_override(o)?;
    }
    for (key, value) in flag_overrides(&cli.command) {
        config.set(key, value)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Keys = cli.command {
        for (key, help) in KEYS {
            println!("{key:<34} {help}");
        }
        return Ok(());
    }
    let config = resolve_config(&cli)?;
    match cli.command {
        Command::Ingest(a) => commands::ingest(&config, a.skip_invalid, a.output),
        Command::Simmatrix(a) => commands::simmatrix(&config, a.output),
        Command::Augment(a) => commands::augment(&config, a.output),
        Command::ChallengeSet(a) => commands::challenge_set(&config, a.output),
        Command::Retrieve(a) => commands::retrieve(&config, a.output),
        Command::Train(_) => commands::train(&config),
        Command::Eval(a) => commands::eval(&config, a.output),
        Command::DumpEmbeddings(a) => commands::dump_embeddings(&config, a.output),
        Command::StrategyGrid(a) => commands::strategy_grid(&config, a.output),
        Command::Keys => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() })
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
