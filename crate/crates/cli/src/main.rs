//! `setcse`: query sentence sets with intersection and difference, train
//! adapters, and run the evaluation protocols from the command line.
//!
//! Exit codes: 0 success, 1 runtime or domain error, 2 usage or query parse error.

mod commands;
mod output;
mod repl;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use setcse::eval::F1Average;
use setcse::trainer::{NegativeCap, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "setcse", version, about = "Set operations over sentence embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate an embedding file (and its alignment with a corpus)
    EmbedCheck(EmbedCheckArgs),
    /// Train an adapter on the sets of a set file
    Train(TrainCmdArgs),
    /// Rank a carrier set with a query such as "U & A \ B"
    Query(QueryArgs),
    /// Run an evaluation protocol on a labeled corpus
    Eval(EvalArgs),
    /// Intersection and difference accuracy across n_sample values, as CSV
    Sweep(SweepArgs),
    /// Interactive query loop
    Repl(ReplArgs),
}

#[derive(Args, Debug)]
struct EmbedCheckArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Also check that every corpus sentence has an embedding
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct StoreArgs {
    /// JSONL corpus with `id`, `text` and optional `label`
    #[arg(long)]
    corpus: PathBuf,
    /// Embedding file in the SCSE binary format
    #[arg(long)]
    embeddings: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct TrainFlags {
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    #[arg(long = "lr", default_value_t = 0.001)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    /// Negatives per anchor: a count or "all"
    #[arg(long, default_value = "all")]
    max_negatives: NegativeCap,
    /// Overridden by SETCSE_SEED when set
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TrainCmdArgs {
    #[command(flatten)]
    store: StoreArgs,
    /// JSON object mapping set names to sentence ids
    #[arg(long)]
    sets: PathBuf,
    /// Where to write the adapter checkpoint
    #[arg(long)]
    out: PathBuf,
    /// Loss history JSON; defaults to the checkpoint path with a `.loss.json` suffix
    #[arg(long)]
    history: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[command(flatten)]
    store: StoreArgs,
    #[arg(long)]
    sets: PathBuf,
    #[arg(long, short)]
    query: String,
    /// Score with a saved adapter
    #[arg(long, conflicts_with = "train_first")]
    adapter: Option<PathBuf>,
    /// Train a fresh adapter on the query's operand sets first
    #[arg(long = "train")]
    train_first: bool,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, value_enum, default_value_t = RowFormat::Tsv)]
    format: RowFormat,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum RowFormat {
    Tsv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ProtocolArg {
    Intersection,
    Difference,
    SerialIntersection,
    SerialDifference,
    SerialMixed,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ArmArg {
    Both,
    Setcse,
    Frozen,
}

#[derive(Args, Debug, Clone)]
struct HarnessFlags {
    #[arg(long, default_value_t = 20)]
    n_sample: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long = "f1", default_value = "macro")]
    f1_average: F1Average,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    store: StoreArgs,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Intersection)]
    protocol: ProtocolArg,
    /// The two classes of a serial protocol, e.g. `sports,business`
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    classes: Vec<String>,
    #[arg(long, value_enum, default_value_t = ArmArg::Both)]
    arm: ArmArg,
    #[command(flatten)]
    harness: HarnessFlags,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Also write the reports as JSON
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    store: StoreArgs,
    /// n_sample values, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20")]
    values: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ArmArg::Setcse)]
    arm: ArmArg,
    #[command(flatten)]
    harness: HarnessFlags,
    /// CSV destination; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct ReplArgs {
    #[command(flatten)]
    store: StoreArgs,
    #[arg(long)]
    sets: PathBuf,
    #[arg(long)]
    adapter: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[command(flatten)]
    train: TrainFlags,
}

/// Bad flags or query text; exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

impl TrainFlags {
    fn config(&self) -> anyhow::Result<TrainConfig> {
        let seed = match std::env::var("SETCSE_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| UsageError(format!("SETCSE_SEED must be an unsigned integer, got {v:?}")))?,
            Err(_) => self.seed,
        };
        Ok(TrainConfig {
            tau: self.tau,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed,
            max_negatives_per_anchor: self.max_negatives,
            momentum: self.momentum,
        })
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<setcse::QueryParseError>() {
            return 2;
        }
        if let Some(setcse::Error::Query(_)) = cause.downcast_ref::<setcse::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::EmbedCheck(a) => commands::embed_check(a),
        Command::Train(a) => commands::train(a),
        Command::Query(a) => commands::query(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Repl(a) => repl::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
