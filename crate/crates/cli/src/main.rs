//! `reco`: dataset ingestion, LLM augmentation, indexing, search and the
//! evaluation experiments, driven from the shell.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reco_core::style::{MetricKind, TedLabels};
use reco_core::Error;

#[derive(Parser, Debug)]
#[command(name = "reco", version, about = "Generation-augmented code search toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Key=value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set llm.model=gpt-3.5-turbo`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Dataset directory written by `ingest`.
    #[arg(long, global = true, default_value = "data")]
    pub data: PathBuf,
    /// Augmentation store (JSON-lines).
    #[arg(long, global = true, default_value = "augmentations.jsonl")]
    pub store: PathBuf,
}

/// Lexical retrieval knobs, for the verbs that build BM25 indexes.
#[derive(Args, Debug, Clone, Default)]
pub struct Bm25Flags {
    /// BM25 k1.
    #[arg(long)]
    pub k1: Option<f64>,
    /// BM25 b.
    #[arg(long)]
    pub b: Option<f64>,
    /// Keep snake_case and camelCase identifiers whole when tokenizing.
    #[arg(long)]
    pub no_ident_split: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate JSON-lines splits and write a dataset directory.
    Ingest(IngestArgs),
    /// Generate exemplar codes or rewrites with an LLM.
    Augment(AugmentArgs),
    /// Build a retrieval index over the test codebase.
    Index(IndexArgs),
    /// Query a saved index.
    Search(SearchArgs),
    /// MRR for baseline, GAR and ReCo configurations.
    Eval(EvalArgs),
    /// MRR as the number of generations grows.
    Sweep(SweepArgs),
    /// Retrieval with the most similar exemplar against a random one.
    SelectBest(SelectArgs),
    /// Quadrant counts and fit over metric and MRR deltas.
    Delta(DeltaArgs),
    /// Compare two snippets with one similarity metric.
    Metric(MetricArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub language: String,
    /// Output directory; defaults to `--data`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep a seeded random subset of this many test pairs.
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentTarget {
    /// Exemplar codes for each query.
    Gen,
    /// Summary plus rewritten codes for each code.
    Rewrite,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockKind {
    Echo,
    Oracle,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[arg(value_enum)]
    pub target: AugmentTarget,
    /// Generations per item.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Model name; defaults to `llm.model`.
    #[arg(long)]
    pub model: Option<String>,
    /// Use an offline mock instead of the HTTP endpoint.
    #[arg(long, value_enum)]
    pub mock: Option<MockKind>,
    /// Completion cache (JSON-lines).
    #[arg(long, default_value = "llm_cache.jsonl")]
    pub cache: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sparse,
    Dense,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[command(flatten)]
    pub bm25: Bm25Flags,
    #[arg(long, value_enum, default_value = "sparse")]
    pub mode: Mode,
    #[arg(long)]
    pub out: PathBuf,
    /// Append this many stored rewrites to every code.
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long, value_enum, default_value = "sparse")]
    pub mode: Mode,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub query: String,
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub bm25: Bm25Flags,
    /// baseline, gar, reco, or all (baseline plus both over the grid).
    #[arg(long, default_value = "reco")]
    pub framework: String,
    #[arg(long, default_value = "sparse")]
    pub retriever: String,
    /// Generations used per item. Repeatable for a grid.
    #[arg(long)]
    pub n: Vec<usize>,
    /// Model whose stored generations are used. Repeatable for a grid.
    #[arg(long)]
    pub model: Vec<String>,
    /// Exemplars against rewrites only.
    #[arg(long)]
    pub llm_only: bool,
    /// Write one JSON line per configuration here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub bm25: Bm25Flags,
    #[arg(long, default_value = "reco")]
    pub framework: String,
    #[arg(long, default_value = "sparse")]
    pub retriever: String,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub max_n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    pub bm25: Bm25Flags,
    #[arg(long, default_value = "cssim")]
    pub metric: MetricKind,
    #[arg(long, default_value = "sparse")]
    pub retriever: String,
    #[arg(long)]
    pub model: Option<String>,
    /// Stored exemplars considered per query.
    #[arg(long, default_value_t = 4)]
    pub candidates: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DeltaArgs {
    /// JSON-lines files from `select-best --out`, or of delta points.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricArgs {
    pub metric: MetricKind,
    /// Hypothesis snippet file.
    #[arg(long)]
    pub a: PathBuf,
    /// Reference snippet file.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub language: String,
    /// Dataset directory whose codes supply identifier IDF weights.
    #[arg(long)]
    pub idf_corpus: Option<PathBuf>,
    #[arg(long, default_value = "kind")]
    pub ted_labels: TedLabels,
}

/// 2: bad configuration or arguments, 3: augmentations missing, 4: an
/// endpoint failed, 1: anything else.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::MissingAugmentation { .. } | Error::GenerationShortfall { .. } => 3,
        Error::Llm { .. } | Error::Embedding(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
