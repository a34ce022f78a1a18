use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use docrefine::query_analysis::ScopeMode;
use docrefine::tokens::TokenizerKind;

#[derive(Debug, Parser)]
#[command(name = "docrefine", version, about = "Structure long documents and refine them to a token budget")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderMode {
    Stub,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Overflow {
    /// Skip a candidate that does not fit and try the next one.
    Skip,
    /// End selection at the first candidate that does not fit.
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    Probabilities,
    Logprobs,
}

impl From<Scope> for ScopeMode {
    fn from(s: Scope) -> Self {
        match s {
            Scope::Probabilities => ScopeMode::Probabilities,
            Scope::Logprobs => ScopeMode::LogProbs,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Words kept at each end of an elided paragraph.
    #[arg(long, global = true, default_value_t = 5)]
    pub k: usize,
    #[arg(long, global = true, value_enum, default_value_t = ProviderMode::Stub)]
    pub provider: ProviderMode,
    /// Inference server base URL (http provider); falls back to REFINER_ENDPOINT.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Directory with replacement prompt templates.
    #[arg(long, global = true)]
    pub prompt_dir: Option<PathBuf>,
    /// `words` or `bpe:<vocab-path>`.
    #[arg(long, global = true, default_value = "words")]
    pub tokenizer: TokenizerKind,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for generated inputs. Nothing else is random.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print the run summary as JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn cleaned wiki pages into (text, markup) training pairs.
    BuildLabels(BuildLabelsArgs),
    /// Structure documents offline into the corpus store.
    Structure(StructureArgs),
    /// Refine queries against stored document trees.
    Refine(RefineArgs),
    /// Recall, compression and latency of refinement results.
    Eval(EvalArgs),
    /// Per-stage timing of the online path.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct BuildLabelsArgs {
    /// Raw pages, one JSON object per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Training pairs as JSON lines.
    #[arg(long)]
    pub output: PathBuf,
    /// Statistics file; defaults to `<output>.stats.json`.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StructureArgs {
    /// Documents {source_id, text}, one per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    /// Per-document outcomes as JSON lines.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Queries {query_id, query, doc_ids, golden_answers}, one per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Documents the queries refer to.
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub store: PathBuf,
    /// Results as JSON lines; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    #[arg(long, value_enum, default_value_t = Overflow::Stop)]
    pub overflow: Overflow,
    /// Same as `--overflow stop`.
    #[arg(long)]
    pub stop_on_first_overflow: bool,
    #[arg(long, value_enum, default_value_t = Scope::Probabilities)]
    pub scope: Scope,
    /// Include the per-document selection trace in each result.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Results from `refine`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Documents; adds the full-content baseline.
    #[arg(long)]
    pub docs: Option<PathBuf>,
    /// A second results file to report side by side.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub docs: PathBuf,
    /// Queries; each document is paired with its first query.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    /// Pad every document with generated paragraphs to this many words.
    #[arg(long)]
    pub pad_to: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    #[arg(long, value_enum, default_value_t = Overflow::Stop)]
    pub overflow: Overflow,
    #[arg(long)]
    pub output: Option<PathBuf>,
}
