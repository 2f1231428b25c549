use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "labrag", version, about = "Retrieval-augmented QA over laboratory protocols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Validate a corpus (and optionally a QA file) and print statistics.
    Ingest(IngestArgs),
    /// Chunk a corpus and write the chunks as JSONL.
    Chunk(ChunkArgs),
    /// Chunk, embed and index a corpus into a directory.
    Index(IndexArgs),
    /// Ask a question against a saved index.
    Query(QueryArgs),
    /// Evaluate a QA benchmark, one configuration or a whole grid.
    Eval(EvalArgs),
    /// Serve the HTTP API and the web UI.
    Serve(ServeArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub qa: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ChunkStrategy {
    Recursive,
    Semantic,
}

#[derive(Args, Clone)]
pub struct ChunkFlags {
    /// Recursive target size in tokens.
    #[arg(long, default_value_t = 256)]
    pub target: usize,
    /// Recursive overlap in tokens.
    #[arg(long, default_value_t = 64)]
    pub overlap: usize,
    /// Semantic minimum chunk size in tokens.
    #[arg(long = "min-chunk", default_value_t = 128)]
    pub min_chunk: usize,
    /// Semantic breakpoint percentile.
    #[arg(long, default_value_t = 95.0)]
    pub percentile: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Hash,
    Http,
}

#[derive(Args, Clone, Default)]
pub struct ProviderFlags {
    /// Embedding provider.
    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Base URL of an HTTP embedding server.
    #[arg(long = "provider-url")]
    pub provider_url: Option<String>,
    /// Model name reported by the HTTP embedding server.
    #[arg(long = "provider-model")]
    pub provider_model: Option<String>,
    /// Embedding dimension.
    #[arg(long)]
    pub dimension: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    Stub,
    Http,
}

#[derive(Args, Clone, Default)]
pub struct GeneratorFlags {
    /// Answer generator.
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorKind>,
    /// Base URL of an HTTP generation server.
    #[arg(long = "generator-url")]
    pub generator_url: Option<String>,
}

#[derive(Args, Clone, Default)]
pub struct RetrievalFlags {
    /// Retrieval strategy: naive, rerank or hybrid.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Rerank cosine threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long = "dense-weight")]
    pub dense_weight: Option<f64>,
    #[arg(long = "sparse-weight")]
    pub sparse_weight: Option<f64>,
}

#[derive(Args)]
pub struct ChunkArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Chunking strategy.
    #[arg(long, value_enum, default_value = "recursive")]
    pub strategy: ChunkStrategy,
    #[command(flatten)]
    pub sizes: ChunkFlags,
    #[command(flatten)]
    pub provider: ProviderFlags,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Index directory to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Chunking strategy.
    #[arg(long, value_enum, default_value = "recursive")]
    pub strategy: ChunkStrategy,
    #[command(flatten)]
    pub sizes: ChunkFlags,
    #[command(flatten)]
    pub provider: ProviderFlags,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    pub question: String,
    #[command(flatten)]
    pub retrieval: RetrievalFlags,
    #[command(flatten)]
    pub provider: ProviderFlags,
    #[command(flatten)]
    pub generator: GeneratorFlags,
    /// Generate an answer from the retrieved context.
    #[arg(long)]
    pub generate: bool,
    /// Print the same JSON body as the HTTP API.
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JudgeKind {
    Containment,
    Llm,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Saved index; its documents also feed grid runs.
    #[arg(long, required_unless_present = "corpus")]
    pub index: Option<PathBuf>,
    /// Corpus to index in memory instead of a saved index.
    #[arg(long, conflicts_with = "index")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub qa: PathBuf,
    /// Run every row of an experiment grid (the bundled ten-row grid when no path is given).
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    pub grid: Option<String>,
    /// Cutoffs for the top-k metrics, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub ks: Vec<usize>,
    /// Directory for report files.
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
    /// Experiment id for single runs.
    #[arg(long, default_value = "eval")]
    pub id: String,
    /// Chunking strategy when indexing `--corpus` for a single run.
    #[arg(long, value_enum, default_value = "recursive")]
    pub chunking: ChunkStrategy,
    #[command(flatten)]
    pub sizes: ChunkFlags,
    #[command(flatten)]
    pub retrieval: RetrievalFlags,
    #[command(flatten)]
    pub provider: ProviderFlags,
    #[command(flatten)]
    pub generator: GeneratorFlags,
    #[arg(long, value_enum, default_value = "containment")]
    pub judge: JudgeKind,
    /// Score top-k by character spans instead of tokens.
    #[arg(long)]
    pub span_topk: bool,
    /// Record wall-clock runtime in the reports.
    #[arg(long)]
    pub timings: bool,
    /// Print reports as JSON instead of tables.
    #[arg(long)]
    pub json: bool,
    /// Evaluate questions one at a time.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args)]
pub struct ServeArgs {
    /// TOML or JSON engine config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<String>,
    /// Directory with the built web UI.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[command(flatten)]
    pub retrieval: RetrievalFlags,
    #[command(flatten)]
    pub provider: ProviderFlags,
    #[command(flatten)]
    pub generator: GeneratorFlags,
}
