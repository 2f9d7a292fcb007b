//! Command-line driver for `phrasealign`.

pub mod bleu;
pub mod commands;
pub mod config;
pub mod error;
pub mod oracle;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "phrasealign", version, about = "Phrase-alignment translation with constrained decoding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate sentences and print `translation<TAB>alignment<TAB>score`.
    Decode(DecodeArgs),
    /// Train the empty-phrase (omission) model from a word-aligned corpus.
    TrainEmpty(TrainEmptyArgs),
    /// Extract a phrase table and insertion vocabulary from a word-aligned corpus.
    Extract(ExtractArgs),
    /// Train the n-gram target scorer.
    TrainScorer(TrainScorerArgs),
    /// Corpus BLEU-4 of hypotheses against references.
    Bleu(BleuArgs),
    /// Compare beam search with exhaustive search on random instances.
    OracleCheck(OracleCheckArgs),
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Source sentences, one per line; `-` reads stdin.
    #[arg(long, short, default_value = "-")]
    pub input: PathBuf,
    /// Result records; `-` writes stdout.
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
    /// `key = value` file supplying defaults for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub phrase_table: Option<PathBuf>,
    #[arg(long)]
    pub insertion_vocab: Option<PathBuf>,
    /// n-gram counts file written by `train-scorer`.
    #[arg(long)]
    pub scorer: Option<PathBuf>,
    /// Omission model written by `train-empty`; without it nothing is omitted.
    #[arg(long)]
    pub empty_model: Option<PathBuf>,
    /// `source ||| target` rules applied wherever the source occurs.
    #[arg(long)]
    pub lexical_constraints: Option<PathBuf>,
    /// Comma-separated 1-based occurrence numbers to constrain (default: all).
    #[arg(long, value_delimiter = ',')]
    pub occurrences: Option<Vec<usize>>,
    /// Parse markup in the input as structural constraints.
    #[arg(long)]
    pub structured: bool,
    /// Drop tags from the printed translation.
    #[arg(long)]
    pub strip_tags: bool,
    /// Report failed sentences but exit 0.
    #[arg(long)]
    pub allow_failures: bool,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_target_len: Option<usize>,
    #[arg(long)]
    pub max_insertions: Option<usize>,
    #[arg(long)]
    pub max_consecutive_insertions: Option<usize>,
    #[arg(long)]
    pub omission_threshold: Option<f64>,
    #[arg(long)]
    pub options_per_span: Option<usize>,
    #[arg(long)]
    pub max_phrase_len: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainEmptyArgs {
    #[arg(long)]
    pub source: PathBuf,
    /// `i-j` word alignment per line.
    #[arg(long)]
    pub alignment: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Index of the first word in alignment files (0 or 1).
    #[arg(long)]
    pub align_base: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Held-out source sentences for reporting accuracy.
    #[arg(long, requires = "eval_alignment")]
    pub eval_source: Option<PathBuf>,
    #[arg(long, requires = "eval_source")]
    pub eval_alignment: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub alignment: PathBuf,
    #[arg(long)]
    pub phrase_table_out: PathBuf,
    #[arg(long)]
    pub insertion_vocab_out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub align_base: Option<usize>,
    /// Minimum unaligned rate for insertion words (exclusive).
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_words: Option<usize>,
    #[arg(long)]
    pub max_phrase_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainScorerArgs {
    /// Target-language sentences, one per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Add-k smoothing constant.
    #[arg(long, default_value_t = 0.1)]
    pub k: f64,
}

#[derive(Debug, Args)]
pub struct BleuArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    /// Reference file; repeat for multiple references.
    #[arg(long = "ref", required = true)]
    pub refs: Vec<PathBuf>,
    /// `w/o-tag`, `w/-tag` or `in-tag`.
    #[arg(long, default_value = "w/o-tag")]
    pub mode: bleu::BleuMode,
}

#[derive(Debug, Args)]
pub struct OracleCheckArgs {
    #[arg(long, default_value_t = 500)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Run a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decode(a) => commands::decode(&a),
        Command::TrainEmpty(a) => commands::train_empty(&a),
        Command::Extract(a) => commands::extract(&a),
        Command::TrainScorer(a) => commands::train_scorer(&a),
        Command::Bleu(a) => commands::bleu(&a),
        Command::OracleCheck(a) => commands::oracle_check(&a),
    }
}
