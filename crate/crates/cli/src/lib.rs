//! Command-line front end: `ingest`, `vocab`, `index`, `run`, `evaluate`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data or validation error,
//! 3 backend or I/O error.

mod commands;
pub mod config;
mod failure;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use failure::{ExitCode, Failure};

#[derive(Debug, Parser)]
#[command(name = "georeason", version, about = "Street-view geolocation reasoning pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. They override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `run.output_dir`
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker count for the pipeline
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// Overrides `run.seed`
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and filter a corpus manifest, writing a cleaned copy
    Ingest(IngestArgs),
    /// Build the detection prompt vocabulary
    Vocab(VocabArgs),
    /// Embed a knowledge base into an index file
    Index(IndexArgs),
    /// Run the pipeline over a corpus
    Run(RunArgs),
    /// Score a results file against the corpus
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Corpus manifest; defaults to `paths.corpus`
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Minimum explanation score kept
    #[arg(long)]
    pub min_score: Option<i64>,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    /// Corpus whose explanations feed the vocabulary
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Knowledge manifest whose snippets feed the vocabulary
    #[arg(long)]
    pub knowledge: Option<PathBuf>,
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Write the bundled general-purpose vocabulary instead
    #[arg(long, conflicts_with_all = ["corpus", "knowledge", "top_n"])]
    pub default_terms: bool,
    /// Output file; defaults to `<output-dir>/vocabulary.json`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Knowledge manifest; defaults to `paths.knowledge`
    #[arg(long)]
    pub knowledge: Option<PathBuf>,
    /// Index file; defaults to `paths.index`, then `<output-dir>/knowledge.idx`
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use a remote encoder at this URL
    #[arg(long)]
    pub encoder_endpoint: Option<String>,
    /// Encoder identity recorded in the index (with --encoder-endpoint)
    #[arg(long, requires = "encoder_endpoint")]
    pub encoder_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Corpus manifest; defaults to `paths.corpus`
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Stage toggles as a mode: P, P+VC or P+VC+K
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Results file; defaults to `<output-dir>/results.jsonl`
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Corpus manifest; defaults to `paths.corpus`
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code. Help and version output exit 0.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::Config as i32 } else { 0 };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code as i32
        }
    }
}
