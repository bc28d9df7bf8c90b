//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod apply;
mod bench;
mod data;
mod decode;
mod extract;
mod score;
mod train;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::decoder::DecodeParams;
use crate::error::Error;
use crate::tokenize::TokenizeMode;

pub use decode::decode_sentence;
pub use bench::{bucket_label, run_bench, BenchBucket, BenchInput, BenchReport, DEFAULT_BUCKET_EDGES};

#[derive(Debug, Parser)]
#[command(name = "spanedit", version, about = "Span-based edit extraction, training, decoding and scoring")]
pub struct Cli {
    /// Seed for every random choice (model init, minibatch sampling).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a TSV parallel corpus into edit sequences (JSONL).
    Extract(extract::ExtractArgs),
    /// Apply edit sequences and print the resulting targets.
    Apply(apply::ApplyArgs),
    /// Train an edit or full-sequence model and write a checkpoint.
    Train(train::TrainArgs),
    /// Decode sources with a trained checkpoint.
    Decode(decode::DecodeArgs),
    /// Score hypotheses against references.
    Score(score::ScoreArgs),
    /// Compare decoding speed of edit and full-sequence models.
    Bench(bench::BenchArgs),
}

/// Decoding flags shared by `decode` and `bench`. Precedence: flag, then
/// `--config` file, then built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct DecodeFlags {
    /// JSON file with DecodeParams fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long = "lambda-t")]
    pub lambda_t: Option<f64>,
    #[arg(long = "lambda-p")]
    pub lambda_p: Option<f64>,
    #[arg(long = "lambda-r")]
    pub lambda_r: Option<f64>,
    /// Length-normalization exponent (0 disables).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "identity-penalty")]
    pub identity_penalty: Option<f64>,
    /// Refinement passes (1 = plain beam search).
    #[arg(long)]
    pub passes: Option<usize>,
    /// Skip predictable sub-steps after SELF and EOS tags.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub shortcuts: Option<bool>,
    #[arg(long = "max-steps")]
    pub max_steps: Option<usize>,
}

impl DecodeFlags {
    pub fn resolve(&self) -> anyhow::Result<DecodeParams> {
        let mut p = match &self.config {
            Some(path) => DecodeParams::load(path)?,
            None => DecodeParams::default(),
        };
        if let Some(v) = self.beam {
            p.beam_size = v;
        }
        if let Some(v) = self.lambda_t {
            p.lambda_t = v;
        }
        if let Some(v) = self.lambda_p {
            p.lambda_p = v;
        }
        if let Some(v) = self.lambda_r {
            p.lambda_r = v;
        }
        if let Some(v) = self.alpha {
            p.length_norm_alpha = v;
        }
        if let Some(v) = self.identity_penalty {
            p.identity_penalty = v;
        }
        if let Some(v) = self.passes {
            p.refinement_passes = v;
        }
        if let Some(v) = self.shortcuts {
            p.shortcuts_enabled = v;
        }
        if self.max_steps.is_some() {
            p.max_steps = self.max_steps;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct TokenizeFlag {
    /// Tokenization of text inputs: whitespace or character.
    #[arg(long, default_value_t = TokenizeMode::Whitespace)]
    pub tokenize: TokenizeMode,
}

/// A problem with how the command was invoked.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Maps an error to the documented exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NonFinite { .. }) => 3,
        Some(Error::UnknownTask { .. } | Error::Config(_) | Error::DecodeParams(_) | Error::ModeMismatch { .. }) => 1,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract(a) => extract::run(a),
        Command::Apply(a) => apply::run(a),
        Command::Train(a) => train::run(a, cli.seed),
        Command::Decode(a) => decode::run(a),
        Command::Score(a) => score::run(a),
        Command::Bench(a) => bench::run(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e:#}");
            exit_code(&e)
        }
    }
}
