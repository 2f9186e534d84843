//! Command implementations behind the `rdk` binary.

pub mod augment;
pub mod canonical;
pub mod corpus;
pub mod fuse;
pub mod rank;
pub mod score;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "rdk", version, about = "Score, rank, augment and fuse depth-robustness corpora")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Score predicted depth against ground truth
    Score(score::ScoreArgs),
    /// Rank score tables or reports into a leaderboard
    Rank(rank::RankArgs),
    /// Run an augmentation pipeline over a directory of RGB images
    Augment(augment::AugmentArgs),
    /// Fuse depth predictions from several directories
    Fuse(fuse::FuseArgs),
}

/// Flags shared by the corpus commands.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Fail on missing counterpart files or per-file errors instead of skipping them
    #[arg(long)]
    pub strict: bool,
    /// Worker threads (0 = one per core)
    #[arg(long, env = "RDK_JOBS", default_value_t = 0)]
    pub jobs: usize,
}

/// Output path; `None` or `-` means stdout.
pub fn write_output(out: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, text)?,
        _ => print!("{text}"),
    }
    Ok(())
}

pub fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

/// A CLI-level failure with a stable kind for the error record.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Failure { kind, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

/// Kind of the first recognised error in the chain.
pub fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.kind;
        }
        if let Some(c) = cause.downcast_ref::<rdk_core::Error>() {
            return c.kind();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "invalid_config";
        }
    }
    "error"
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Score(a) => score::run(&a),
        Command::Rank(a) => rank::run(&a),
        Command::Augment(a) => augment::run(&a),
        Command::Fuse(a) => fuse::run(&a),
    }
}
