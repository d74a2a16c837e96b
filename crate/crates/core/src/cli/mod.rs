//! The `pgait` command line.
//!
//! Every failure ends with one JSON line on stderr,
//! `{"error":"usage|data|internal","message":"..."}`, and exit code 2, 3 or 4.

mod commands;

use std::ffi::OsString;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Environment variable that supplies the dataset root when `--root` is absent.
pub const DATA_ROOT_ENV: &str = "PGAIT_DATA_ROOT";

#[derive(Debug, Parser)]
#[command(name = "pgait", version, about = "Gait-silhouette person re-identification toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Seed for data generation, initialisation and batch sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Accepted for reproducible scripts; all computation is already
    /// single-threaded with fixed reduction order.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Also write the report as JSON to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic label-map dataset with a manifest.
    Synth(commands::SynthArgs),
    /// Turn label maps (or silhouettes plus torso masks) into aligned silhouettes.
    Prep(commands::PrepArgs),
    /// Train an embedder on prepared silhouettes.
    Train(commands::TrainArgs),
    /// Embed every tracklet with all of its frames into a store.
    Embed(commands::EmbedArgs),
    /// Cross-camera mAP / CMC report for a store.
    Eval(commands::EvalArgs),
    /// Build a manifest from a CASIA-B directory tree.
    CasiaManifest(commands::CasiaManifestArgs),
    /// CASIA-B cross-view rank-1 report for a store.
    CasiaEval(commands::CasiaEvalArgs),
    /// Concatenate two L2-normalised stores.
    Fuse(commands::FuseArgs),
    /// Collapse external per-frame features into tracklet vectors.
    Aggregate(commands::AggregateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Internal => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn data(message: impl std::fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.to_string(),
        }
    }

    pub fn usage(message: impl std::fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.to_string(),
        }
    }

    pub fn internal(message: impl std::fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Internal,
            message: message.to_string(),
        }
    }

    /// The single machine-readable line printed on failure.
    pub fn line(&self) -> String {
        serde_json::json!({ "error": self.kind.name(), "message": self.message }).to_string()
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{}", e.render());
            let err = CliError::usage(e.kind().to_string());
            eprintln!("{}", err.line());
            return err.kind.exit_code();
        }
    };
    let previous = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let result = panic::catch_unwind(AssertUnwindSafe(|| commands::dispatch(&cli)));
    panic::set_hook(previous);
    let err = match result {
        Ok(Ok(())) => return 0,
        Ok(Err(e)) => e,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            CliError::internal(msg)
        }
    };
    eprintln!("{}", err.line());
    err.kind.exit_code()
}
