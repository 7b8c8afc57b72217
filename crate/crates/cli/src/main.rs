//! Command-line interface: register labeled scans, generate synthetic
//! articulated scenes, and evaluate results against ground truth.
//!
//! Exit codes: 0 success, 1 I/O or configuration error, 2 fatal registration
//! error. Log verbosity is controlled by the `RUST_LOG` environment variable.

mod eval;
mod register;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pwr-align", version, about = "Part-wise rigid point cloud registration for articulated objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register a labeled source cloud onto a target scan.
    Register {
        /// Source geometry (ASCII PLY).
        #[arg(long)]
        source: PathBuf,
        /// Per-vertex part labels, one integer per line.
        #[arg(long)]
        labels: PathBuf,
        /// Target geometry (ASCII PLY).
        #[arg(long)]
        target: PathBuf,
        /// Configuration document (JSON); omit for defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output result document (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth document; required by the oracle matcher variant.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Generate a synthetic articulated scene with ground truth.
    Synth {
        /// Scene description (JSON).
        #[arg(long)]
        scene: PathBuf,
        /// Degradation description (JSON); omit for a clean scan.
        #[arg(long)]
        degrade: Option<PathBuf>,
        /// Prefix for the four output files
        /// (<prefix>_source.ply, _source.labels, _target.ply, _truth.json).
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Compare a registration result against ground truth.
    Eval {
        /// Result document from `register`.
        #[arg(long)]
        result: PathBuf,
        /// Ground-truth document from `synth`.
        #[arg(long)]
        truth: PathBuf,
    },
}

/// Error carrying the process exit code.
pub(crate) struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn registration(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl<E: std::fmt::Display> From<E> for CliError
where
    E: Into<pwr_align_core::io::FileError>,
{
    fn from(e: E) -> Self {
        CliError::input(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Register { source, labels, target, config, out, truth } => {
            register::run(&source, &labels, &target, config.as_deref(), &out, truth.as_deref())
        }
        Command::Synth { scene, degrade, out_prefix } => {
            synth::run(&scene, degrade.as_deref(), &out_prefix)
        }
        Command::Eval { result, truth } => eval::run(&result, &truth),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
