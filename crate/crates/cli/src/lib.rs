//! Command-line front end for the pipeline-generation engine.
//!
//! [`args`] defines the clap surface, [`offline`] supplies a deterministic
//! local model backend for hermetic runs, and [`commands`] wires both into
//! the core crate. The binary itself is a thin `Cli::parse()` + dispatch.

pub mod args;
pub mod commands;
pub mod offline;

pub use args::{Cli, CliCommand, IngestOptions, RunOptions, ScoreOptions};
pub use commands::{cmd_generate, cmd_ingest, cmd_score, exit_code, run, UsageError};
pub use offline::OfflineBackend;
