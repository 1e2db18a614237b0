//! Command-line surface: subcommands, flags, and the human-unit parsers.
//!
//! Durations and sizes accept human spellings (`10s`, `500ms`, `1MiB`) and
//! normalize at parse time, so the rest of the program only ever sees
//! milliseconds and bytes. Exit codes are fixed: 0 success, 1 I/O or
//! configuration failure, 2 usage error (clap's own convention).

use clap::{ArgGroup, Args, Parser, Subcommand};
use pipeforge_core::providers::Capability;
use pipeforge_core::TargetSystem;
use std::collections::BTreeSet;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "pipeforge",
    version,
    about = "Turn a natural-language request into a validated stream-pipeline artifact bundle"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Run a full session: analyze the query, reason, execute, write the bundle.
    Generate(RunOptions),
    /// Build a retrieval index from local corpora or git repositories.
    Ingest(IngestOptions),
    /// Grade a finished bundle with the error-free score harness.
    Score(ScoreOptions),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("query_source").required(true).args(["query", "query_file"])))]
pub struct RunOptions {
    /// The request, inline.
    #[arg(value_name = "QUERY")]
    pub query: Option<String>,

    /// The request, read from a file.
    #[arg(long, value_name = "PATH")]
    pub query_file: Option<PathBuf>,

    /// Target stream-processing engine.
    #[arg(long, default_value = "flink")]
    pub system: TargetSystem,

    /// Retrieve reference documents and seed them into the reasoning graph.
    #[arg(long)]
    pub use_rag: bool,

    /// Corpus directories (or files) to ingest for retrieval; repeatable.
    #[arg(long, value_name = "PATH")]
    pub corpus: Vec<PathBuf>,

    /// How many retrieved documents to seed.
    #[arg(long, default_value_t = 3)]
    pub rag_k: usize,

    /// Primary models in rotation order, as provider:model; repeatable.
    #[arg(long = "model", value_name = "PROVIDER:MODEL")]
    pub models: Vec<String>,

    /// Backup models appended after the primaries; repeatable.
    #[arg(long = "backup-model", value_name = "PROVIDER:MODEL")]
    pub backup_models: Vec<String>,

    /// Seed for every derived random stream (embeddings, backoff jitter).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// No network: canned deterministic provider, virtual clock.
    #[arg(long)]
    pub offline: bool,

    /// Scripted provider events for offline runs (JSON lines).
    #[arg(long, value_name = "PATH")]
    pub mock_script: Option<PathBuf>,

    /// Where the artifact bundle is written.
    #[arg(long, value_name = "DIR", default_value = "artifact-bundle")]
    pub output_dir: PathBuf,

    /// Parallel step workers (1 = strictly sequential, reproducible order).
    #[arg(long, default_value_t = 1)]
    pub workers: usize,

    /// Base retry delay (e.g. 500ms, 1s, 2m).
    #[arg(long = "base-delay", value_name = "DURATION", default_value = "1s", value_parser = parse_duration_ms)]
    pub base_delay_ms: u64,

    /// Retry budget per step.
    #[arg(long, default_value_t = 5)]
    pub max_retries: u32,

    /// Also print the raw JSONL event stream to stderr.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct IngestOptions {
    /// Local paths or git URLs to ingest.
    #[arg(required = true, value_name = "SOURCE")]
    pub sources: Vec<String>,

    /// Where to write the index JSON; omit to only print counts.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Maximum characters per chunk.
    #[arg(long, default_value_t = 2000)]
    pub chunk_size: usize,

    /// Skip files larger than this (e.g. 1MiB, 512KiB).
    #[arg(long = "max-file-size", value_name = "SIZE", default_value = "1MiB", value_parser = parse_size_bytes)]
    pub max_file_size: u64,

    /// Comma-separated extension allowlist (defaults to the built-in set).
    #[arg(long, value_name = "EXTS")]
    pub extensions: Option<String>,

    /// Allow remote git sources (default refuses them).
    #[arg(long)]
    pub online: bool,

    /// Embedding seed; must match the seed used at generation time.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ScoreOptions {
    /// The artifact bundle directory to grade.
    #[arg(value_name = "BUNDLE_DIR")]
    pub bundle: PathBuf,

    /// Inject a fixed syntax error count instead of running a checker.
    #[arg(long, value_name = "N")]
    pub syntax: Option<u32>,

    /// Inject a fixed logic error count.
    #[arg(long, value_name = "N")]
    pub logic: Option<u32>,

    /// Inject a fixed runtime error count.
    #[arg(long, value_name = "N")]
    pub runtime: Option<u32>,

    /// Shell command run per code file for syntax errors ($1 = file path).
    #[arg(long = "syntax-cmd", value_name = "CMD")]
    pub syntax_cmd: Option<String>,

    /// Shell command run per code file for logic errors ($1 = file path).
    #[arg(long = "logic-cmd", value_name = "CMD")]
    pub logic_cmd: Option<String>,

    /// Shell command run per code file for runtime errors ($1 = file path).
    #[arg(long = "runtime-cmd", value_name = "CMD")]
    pub runtime_cmd: Option<String>,

    /// Row label in the report.
    #[arg(long, default_value = "pipeline")]
    pub label: String,

    /// Complexity group for the report row.
    #[arg(long, default_value = "unclassified")]
    pub complexity: String,

    /// Target system recorded in the report row.
    #[arg(long, default_value = "flink")]
    pub system: TargetSystem,

    /// Emit the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

/// Parse `10s` / `500ms` / `2m` / `1h` / bare milliseconds.
pub fn parse_duration_ms(text: &str) -> Result<u64, String> {
    parse_with_units(text, &[("ms", 1), ("s", 1000), ("m", 60_000), ("h", 3_600_000)], "duration")
}

/// Parse `1MiB` / `512KiB` / `2GiB` / `1MB` / `10KB` / bare bytes.
pub fn parse_size_bytes(text: &str) -> Result<u64, String> {
    parse_with_units(
        text,
        &[
            ("kib", 1024),
            ("mib", 1024 * 1024),
            ("gib", 1024 * 1024 * 1024),
            ("kb", 1000),
            ("mb", 1_000_000),
            ("gb", 1_000_000_000),
            ("b", 1),
        ],
        "size",
    )
}

fn parse_with_units(text: &str, units: &[(&str, u64)], what: &str) -> Result<u64, String> {
    let trimmed = text.trim();
    let lower = trimmed.to_lowercase();
    for (suffix, factor) in units {
        if let Some(number) = lower.strip_suffix(suffix) {
            let number = number.trim();
            if number.is_empty() {
                return Err(format!("missing number in {what} {trimmed:?}"));
            }
            let value: u64 = number.parse().map_err(|_| format!("bad {what} {trimmed:?}"))?;
            return value.checked_mul(*factor).ok_or_else(|| format!("{what} {trimmed:?} overflows"));
        }
    }
    trimmed.parse().map_err(|_| format!("bad {what} {trimmed:?} (unit suffix or plain integer expected)"))
}

/// `provider:model` → (provider, model); a bare name defaults its provider
/// to `openai` (or `offline` when that makes sense — callers decide by
/// passing a default).
pub fn parse_model_spec(spec: &str, default_provider: &str) -> (String, String) {
    match spec.split_once(':') {
        Some((provider, model)) if !provider.is_empty() && !model.is_empty() => {
            (provider.to_string(), model.to_string())
        }
        _ => (default_provider.to_string(), spec.to_string()),
    }
}

/// What a model can be routed for, guessed from its name. Names that signal
/// a specialty get that capability (plus general chat); everything else is
/// assumed fully capable.
pub fn capabilities_for(model_id: &str) -> BTreeSet<Capability> {
    let lower = model_id.to_lowercase();
    if lower.contains("plan") {
        BTreeSet::from([Capability::Planning, Capability::General])
    } else if lower.contains("cod") {
        BTreeSet::from([Capability::Codegen, Capability::General])
    } else {
        BTreeSet::from([Capability::Planning, Capability::Codegen, Capability::General])
    }
}
