//! The three subcommands behind the `pipeforge` binary.
//!
//! Each command returns `anyhow::Result<()>`; [`run`] maps outcomes onto
//! process exit codes: 0 for success, 1 for I/O or configuration failures,
//! 2 for usage errors (bad flag combinations, empty queries). Clap's own
//! parse failures already exit with 2, so the whole surface agrees.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use pipeforge_core::artifacts::{
    extract_code_blocks, synthesize_response, ArtifactBundle, MemoryStore, SessionSummary,
};
use pipeforge_core::efs::{
    check, CheckKind, Checker, CommandChecker, EfsReport, PipelineScore, StubChecker,
};
use pipeforge_core::embeddings::{Encoder, DEFAULT_DIM};
use pipeforge_core::executor::{
    run_plan, Clock, EventSink, ExecEvent, ModelStepRunner, ResultSink, RetryPolicy,
    RetryingProvider, StepResult, SystemClock, VirtualClock,
};
use pipeforge_core::hgot::{construct, ConstructConfig};
use pipeforge_core::knowledge::{ingest, retrieve_relevant_docs, IngestConfig, IngestPolicy};
use pipeforge_core::providers::{
    initialize_models, Capability, HttpBackend, MockBackend, ModelHandle,
};
use pipeforge_core::query::analyze_query;

use crate::args::{
    capabilities_for, parse_model_spec, Cli, CliCommand, IngestOptions, RunOptions, ScoreOptions,
};
use crate::offline::OfflineBackend;

/// A bad invocation rather than a failed one. Carried inside `anyhow::Error`
/// and fished back out at the exit boundary so it can map to code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Prints a stdout line, swallowing write errors. A downstream consumer
/// closing the pipe early (`pipeforge score --json | head`) should end the
/// report, not kill the process with a broken-pipe panic — the bundle on
/// disk is the product, the terminal lines are narration.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// The stderr counterpart, with the same tolerance, for the progress stream.
macro_rules! note {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stderr(), $($arg)*);
    }};
}

/// Exit code for a failed command: 2 if the chain contains a usage error,
/// 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        2
    } else {
        1
    }
}

/// Dispatch a parsed invocation and reduce it to an exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        CliCommand::Generate(opts) => cmd_generate(opts),
        CliCommand::Ingest(opts) => cmd_ingest(opts),
        CliCommand::Score(opts) => cmd_score(opts),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            note!("error: {err:#}");
            exit_code(&err)
        }
    }
}

// ---------------------------------------------------------------------------
// generate

/// Streams execution events to stderr as they happen. Quiet mode prints a
/// short human line per step; verbose mode emits every event as JSON.
struct ProgressSink {
    verbose: bool,
}

impl EventSink for ProgressSink {
    fn record(&self, event: ExecEvent) {
        if self.verbose {
            if let Ok(line) = serde_json::to_string(&event) {
                note!("{line}");
            }
            return;
        }
        match event {
            ExecEvent::StepStart { step_id, .. } => note!("-> {step_id}"),
            ExecEvent::StepCompleted { step_id, attempts, .. } => {
                if attempts > 1 {
                    note!("ok {step_id} ({attempts} attempts)");
                } else {
                    note!("ok {step_id}");
                }
            }
            ExecEvent::Backoff { step_id, retries, delay_ms } => {
                note!("   {step_id}: rate limited, retry {retries} in {delay_ms} ms");
            }
            ExecEvent::ModelSwitch { step_id, from, to } => {
                note!("   {step_id}: switching model {from} -> {to}");
            }
            ExecEvent::FallbackUsed { step_id } => {
                note!("   {step_id}: all models exhausted, using fallback result");
            }
            ExecEvent::Attempt { .. } => {}
        }
    }
}

/// Persists each step result into the bundle the moment it completes, so a
/// crash mid-plan still leaves the finished steps on disk.
struct BundleSink<'a> {
    bundle: &'a ArtifactBundle,
}

impl ResultSink for BundleSink<'_> {
    fn save(&self, result: &StepResult) -> Result<(), String> {
        self.bundle.save_step_result(result).map(|_| ()).map_err(|e| e.to_string())
    }
}

fn resolve_query(opts: &RunOptions) -> anyhow::Result<String> {
    let raw = match (&opts.query, &opts.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(path)) => fs::read_to_string(path)
            .with_context(|| format!("reading query file {}", path.display()))?,
        // Clap's arg group guarantees one of the two is present.
        (None, None) => return Err(usage("a query is required (positional or --query-file)")),
    };
    if raw.trim().is_empty() {
        return Err(usage("the query is empty"));
    }
    Ok(raw)
}

/// Model specs for a run that never named any: a planner/coder pair offline,
/// a single general-purpose model online.
fn default_model_specs(offline: bool) -> Vec<String> {
    if offline {
        vec!["offline:planner".into(), "offline:coder".into()]
    } else {
        vec!["openai:gpt-4o".into()]
    }
}

fn handles_from_specs(specs: &[String], default_provider: &str) -> Vec<ModelHandle> {
    specs
        .iter()
        .map(|spec| {
            let (provider, model) = parse_model_spec(spec, default_provider);
            let caps = capabilities_for(&model);
            ModelHandle::new(provider, model, caps)
        })
        .collect()
}

/// Remove generated files from a previous run so step counts and code
/// listings reflect this run only. The memory log survives on purpose:
/// it accumulates across sessions.
fn clear_generated(bundle: &ArtifactBundle) -> anyhow::Result<()> {
    for dir in [bundle.steps_dir(), bundle.code_dir()] {
        for entry in fs::read_dir(&dir).with_context(|| format!("listing {}", dir.display()))? {
            let path = entry?.path();
            if path.is_file() {
                fs::remove_file(&path)
                    .with_context(|| format!("removing stale {}", path.display()))?;
            }
        }
    }
    for path in [bundle.graph_path(), bundle.summary_path(), bundle.response_path()] {
        if path.exists() {
            fs::remove_file(&path).with_context(|| format!("removing stale {}", path.display()))?;
        }
    }
    Ok(())
}

pub fn cmd_generate(opts: &RunOptions) -> anyhow::Result<()> {
    let raw_query = resolve_query(opts)?;
    if opts.use_rag && opts.corpus.is_empty() {
        return Err(usage("--use-rag needs at least one --corpus path"));
    }
    if opts.use_rag && opts.rag_k == 0 {
        return Err(usage("--rag-k must be at least 1"));
    }

    let hermetic = opts.offline || opts.mock_script.is_some();
    let encoder = Encoder::deterministic(DEFAULT_DIM, opts.seed);
    let clock: Arc<dyn Clock> = if hermetic {
        Arc::new(VirtualClock::starting_at(0))
    } else {
        Arc::new(SystemClock)
    };
    let events: Arc<dyn EventSink> = Arc::new(ProgressSink { verbose: opts.verbose });
    let policy = RetryPolicy {
        base_delay_ms: opts.base_delay_ms,
        max_retries: opts.max_retries,
        seed: opts.seed,
    };

    // Build the model pool. Every provider id routes to the same backend:
    // the scripted mock, the deterministic offline engine, or live HTTP.
    let default_provider = if hermetic { "offline" } else { "openai" };
    let specs = if opts.models.is_empty() {
        default_model_specs(hermetic)
    } else {
        opts.models.clone()
    };
    let primary = handles_from_specs(&specs, default_provider);
    let backup = handles_from_specs(&opts.backup_models, default_provider);
    let mut pool = initialize_models(primary, backup).map_err(|e| usage(e.to_string()))?;

    let mut offline_backend: Option<Arc<OfflineBackend>> = None;
    if let Some(script) = &opts.mock_script {
        let mock = MockBackend::from_script_file(script)
            .with_context(|| format!("loading mock script {}", script.display()))?;
        pool.register_shared_backend(Arc::new(mock));
    } else if opts.offline {
        let backend = Arc::new(OfflineBackend::new(opts.system));
        pool.register_shared_backend(backend.clone());
        offline_backend = Some(backend);
    } else {
        pool.register_shared_backend(Arc::new(HttpBackend::new()));
    }
    let pool = Arc::new(pool);
    let started_ms = clock.now_ms();

    // Phase 1: classify the query and extract pipeline parameters.
    let mut analyzer = RetryingProvider::new(
        pool.clone(),
        policy.clone(),
        clock.clone(),
        events.clone(),
        Capability::General,
        "analyze",
    );
    let (analysis, plan) = analyze_query(&raw_query, &mut analyzer)?;
    note!("{}", analysis.digest());
    // The offline engine embeds the extracted parameters into the code it
    // emits; hand them over before any generation step runs.
    if let Some(backend) = &offline_backend {
        backend.set_parameters(analysis.parameters.clone());
    }

    // Phase 2 (optional): retrieve supporting documents for the reasoning
    // graph. The corpus is ingested fresh each run; indexes stay small.
    let mut rag_docs: Vec<String> = Vec::new();
    if opts.use_rag {
        let sources: Vec<String> =
            opts.corpus.iter().map(|p| p.to_string_lossy().into_owned()).collect();
        let cfg = IngestConfig::default();
        let ingest_policy = IngestPolicy { offline: hermetic, retry: policy.clone() };
        let ingestion = ingest(&sources, &cfg, &ingest_policy, &encoder)
            .map_err(|e| anyhow!("corpus ingestion: {e}"))?;
        for warning in &ingestion.report.warnings {
            note!("warning: {warning}");
        }
        let docs =
            retrieve_relevant_docs(&ingestion.index, &analysis.query, opts.system, opts.rag_k, &encoder)?;
        note!("retrieved {} supporting document(s)", docs.len());
        rag_docs = docs.into_iter().map(|d| d.content).collect();
    }

    // Phase 3: grow the thought hypergraph and pull a design out of it.
    let constraints = format!("Target system: {}", opts.system);
    let mut builder = RetryingProvider::new(
        pool.clone(),
        policy.clone(),
        clock.clone(),
        events.clone(),
        Capability::Planning,
        "construct",
    );
    let (graph, design) = construct(
        &analysis.query,
        &constraints,
        &rag_docs,
        &mut builder,
        encoder.clone(),
        &ConstructConfig::default(),
    )?;
    note!("reasoning graph: {} vertices, {} hyperedges", graph.vertex_count(), graph.hyperedges().count());

    // Phase 4: execute the plan, landing results in the bundle as they come.
    let bundle = ArtifactBundle::create(&opts.output_dir)?;
    clear_generated(&bundle)?;
    let store = MemoryStore::open(bundle.memory_path(), encoder.clone())?;
    if let Some(warning) = store.warning() {
        note!("warning: memory log {warning}");
    }
    if let Some(previous) = store.load(&analysis.query)? {
        note!("note: a similar query was answered before (response digest {})", previous.response_digest);
    }

    let runner = ModelStepRunner {
        pool: pool.clone(),
        policy: policy.clone(),
        clock: clock.clone(),
        events: events.clone(),
        query: analysis.query.clone(),
        parameters_json: serde_json::to_string_pretty(&analysis.parameters)?,
        design_summary: design.summary.clone(),
        language: opts.system.code_language().to_string(),
    };
    let sink = BundleSink { bundle: &bundle };
    let results = run_plan(&plan, &runner, opts.workers, clock.as_ref(), events.as_ref(), &sink)?;

    // Phase 5: artifacts. Code files come out of fenced blocks in the
    // code-producing steps; names are deduplicated across steps.
    let language = opts.system.code_language();
    let mut code_files: Vec<(String, String)> = Vec::new();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    for step in &plan.steps {
        if !step.action.produces_code() {
            continue;
        }
        let Some(result) = results.get(&step.id) else { continue };
        for (name, content) in extract_code_blocks(&result.content, Some(language), &step.id) {
            let name = if taken.contains(&name) { format!("{}-{name}", step.id) } else { name };
            taken.insert(name.clone());
            code_files.push((name, content));
        }
    }
    let saved_code = bundle.save_code_files(&code_files)?;
    bundle.save_graph(&graph)?;

    let response = synthesize_response(&plan, &graph, &results);
    bundle.write_response(&response)?;
    store.save(&analysis.query, &response, "graph.json", clock.now_ms())?;

    let finished_ms = clock.now_ms();
    let summary = SessionSummary::describe(
        &analysis.query,
        analysis.detection.intent,
        opts.system,
        &bundle,
        started_ms,
        finished_ms,
    )?;
    bundle.write_summary(&summary.render())?;
    bundle.verify_complete(plan.len())?;

    let degraded = results.values().filter(|r| r.fallback).count();
    out!("bundle: {}", bundle.root().display());
    out!("  steps: {} result file(s)", results.len());
    out!("  code: {} file(s)", saved_code.len());
    out!("  summary: {}", bundle.summary_path().display());
    if degraded > 0 {
        out!("  note: {degraded} step(s) used fallback results; review before deploying");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ingest

/// `.ext,.other` (dots optional) into the canonical dotted lowercase set.
fn parse_extensions(list: &str) -> anyhow::Result<BTreeSet<String>> {
    let mut set = BTreeSet::new();
    for part in list.split(',') {
        let part = part.trim().to_lowercase();
        if part.is_empty() {
            continue;
        }
        let dotted = if part.starts_with('.') { part } else { format!(".{part}") };
        set.insert(dotted);
    }
    if set.is_empty() {
        return Err(usage("--extensions must name at least one extension"));
    }
    Ok(set)
}

pub fn cmd_ingest(opts: &IngestOptions) -> anyhow::Result<()> {
    let mut cfg = IngestConfig::default();
    cfg.chunk_size = opts.chunk_size;
    cfg.max_file_size = opts.max_file_size;
    if let Some(list) = &opts.extensions {
        cfg.allowed_extensions = parse_extensions(list)?;
    }
    let policy = IngestPolicy {
        offline: !opts.online,
        retry: RetryPolicy { seed: opts.seed, ..RetryPolicy::default() },
    };
    let encoder = Encoder::deterministic(DEFAULT_DIM, opts.seed);

    let ingestion = ingest(&opts.sources, &cfg, &policy, &encoder).map_err(|e| match e {
        e @ pipeforge_core::knowledge::IngestError::NoSources => usage(e.to_string()),
        e @ pipeforge_core::knowledge::IngestError::Config(_) => usage(e.to_string()),
    })?;
    let report = &ingestion.report;

    out!(
        "files seen: {}, ingested: {}, chunks: {}",
        report.files_seen,
        report.files_ingested,
        ingestion.index.len()
    );
    if !report.skipped.is_empty() {
        out!("skipped {} file(s):", report.skipped.len());
        for skip in &report.skipped {
            out!("  {}: {}", skip.path, skip.reason);
        }
    }
    for warning in &report.warnings {
        note!("warning: {warning}");
    }

    if let Some(out) = &opts.out {
        ingestion.index.save(out)?;
        out!("index written to {}", out.display());
    }

    // Partial trouble (one bad source among several, some skipped files) is
    // reported but not fatal. A run that produced nothing at all is.
    if !report.warnings.is_empty() && ingestion.index.is_empty() {
        return Err(anyhow!("no sources could be ingested"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// score

fn kind_name(kind: CheckKind) -> &'static str {
    match kind {
        CheckKind::Syntax => "syntax",
        CheckKind::Logic => "logic",
        CheckKind::Runtime => "runtime",
    }
}

/// A fixed count beats a command when both are given for the same kind;
/// neither leaves the kind unchecked and the score incomplete.
fn checker_for(
    kind: CheckKind,
    count: Option<u32>,
    command: &Option<String>,
) -> Option<Box<dyn Checker>> {
    if let Some(n) = count {
        return Some(Box::new(StubChecker::new(kind, n)));
    }
    command.as_ref().map(|cmd| {
        // The shell wrapper makes the code file path available as $1.
        Box::new(CommandChecker {
            kind,
            program: "sh".into(),
            args: vec!["-c".into(), cmd.clone(), "pipeforge-checker".into()],
        }) as Box<dyn Checker>
    })
}

pub fn cmd_score(opts: &ScoreOptions) -> anyhow::Result<()> {
    if !opts.bundle.is_dir() {
        return Err(anyhow!("bundle directory not found: {}", opts.bundle.display()));
    }
    let bundle = ArtifactBundle::create(&opts.bundle)?;

    let checkers: Vec<Box<dyn Checker>> = [
        checker_for(CheckKind::Syntax, opts.syntax, &opts.syntax_cmd),
        checker_for(CheckKind::Logic, opts.logic, &opts.logic_cmd),
        checker_for(CheckKind::Runtime, opts.runtime, &opts.runtime_cmd),
    ]
    .into_iter()
    .flatten()
    .collect();
    let refs: Vec<&dyn Checker> = checkers.iter().map(|c| c.as_ref()).collect();
    let report = check(&bundle, &refs)?;

    let missing = report.missing_kinds();
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|k| kind_name(*k)).collect();
        if opts.json {
            out!("{}", serde_json::json!({ "missing": names }));
        } else {
            out!("EFS: incomplete (missing: {})", names.join(", "));
        }
        return Ok(());
    }

    if opts.json {
        let counts = report.counts().expect("all kinds present");
        let score =
            PipelineScore::new(opts.label.clone(), opts.system, opts.complexity.clone(), counts);
        let efs_report = EfsReport::from_pipelines(vec![score]);
        out!("{}", efs_report.to_json());
        return Ok(());
    }

    print_outcome(CheckKind::Syntax, &report.syntax);
    print_outcome(CheckKind::Logic, &report.logic);
    print_outcome(CheckKind::Runtime, &report.runtime);
    let score = report.score().expect("all kinds present");
    out!("EFS: {score:.2}");
    Ok(())
}

fn print_outcome(kind: CheckKind, outcome: &Option<pipeforge_core::efs::CheckOutcome>) {
    let Some(outcome) = outcome else { return };
    out!("{} errors: {}", kind_name(kind), outcome.count);
    for line in &outcome.diagnostics {
        out!("  {line}");
    }
}
