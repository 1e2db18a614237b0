//! Error-free scoring for generated pipelines.
//!
//! A pipeline's quality is summarized from three error counts — syntax,
//! logic, runtime — folded into a single score in (0, 1]:
//!
//! ```text
//! score = (1/(1+S) + 1/(1+L) + 1/(1+R)) / 3
//! ```
//!
//! A clean pipeline scores exactly 1 and every additional error of any kind
//! strictly lowers the score. Counts come from pluggable checkers: stubs
//! inject known counts for hermetic tests, command checkers wrap real
//! compilers and test runners for integration use.

use crate::artifacts::ArtifactBundle;
use crate::spe::TargetSystem;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::process::Command;

/// Error tallies for one pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub syntax: u32,
    pub logic: u32,
    pub runtime: u32,
}

impl ErrorCounts {
    pub fn new(syntax: u32, logic: u32, runtime: u32) -> Self {
        ErrorCounts { syntax, logic, runtime }
    }
}

/// The score itself. 1 means error-free; more errors of any kind push it
/// toward (but never onto) zero.
pub fn efs(counts: &ErrorCounts) -> f64 {
    let term = |n: u32| 1.0 / (1.0 + f64::from(n));
    (term(counts.syntax) + term(counts.logic) + term(counts.runtime)) / 3.0
}

/// Arithmetic mean of a score group; `None` when the group is empty.
pub fn aggregate(scores: &[f64]) -> Option<f64> {
    if scores.is_empty() {
        return None;
    }
    Some(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Round to two decimals and drop trailing zeros, so 1.0 prints as `1`,
/// 0.70 as `0.7`, and 0.98 stays `0.98`.
pub fn display_score(score: f64) -> String {
    let rounded = format!("{score:.2}");
    let trimmed = rounded.trim_end_matches('0').trim_end_matches('.');
    if trimmed.is_empty() {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

/// One graded pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineScore {
    pub label: String,
    pub system: TargetSystem,
    /// Grouping key for averages (e.g. `simple`, `medium`, `complex`).
    pub complexity: String,
    pub counts: ErrorCounts,
    pub score: f64,
}

impl PipelineScore {
    pub fn new(label: impl Into<String>, system: TargetSystem, complexity: impl Into<String>, counts: ErrorCounts) -> Self {
        let score = efs(&counts);
        PipelineScore { label: label.into(), system, complexity: complexity.into(), counts, score }
    }
}

/// Scores for a benchmark run plus per-complexity averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfsReport {
    pub pipelines: Vec<PipelineScore>,
    /// complexity → mean score. Groups with no pipelines are absent.
    pub averages: BTreeMap<String, f64>,
}

impl EfsReport {
    pub fn from_pipelines(pipelines: Vec<PipelineScore>) -> Self {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for p in &pipelines {
            groups.entry(p.complexity.clone()).or_default().push(p.score);
        }
        let averages = groups
            .into_iter()
            .filter_map(|(k, scores)| aggregate(&scores).map(|m| (k, m)))
            .collect();
        EfsReport { pipelines, averages }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// Aligned text table: one row per pipeline, then one average row per
    /// complexity group.
    pub fn render_table(&self) -> String {
        let mut rows: Vec<[String; 7]> = vec![[
            "Label".into(),
            "System".into(),
            "Complexity".into(),
            "S".into(),
            "L".into(),
            "R".into(),
            "EFS".into(),
        ]];
        for p in &self.pipelines {
            rows.push([
                p.label.clone(),
                p.system.name().to_string(),
                p.complexity.clone(),
                p.counts.syntax.to_string(),
                p.counts.logic.to_string(),
                p.counts.runtime.to_string(),
                display_score(p.score),
            ]);
        }
        for (complexity, mean) in &self.averages {
            rows.push([
                format!("Average ({complexity})"),
                "-".into(),
                complexity.clone(),
                "-".into(),
                "-".into(),
                "-".into(),
                display_score(*mean),
            ]);
        }
        let widths: Vec<usize> =
            (0..7).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (n, row) in rows.iter().enumerate() {
            let line: Vec<String> =
                row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if n == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                out.push_str(&rule.join("  "));
                out.push('\n');
            }
        }
        out
    }
}

/// Which error class a checker reports on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Syntax,
    Logic,
    Runtime,
}

/// What one checker found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub count: u32,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    #[error("checker command failed to launch: {0}")]
    Spawn(std::io::Error),
    #[error("reading bundle: {0}")]
    Bundle(#[from] crate::artifacts::BundleError),
}

/// A source of error counts for one kind.
pub trait Checker {
    fn kind(&self) -> CheckKind;
    fn check(&self, bundle: &ArtifactBundle) -> Result<CheckOutcome, CheckError>;
}

/// Injects fixed counts; keeps the test suite hermetic.
#[derive(Debug, Clone)]
pub struct StubChecker {
    pub kind: CheckKind,
    pub count: u32,
    pub diagnostics: Vec<String>,
}

impl StubChecker {
    pub fn new(kind: CheckKind, count: u32) -> Self {
        StubChecker { kind, count, diagnostics: Vec::new() }
    }
}

impl Checker for StubChecker {
    fn kind(&self) -> CheckKind {
        self.kind
    }

    fn check(&self, _bundle: &ArtifactBundle) -> Result<CheckOutcome, CheckError> {
        Ok(CheckOutcome { count: self.count, diagnostics: self.diagnostics.clone() })
    }
}

/// Wraps an external tool, invoked once per code file with the file path as
/// the final argument.
///
/// Counting depends on the kind: syntax counts `error`-marked diagnostic
/// lines (at least one per failing file), logic counts `fail`-marked lines
/// the same way, and runtime counts files whose run exits nonzero. This is
/// deliberately tool-agnostic; wire a real compiler or test runner in via
/// `program`/`args`.
#[derive(Debug, Clone)]
pub struct CommandChecker {
    pub kind: CheckKind,
    pub program: String,
    pub args: Vec<String>,
}

impl Checker for CommandChecker {
    fn kind(&self) -> CheckKind {
        self.kind
    }

    fn check(&self, bundle: &ArtifactBundle) -> Result<CheckOutcome, CheckError> {
        let files = bundle.manifest()?.code_files;
        let mut count = 0u32;
        let mut diagnostics = Vec::new();
        for file in files {
            let output = Command::new(&self.program)
                .args(&self.args)
                .arg(&file)
                .output()
                .map_err(CheckError::Spawn)?;
            let failed = !output.status.success();
            let text = format!(
                "{}{}",
                String::from_utf8_lossy(&output.stdout),
                String::from_utf8_lossy(&output.stderr)
            );
            let marker = match self.kind {
                CheckKind::Syntax => "error",
                CheckKind::Logic => "fail",
                CheckKind::Runtime => "",
            };
            match self.kind {
                CheckKind::Runtime => {
                    if failed {
                        count += 1;
                        diagnostics.push(format!("{}: exit {:?}", file.display(), output.status.code()));
                    }
                }
                _ => {
                    let mut matched = 0u32;
                    for line in text.lines() {
                        if line.to_lowercase().contains(marker) {
                            matched += 1;
                            diagnostics.push(format!("{}: {}", file.display(), line.trim()));
                        }
                    }
                    if matched == 0 && failed {
                        matched = 1;
                        diagnostics.push(format!("{}: exit {:?}", file.display(), output.status.code()));
                    }
                    count += matched;
                }
            }
        }
        Ok(CheckOutcome { count, diagnostics })
    }
}

/// Everything the configured checkers found, by kind. Kinds with no checker
/// stay absent and block scoring.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckReport {
    pub syntax: Option<CheckOutcome>,
    pub logic: Option<CheckOutcome>,
    pub runtime: Option<CheckOutcome>,
}

impl CheckReport {
    /// Counts are available only when all three kinds were checked.
    pub fn counts(&self) -> Option<ErrorCounts> {
        Some(ErrorCounts {
            syntax: self.syntax.as_ref()?.count,
            logic: self.logic.as_ref()?.count,
            runtime: self.runtime.as_ref()?.count,
        })
    }

    pub fn score(&self) -> Option<f64> {
        self.counts().map(|c| efs(&c))
    }

    pub fn missing_kinds(&self) -> Vec<CheckKind> {
        let mut missing = Vec::new();
        if self.syntax.is_none() {
            missing.push(CheckKind::Syntax);
        }
        if self.logic.is_none() {
            missing.push(CheckKind::Logic);
        }
        if self.runtime.is_none() {
            missing.push(CheckKind::Runtime);
        }
        missing
    }
}

/// Run every adapter against the bundle and fold the outcomes per kind.
/// Several adapters of one kind sum their counts.
pub fn check(bundle: &ArtifactBundle, adapters: &[&dyn Checker]) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::default();
    for adapter in adapters {
        let outcome = adapter.check(bundle)?;
        let slot = match adapter.kind() {
            CheckKind::Syntax => &mut report.syntax,
            CheckKind::Logic => &mut report.logic,
            CheckKind::Runtime => &mut report.runtime,
        };
        match slot {
            Some(existing) => {
                existing.count += outcome.count;
                existing.diagnostics.extend(outcome.diagnostics);
            }
            None => *slot = Some(outcome),
        }
    }
    Ok(report)
}
