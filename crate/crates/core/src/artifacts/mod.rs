//! On-disk artifact bundles: everything a session produces, laid out so
//! tests and users can address each piece by path.
//!
//! A bundle is one directory:
//!
//! ```text
//! <root>/
//!   steps/<step_id>.json   one canonical-JSON record per executed step
//!   code/<name>            source files extracted from model replies
//!   graph.json             the reasoning hypergraph
//!   summary.md             session summary
//!   response.md            the synthesized user-facing response
//!   memory.jsonl           interaction memory (append-only)
//! ```
//!
//! Step records are written as canonical JSON — object keys sorted, UTF-8,
//! newline-terminated — so writing the same record twice yields identical
//! bytes.

mod extract;
mod memory;
mod synth;

pub use extract::{extract_code_blocks, fence_blocks, FencedBlock};
pub use memory::{MemoryError, MemoryRecord, MemoryStore, MEMORY_MATCH_THRESHOLD};
pub use synth::{synthesize_response, DEGRADED_MARKER};

use crate::executor::StepResult;
use crate::hgot::ThoughtHypergraph;
use crate::query::Intent;
use crate::spe::TargetSystem;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("bundle i/o at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("encoding record: {0}")]
    Encode(#[from] serde_json::Error),
    #[error("bundle is incomplete: {0}")]
    Incomplete(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io { path: path.to_path_buf(), source }
}

/// A session's output directory.
#[derive(Debug, Clone)]
pub struct ArtifactBundle {
    root: PathBuf,
}

impl ArtifactBundle {
    /// Create the bundle skeleton (idempotent).
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, BundleError> {
        let root = root.into();
        for dir in [root.clone(), root.join("steps"), root.join("code")] {
            std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(ArtifactBundle { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn steps_dir(&self) -> PathBuf {
        self.root.join("steps")
    }

    pub fn code_dir(&self) -> PathBuf {
        self.root.join("code")
    }

    pub fn graph_path(&self) -> PathBuf {
        self.root.join("graph.json")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.root.join("summary.md")
    }

    pub fn response_path(&self) -> PathBuf {
        self.root.join("response.md")
    }

    pub fn memory_path(&self) -> PathBuf {
        self.root.join("memory.jsonl")
    }

    /// Write one step's record as canonical JSON under `steps/<id>.json`.
    pub fn save_step_result(&self, result: &StepResult) -> Result<PathBuf, BundleError> {
        let path = self.steps_dir().join(format!("{}.json", result.step_id));
        let text = canonical_json(result)?;
        std::fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }

    /// Read one step record back.
    pub fn load_step_result(&self, step_id: &str) -> Result<StepResult, BundleError> {
        let path = self.steps_dir().join(format!("{step_id}.json"));
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Persist the reasoning graph.
    pub fn save_graph(&self, graph: &ThoughtHypergraph) -> Result<PathBuf, BundleError> {
        let path = self.graph_path();
        std::fs::write(&path, graph.to_json()).map_err(io_err(&path))?;
        Ok(path)
    }

    /// Write extracted code files under `code/`.
    pub fn save_code_files(&self, files: &[(String, String)]) -> Result<Vec<PathBuf>, BundleError> {
        let mut written = Vec::with_capacity(files.len());
        for (name, content) in files {
            let path = self.code_dir().join(name);
            std::fs::write(&path, content).map_err(io_err(&path))?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn write_summary(&self, text: &str) -> Result<PathBuf, BundleError> {
        let path = self.summary_path();
        std::fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn write_response(&self, text: &str) -> Result<PathBuf, BundleError> {
        let path = self.response_path();
        std::fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }

    /// List what the bundle holds, verifying completeness for a plan of
    /// `plan_len` steps: every step file, the graph, and the summary.
    pub fn verify_complete(&self, plan_len: usize) -> Result<BundleManifest, BundleError> {
        let manifest = self.manifest()?;
        if manifest.step_files.len() != plan_len {
            return Err(BundleError::Incomplete(format!(
                "expected {plan_len} step files, found {}",
                manifest.step_files.len()
            )));
        }
        if !self.graph_path().is_file() {
            return Err(BundleError::Incomplete("graph.json missing".into()));
        }
        if !self.summary_path().is_file() {
            return Err(BundleError::Incomplete("summary.md missing".into()));
        }
        Ok(manifest)
    }

    /// Enumerate the bundle's files (sorted, relative order stable).
    pub fn manifest(&self) -> Result<BundleManifest, BundleError> {
        let list_dir = |dir: PathBuf| -> Result<Vec<PathBuf>, BundleError> {
            if !dir.is_dir() {
                return Ok(Vec::new());
            }
            let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(io_err(&dir))?
                .filter_map(|e| e.ok())
                .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
                .map(|e| e.path())
                .collect();
            names.sort();
            Ok(names)
        };
        Ok(BundleManifest {
            step_files: list_dir(self.steps_dir())?,
            code_files: list_dir(self.code_dir())?,
            graph_file: self.graph_path().is_file().then(|| self.graph_path()),
            summary_file: self.summary_path().is_file().then(|| self.summary_path()),
            response_file: self.response_path().is_file().then(|| self.response_path()),
            memory_file: self.memory_path().is_file().then(|| self.memory_path()),
        })
    }
}

/// What a bundle contains on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleManifest {
    pub step_files: Vec<PathBuf>,
    pub code_files: Vec<PathBuf>,
    pub graph_file: Option<PathBuf>,
    pub summary_file: Option<PathBuf>,
    pub response_file: Option<PathBuf>,
    pub memory_file: Option<PathBuf>,
}

/// Serialize any record with sorted object keys, newline-terminated.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    // serde_json's default Map keeps keys in sorted order, so a pass
    // through Value canonicalises field order.
    let value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

/// The human-readable session summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub query: String,
    pub intent: Intent,
    pub system: TargetSystem,
    /// Bundle-relative artifact path → what it is for.
    pub artifacts: BTreeMap<String, String>,
    pub started_ms: u64,
    pub finished_ms: u64,
}

impl SessionSummary {
    /// Describe a finished bundle. Purposes are fixed per slot; code files
    /// are listed individually.
    pub fn describe(
        query: &str,
        intent: Intent,
        system: TargetSystem,
        bundle: &ArtifactBundle,
        started_ms: u64,
        finished_ms: u64,
    ) -> Result<Self, BundleError> {
        let manifest = bundle.manifest()?;
        let relative = |p: &Path| {
            p.strip_prefix(bundle.root()).unwrap_or(p).to_string_lossy().replace('\\', "/")
        };
        let mut artifacts = BTreeMap::new();
        for p in &manifest.step_files {
            artifacts.insert(relative(p), "step execution record".to_string());
        }
        for p in &manifest.code_files {
            artifacts.insert(relative(p), "generated source file".to_string());
        }
        if let Some(p) = &manifest.graph_file {
            artifacts.insert(relative(p), "reasoning hypergraph".to_string());
        }
        if let Some(p) = &manifest.response_file {
            artifacts.insert(relative(p), "synthesized response".to_string());
        }
        if let Some(p) = &manifest.memory_file {
            artifacts.insert(relative(p), "interaction memory".to_string());
        }
        Ok(SessionSummary {
            query: query.to_string(),
            intent,
            system,
            artifacts,
            started_ms,
            finished_ms,
        })
    }

    /// Every artifact named in the summary exists under the bundle root.
    pub fn verify_against(&self, bundle: &ArtifactBundle) -> Result<(), BundleError> {
        for name in self.artifacts.keys() {
            if !bundle.root().join(name).is_file() {
                return Err(BundleError::Incomplete(format!("summary names missing artifact {name}")));
            }
        }
        Ok(())
    }

    /// Render as markdown for `summary.md`. Deterministic for fixed inputs.
    pub fn render(&self) -> String {
        let mut doc = String::new();
        doc.push_str("# Session summary\n\n");
        doc.push_str(&format!("- Query: {}\n", self.query));
        doc.push_str(&format!("- Intent: {}\n", self.intent));
        doc.push_str(&format!("- Target system: {}\n", self.system));
        doc.push_str(&format!("- Started at: {} ms\n", self.started_ms));
        doc.push_str(&format!("- Finished at: {} ms\n", self.finished_ms));
        doc.push_str("\n## Artifacts\n\n");
        for (name, purpose) in &self.artifacts {
            doc.push_str(&format!("- `{name}` — {purpose}\n"));
        }
        doc
    }
}
