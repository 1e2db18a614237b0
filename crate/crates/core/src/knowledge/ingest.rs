//! Corpus ingestion: walk local directories (or clones of remote
//! repositories), chunk and checksum every eligible file, and build the
//! retrieval index.
//!
//! The walk never aborts on a bad file. Anything unreadable, oversized, or
//! not valid UTF-8 lands in the skip log with a reason and ingestion moves
//! on, so a corrupted corpus degrades instead of failing.

use super::chunk::{chunk_text, component_tag, spe_version, systems_for};
use super::{checksum_file, DocumentChunk, IngestConfig, KnowledgeIndex};
use crate::embeddings::Encoder;
use crate::executor::{backoff_delay_ms, step_rng, Clock, RetryPolicy, SystemClock};
use crate::spe::TargetSystem;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use walkdir::WalkDir;

/// How ingestion treats the outside world.
#[derive(Debug, Clone)]
pub struct IngestPolicy {
    /// Refuse remote sources entirely. On by default: a corpus on disk is
    /// the normal case and keeps runs reproducible.
    pub offline: bool,
    /// Backoff schedule for remote clone attempts.
    pub retry: RetryPolicy,
}

impl Default for IngestPolicy {
    fn default() -> Self {
        IngestPolicy { offline: true, retry: RetryPolicy::default() }
    }
}

/// One file that was passed over, and why.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SkipEntry {
    pub path: String,
    pub reason: String,
}

/// What ingestion did, alongside the index it built.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    /// Files that matched the extension filter and were attempted.
    pub files_seen: usize,
    /// Files that contributed chunks (or were empty but readable).
    pub files_ingested: usize,
    pub skipped: Vec<SkipEntry>,
    /// Source-level problems: missing paths, refused or failed remotes.
    pub warnings: Vec<String>,
}

/// Index plus the log of how it was built.
#[derive(Debug, Clone)]
pub struct Ingestion {
    pub index: KnowledgeIndex,
    pub report: IngestReport,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("no sources given")]
    NoSources,
    #[error("bad ingest configuration: {0}")]
    Config(String),
}

fn is_remote(source: &str) -> bool {
    source.starts_with("http://")
        || source.starts_with("https://")
        || source.starts_with("ssh://")
        || source.starts_with("git@")
}

/// Clone a repository with `git`, retrying with jittered exponential backoff.
fn clone_with_backoff(url: &str, dest: &Path, policy: &IngestPolicy, clock: &dyn Clock) -> Result<(), String> {
    let mut rng = step_rng(policy.retry.seed, url);
    let mut last_error = String::new();
    for attempt in 0..policy.retry.max_retries {
        let output = Command::new("git")
            .args(["clone", "--depth", "1"])
            .arg(url)
            .arg(dest)
            .output();
        match output {
            Ok(out) if out.status.success() => return Ok(()),
            Ok(out) => last_error = String::from_utf8_lossy(&out.stderr).trim().to_string(),
            Err(e) => last_error = e.to_string(),
        }
        // Leftovers from a failed attempt would make the retry fail too.
        let _ = std::fs::remove_dir_all(dest);
        clock.sleep(backoff_delay_ms(policy.retry.base_delay_ms, attempt, &mut rng));
    }
    Err(format!("clone failed after {} attempts: {last_error}", policy.retry.max_retries))
}

/// Walk every source, chunk and index what qualifies, and report the rest.
///
/// Sources are local files, local directories, or (when the policy allows)
/// git URLs. A source that cannot be used at all becomes a warning, never an
/// error: the worst case is an empty index.
pub fn ingest(
    sources: &[String],
    cfg: &IngestConfig,
    policy: &IngestPolicy,
    encoder: &Encoder,
) -> Result<Ingestion, IngestError> {
    cfg.validate().map_err(IngestError::Config)?;
    if sources.is_empty() {
        return Err(IngestError::NoSources);
    }

    let clock = SystemClock;
    let mut chunks: Vec<DocumentChunk> = Vec::new();
    let mut by_system: BTreeMap<TargetSystem, Vec<usize>> = BTreeMap::new();
    let mut report = IngestReport::default();
    let mut clone_dirs: Vec<PathBuf> = Vec::new();

    for (n, source) in sources.iter().enumerate() {
        let root: PathBuf = if is_remote(source) {
            if policy.offline {
                report.warnings.push(format!("offline mode, remote source refused: {source}"));
                continue;
            }
            let dest = std::env::temp_dir().join(format!("pipeforge-clone-{}-{n}", std::process::id()));
            match clone_with_backoff(source, &dest, policy, &clock) {
                Ok(()) => {
                    clone_dirs.push(dest.clone());
                    dest
                }
                Err(e) => {
                    report.warnings.push(format!("remote source {source}: {e}"));
                    continue;
                }
            }
        } else {
            let p = PathBuf::from(source);
            if !p.exists() {
                report.warnings.push(format!("source path does not exist: {source}"));
                continue;
            }
            p
        };

        ingest_tree(&root, cfg, encoder, &mut chunks, &mut by_system, &mut report);
    }

    for dir in clone_dirs {
        let _ = std::fs::remove_dir_all(dir);
    }

    let index = KnowledgeIndex::from_parts(chunks, by_system).expect("index built with valid ids");
    Ok(Ingestion { index, report })
}

/// Walk one source root in deterministic (name-sorted) order.
fn ingest_tree(
    root: &Path,
    cfg: &IngestConfig,
    encoder: &Encoder,
    chunks: &mut Vec<DocumentChunk>,
    by_system: &mut BTreeMap<TargetSystem, Vec<usize>>,
    report: &mut IngestReport,
) {
    let walker = WalkDir::new(root).follow_links(true).sort_by_file_name();
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            // Unreadable directories and dangling symlinks surface here.
            Err(e) => {
                let path = e.path().map(|p| display_path(root, p)).unwrap_or_default();
                report.skipped.push(SkipEntry { path, reason: format!("unreadable: {e}") });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = display_path(root, entry.path());
        if !extension_allowed(entry.path(), cfg) {
            continue;
        }
        report.files_seen += 1;

        let size = match entry.metadata() {
            Ok(m) => m.len(),
            Err(e) => {
                report.skipped.push(SkipEntry { path: rel, reason: format!("unreadable: {e}") });
                continue;
            }
        };
        if size > cfg.max_file_size {
            report.skipped.push(SkipEntry {
                path: rel,
                reason: format!("exceeds max file size ({size} > {} bytes)", cfg.max_file_size),
            });
            continue;
        }
        let bytes = match std::fs::read(entry.path()) {
            Ok(b) => b,
            Err(e) => {
                report.skipped.push(SkipEntry { path: rel, reason: format!("unreadable: {e}") });
                continue;
            }
        };
        let checksum = checksum_file(&bytes);
        let content = match String::from_utf8(bytes) {
            Ok(c) => c,
            Err(_) => {
                report.skipped.push(SkipEntry { path: rel, reason: "not valid UTF-8".into() });
                continue;
            }
        };

        let tag = component_tag(&rel, &content);
        let version = spe_version(&rel);
        let configured: Vec<TargetSystem> = cfg.target_systems.iter().copied().collect();
        let systems = systems_for(&rel, &content, &configured);
        for piece in chunk_text(&content, cfg.chunk_size) {
            let embedding = match encoder.encode(&piece) {
                Ok(v) => v,
                Err(e) => {
                    report.skipped.push(SkipEntry { path: rel.clone(), reason: format!("embedding failed: {e}") });
                    continue;
                }
            };
            let id = chunks.len();
            chunks.push(DocumentChunk {
                id,
                content: piece,
                source_path: rel.clone(),
                component_tag: tag,
                spe_version: version.clone(),
                checksum: checksum.clone(),
                embedding,
            });
            for s in &systems {
                by_system.entry(*s).or_default().push(id);
            }
        }
        report.files_ingested += 1;
    }
}

/// Paths in chunks and logs are relative to their source root so an index is
/// stable across machines and temp directories.
fn display_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let s = if rel.as_os_str().is_empty() {
        root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| root.display().to_string())
    } else {
        rel.to_string_lossy().into_owned()
    };
    s.replace('\\', "/")
}

fn extension_allowed(path: &Path, cfg: &IngestConfig) -> bool {
    match path.extension() {
        Some(ext) => {
            let dotted = format!(".{}", ext.to_string_lossy().to_lowercase());
            cfg.allowed_extensions.contains(&dotted)
        }
        None => false,
    }
}
