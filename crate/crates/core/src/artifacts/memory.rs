//! Interaction memory: an append-only JSON-lines store of past sessions.
//!
//! Each record keeps the query (and its embedding), a digest of the final
//! response, and a pointer to the session's graph file. Lookup embeds the
//! incoming query and returns the newest record whose stored embedding is
//! close enough — one store serves both recent-session recall and
//! long-horizon reuse. A store that fails to parse is set aside as
//! `<name>.corrupt` and replaced with an empty one; memory is an
//! optimisation, never worth failing a session over.

use crate::embeddings::{cosine, EmbeddingVector, Encoder};
use crate::knowledge::checksum_file;
use serde::{Deserialize, Serialize};
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Minimum query-embedding similarity for a stored record to count as a
/// match.
pub const MEMORY_MATCH_THRESHOLD: f64 = 0.9;

/// One remembered session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub query: String,
    /// SHA-256 of the final response text.
    pub response_digest: String,
    /// Where the session's graph file lives, relative to its bundle.
    pub graph_ref: String,
    pub created_at_ms: u64,
    pub query_embedding: EmbeddingVector,
}

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("memory store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding the query failed: {0}")]
    Embedding(#[from] crate::embeddings::EncodeError),
}

/// Append-only store backed by one JSON-lines file.
pub struct MemoryStore {
    path: PathBuf,
    encoder: Encoder,
    warning: Option<String>,
}

impl MemoryStore {
    /// Open (or create) the store at `path`.
    ///
    /// An existing file that does not parse line-for-line is renamed to
    /// `<path>.corrupt` and the store starts empty; the warning explains
    /// what happened.
    pub fn open(path: impl Into<PathBuf>, encoder: Encoder) -> Result<Self, MemoryError> {
        let path = path.into();
        let mut warning = None;
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            let bad_line = text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .find(|(_, l)| serde_json::from_str::<MemoryRecord>(l).is_err());
            if let Some((n, _)) = bad_line {
                let quarantine = path.with_extension("jsonl.corrupt");
                std::fs::rename(&path, &quarantine)?;
                warning = Some(format!(
                    "memory store was corrupt at line {}; moved to {} and rebuilt empty",
                    n + 1,
                    quarantine.display()
                ));
            }
        }
        Ok(MemoryStore { path, encoder, warning })
    }

    /// Set when `open` had to quarantine a corrupt file.
    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Append one record. Records are immutable once written.
    pub fn save(
        &self,
        query: &str,
        final_response: &str,
        graph_ref: &str,
        now_ms: u64,
    ) -> Result<MemoryRecord, MemoryError> {
        let record = MemoryRecord {
            query: query.to_string(),
            response_digest: checksum_file(final_response.as_bytes()),
            graph_ref: graph_ref.to_string(),
            created_at_ms: now_ms,
            query_embedding: self.encoder.encode(query)?,
        };
        let mut line = serde_json::to_string(&record).expect("memory records serialize");
        line.push('\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(line.as_bytes())?;
        Ok(record)
    }

    /// Every stored record, oldest first. Unparseable lines written behind
    /// our back are skipped.
    pub fn records(&self) -> Result<Vec<MemoryRecord>, MemoryError> {
        if !self.path.exists() {
            return Ok(Vec::new());
        }
        let text = std::fs::read_to_string(&self.path)?;
        Ok(text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .filter_map(|l| serde_json::from_str(l).ok())
            .collect())
    }

    /// The newest record similar enough to `query`, if any.
    pub fn load(&self, query: &str) -> Result<Option<MemoryRecord>, MemoryError> {
        let needle = self.encoder.encode(query)?;
        let records = self.records()?;
        Ok(records
            .into_iter()
            .rev()
            .find(|r| cosine(&needle, &r.query_embedding) >= MEMORY_MATCH_THRESHOLD))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::DEFAULT_DIM;

    fn encoder() -> Encoder {
        Encoder::deterministic(DEFAULT_DIM, 7)
    }

    fn store_in(dir: &Path) -> MemoryStore {
        MemoryStore::open(dir.join("memory.jsonl"), encoder()).unwrap()
    }

    #[test]
    fn load_on_an_empty_store_finds_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let store = store_in(dir.path());
        assert!(store.load("anything at all").unwrap().is_none());
    }

    #[test]
    fn save_then_load_same_query_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let store = store_in(dir.path());
        let saved = store.save("count words from kafka", "the response", "graph.json", 1000).unwrap();
        let found = store.load("count words from kafka").unwrap().expect("exact query matches itself");
        assert_eq!(found, saved);
        assert_eq!(found.response_digest, checksum_file(b"the response"));
    }

    #[test]
    fn two_saves_load_the_newer_record() {
        let dir = tempfile::tempdir().unwrap();
        let store = store_in(dir.path());
        store.save("count words from kafka", "first answer", "a/graph.json", 1).unwrap();
        store.save("count words from kafka", "second answer", "b/graph.json", 2).unwrap();
        let found = store.load("count words from kafka").unwrap().unwrap();
        assert_eq!(found.graph_ref, "b/graph.json");
        assert_eq!(found.created_at_ms, 2);
    }

    #[test]
    fn dissimilar_queries_do_not_match() {
        let dir = tempfile::tempdir().unwrap();
        let store = store_in(dir.path());
        store.save("count words from kafka topics", "answer", "graph.json", 1).unwrap();
        assert!(store.load("deploy a storm cluster to production").unwrap().is_none());
    }

    #[test]
    fn corrupt_stores_are_quarantined_and_rebuilt_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("memory.jsonl");
        std::fs::write(&path, "this is not json\n").unwrap();

        let store = MemoryStore::open(&path, encoder()).unwrap();
        assert!(store.warning().unwrap().contains("line 1"));
        assert!(store.records().unwrap().is_empty());
        assert!(dir.path().join("memory.jsonl.corrupt").exists());

        // The rebuilt store works normally.
        store.save("q", "r", "g", 0).unwrap();
        assert_eq!(store.records().unwrap().len(), 1);
        let reopened = MemoryStore::open(&path, encoder()).unwrap();
        assert!(reopened.warning().is_none());
    }

    #[test]
    fn records_come_back_oldest_first() {
        let dir = tempfile::tempdir().unwrap();
        let store = store_in(dir.path());
        store.save("first", "a", "g", 1).unwrap();
        store.save("second", "b", "g", 2).unwrap();
        let records = store.records().unwrap();
        assert_eq!(records[0].query, "first");
        assert_eq!(records[1].query, "second");
    }
}
