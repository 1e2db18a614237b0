//! Retrieval knowledge base: ingested reference material, integrity
//! checksums, and the lookup that turns a query into rag vertices.
//!
//! An index is built once (see [`ingest`]), persisted as JSON next to a
//! fingerprint of its contents, and queried read-only afterwards. Retrieval
//! ranks chunks for one target system by embedding similarity; the winners
//! are attached to a thought hypergraph as rag vertices feeding the seed
//! pair.

mod chunk;
mod ingest;

pub use chunk::{chunk_text, component_tag, spe_version, systems_for, ComponentTag};
pub use ingest::{ingest, IngestError, IngestPolicy, IngestReport, Ingestion, SkipEntry};

use crate::embeddings::{cosine, EmbeddingVector, EncodeError, Encoder};
use crate::hgot::{hyperedge_weight, GraphError, RelationLabel, RelevanceTable, ThoughtHypergraph, VertexId, VertexType};
use crate::spe::TargetSystem;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// What ingestion accepts and how it cuts files up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Files larger than this many bytes are skipped (and logged).
    pub max_file_size: u64,
    /// Maximum characters per chunk.
    pub chunk_size: usize,
    /// Dotted, lowercase extensions that qualify for ingestion.
    pub allowed_extensions: BTreeSet<String>,
    /// Engines the index serves; files naming none of them index under all.
    pub target_systems: BTreeSet<TargetSystem>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            max_file_size: 1024 * 1024,
            chunk_size: 2000,
            allowed_extensions: [".java", ".scala", ".py", ".md", ".xml", ".yaml"]
                .into_iter()
                .map(String::from)
                .collect(),
            target_systems: TargetSystem::ALL.into_iter().collect(),
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.chunk_size == 0 {
            return Err("chunk_size must be positive".into());
        }
        if self.max_file_size == 0 {
            return Err("max_file_size must be positive".into());
        }
        Ok(())
    }
}

/// One indexed piece of one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentChunk {
    /// Position in the index's chunk list; retrieval ties break on this.
    pub id: usize,
    pub content: String,
    /// Path relative to the source root the file came from.
    pub source_path: String,
    pub component_tag: ComponentTag,
    /// Engine version when the path reveals one (e.g. `flink-1.17`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spe_version: Option<String>,
    /// SHA-256 of the whole originating file, lowercase hex.
    pub checksum: String,
    pub embedding: EmbeddingVector,
}

/// The searchable corpus: chunks plus a per-engine id index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeIndex {
    chunks: Vec<DocumentChunk>,
    by_system: BTreeMap<TargetSystem, Vec<usize>>,
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("chunk id {0} referenced by the system index does not exist")]
    DanglingId(usize),
    #[error("chunk at position {pos} carries id {id}")]
    MisnumberedChunk { pos: usize, id: usize },
    #[error("reading index: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing index: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("index fingerprint mismatch: stored {stored}, computed {computed}")]
    FingerprintMismatch { stored: String, computed: String },
}

impl KnowledgeIndex {
    pub fn empty() -> Self {
        KnowledgeIndex { chunks: Vec::new(), by_system: BTreeMap::new() }
    }

    /// Assemble an index, rejecting system entries that point nowhere.
    pub fn from_parts(
        chunks: Vec<DocumentChunk>,
        by_system: BTreeMap<TargetSystem, Vec<usize>>,
    ) -> Result<Self, IndexError> {
        for (pos, c) in chunks.iter().enumerate() {
            if c.id != pos {
                return Err(IndexError::MisnumberedChunk { pos, id: c.id });
            }
        }
        for ids in by_system.values() {
            if let Some(&bad) = ids.iter().find(|&&id| id >= chunks.len()) {
                return Err(IndexError::DanglingId(bad));
            }
        }
        Ok(KnowledgeIndex { chunks, by_system })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> impl Iterator<Item = &DocumentChunk> {
        self.chunks.iter()
    }

    pub fn chunk(&self, id: usize) -> Option<&DocumentChunk> {
        self.chunks.get(id)
    }

    /// Chunk ids indexed under one engine, ascending.
    pub fn ids_for_system(&self, system: TargetSystem) -> &[usize] {
        self.by_system.get(&system).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Hash of every chunk checksum in order — changes iff the corpus does.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for c in &self.chunks {
            hasher.update(c.checksum.as_bytes());
        }
        to_hex(&hasher.finalize())
    }

    /// Persist as JSON alongside the corpus fingerprint.
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let stored = StoredIndex { fingerprint: self.fingerprint(), index: self.clone() };
        let mut text = serde_json::to_string_pretty(&stored)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Load a saved index, verifying both structure and fingerprint.
    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let text = std::fs::read_to_string(path)?;
        let stored: StoredIndex = serde_json::from_str(&text)?;
        let index = Self::from_parts(stored.index.chunks, stored.index.by_system)?;
        let computed = index.fingerprint();
        if computed != stored.fingerprint {
            return Err(IndexError::FingerprintMismatch { stored: stored.fingerprint, computed });
        }
        Ok(index)
    }
}

#[derive(Serialize, Deserialize)]
struct StoredIndex {
    fingerprint: String,
    #[serde(flatten)]
    index: KnowledgeIndex,
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of raw bytes as lowercase hex.
pub fn checksum_file(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    to_hex(&hasher.finalize())
}

/// Top-`k` chunks for one engine, ranked by similarity to the query.
///
/// Pass the same encoder the index was built with — similarities against a
/// differently-seeded embedding space are meaningless. Ties rank by chunk id.
pub fn retrieve_relevant_docs(
    index: &KnowledgeIndex,
    query: &str,
    system: TargetSystem,
    k: usize,
    encoder: &Encoder,
) -> Result<Vec<DocumentChunk>, EncodeError> {
    assert!(k >= 1, "retrieval needs k >= 1");
    if index.is_empty() {
        return Ok(Vec::new());
    }
    let query_vec: EmbeddingVector = encoder.encode(query)?;
    let mut ranked: Vec<(usize, f64)> = index
        .ids_for_system(system)
        .iter()
        .map(|&id| (id, cosine(&query_vec, &index.chunks[id].embedding)))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("similarities are finite").then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked.into_iter().map(|(id, _)| index.chunks[id].clone()).collect())
}

#[derive(Debug, thiserror::Error)]
pub enum AttachError {
    #[error("graph has no {0} seed vertex to connect documents to")]
    MissingSeed(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Add one rag vertex per document and join each to the system/user seed
/// pair with a knowledge hyperedge.
pub fn attach_rag_nodes(
    graph: &mut ThoughtHypergraph,
    docs: &[DocumentChunk],
    relevance: &RelevanceTable,
) -> Result<Vec<VertexId>, AttachError> {
    let seed = |want: VertexType, label: &'static str| {
        graph
            .vertices()
            .find(|v| v.vtype == want)
            .map(|v| v.id)
            .ok_or(AttachError::MissingSeed(label))
    };
    let system_v = seed(VertexType::System, "system")?;
    let user_v = seed(VertexType::User, "user")?;
    let seed_pair = BTreeSet::from([system_v, user_v]);

    let mut added = Vec::with_capacity(docs.len());
    for doc in docs {
        let rag = graph.add_vertex(doc.content.clone(), VertexType::Rag)?;
        let sources = BTreeSet::from([rag]);
        let w = hyperedge_weight(graph, &sources, &seed_pair, &RelationLabel::Knowledge, relevance)?;
        graph.connect(sources, seed_pair.clone(), RelationLabel::Knowledge, w)?;
        added.push(rag);
    }
    Ok(added)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::DEFAULT_DIM;

    fn encoder() -> Encoder {
        Encoder::deterministic(DEFAULT_DIM, 7)
    }

    fn chunk_with(id: usize, content: &str) -> DocumentChunk {
        DocumentChunk {
            id,
            content: content.to_string(),
            source_path: format!("doc{id}.md"),
            component_tag: ComponentTag::Doc,
            spe_version: None,
            checksum: checksum_file(content.as_bytes()),
            embedding: encoder().encode(content).unwrap(),
        }
    }

    fn small_index(contents: &[&str]) -> KnowledgeIndex {
        let chunks: Vec<DocumentChunk> = contents.iter().enumerate().map(|(i, c)| chunk_with(i, c)).collect();
        let ids: Vec<usize> = (0..chunks.len()).collect();
        let by_system = TargetSystem::ALL.into_iter().map(|s| (s, ids.clone())).collect();
        KnowledgeIndex::from_parts(chunks, by_system).unwrap()
    }

    #[test]
    fn checksum_matches_reference_vectors() {
        assert_eq!(checksum_file(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(checksum_file(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(checksum_file(b"same"), checksum_file(b"same"));
    }

    #[test]
    fn index_invariants_are_enforced() {
        let chunks = vec![chunk_with(0, "a")];
        let mut by_system = BTreeMap::new();
        by_system.insert(TargetSystem::Flink, vec![3]);
        assert!(matches!(
            KnowledgeIndex::from_parts(chunks, by_system),
            Err(IndexError::DanglingId(3))
        ));

        let misnumbered = vec![chunk_with(5, "a")];
        assert!(matches!(
            KnowledgeIndex::from_parts(misnumbered, BTreeMap::new()),
            Err(IndexError::MisnumberedChunk { pos: 0, id: 5 })
        ));
    }

    #[test]
    fn retrieval_on_an_empty_index_is_empty() {
        let out = retrieve_relevant_docs(&KnowledgeIndex::empty(), "anything", TargetSystem::Flink, 3, &encoder());
        assert!(out.unwrap().is_empty());
    }

    #[test]
    fn retrieval_matches_a_brute_force_sort() {
        let index = small_index(&[
            "kafka source connector configuration",
            "window aggregation operators",
            "file sink formats",
            "kafka consumer group tuning",
            "checkpoint recovery internals",
        ]);
        let enc = encoder();
        let query = "kafka source";
        let got = retrieve_relevant_docs(&index, query, TargetSystem::Flink, 3, &enc).unwrap();

        let qv = enc.encode(query).unwrap();
        let mut oracle: Vec<(usize, f64)> =
            index.chunks().map(|c| (c.id, cosine(&qv, &c.embedding))).collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let want: Vec<usize> = oracle.iter().take(3).map(|(id, _)| *id).collect();
        assert_eq!(got.iter().map(|c| c.id).collect::<Vec<_>>(), want);
    }

    #[test]
    fn retrieval_with_k_beyond_the_corpus_returns_everything_ranked() {
        let index = small_index(&["alpha", "beta"]);
        let got = retrieve_relevant_docs(&index, "alpha", TargetSystem::Spark, 10, &encoder()).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].content, "alpha");
    }

    #[test]
    fn save_and_load_round_trip_with_fingerprint_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        let index = small_index(&["alpha doc", "beta doc"]);
        index.save(&path).unwrap();
        let loaded = KnowledgeIndex::load(&path).unwrap();
        assert_eq!(loaded, index);

        // Tamper with a checksum: the fingerprint no longer matches.
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replacen(&index.chunk(0).unwrap().checksum, &checksum_file(b"other"), 1);
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(KnowledgeIndex::load(&path), Err(IndexError::FingerprintMismatch { .. })));
    }

    #[test]
    fn attach_adds_one_rag_vertex_and_knowledge_edge_per_doc() {
        let mut graph = ThoughtHypergraph::new(encoder());
        graph.add_vertex("build a flink word counter", VertexType::System).unwrap();
        graph.add_vertex("count words from kafka", VertexType::User).unwrap();

        let docs = vec![chunk_with(0, "kafka notes"), chunk_with(1, "window notes"), chunk_with(2, "sink notes")];
        let added = attach_rag_nodes(&mut graph, &docs, &RelevanceTable::default()).unwrap();
        assert_eq!(added.len(), 3);

        let knowledge_edges: Vec<_> =
            graph.hyperedges().filter(|e| e.relation == RelationLabel::Knowledge).collect();
        assert_eq!(knowledge_edges.len(), 3);
        for (edge, rag) in knowledge_edges.iter().zip(&added) {
            assert!(edge.directed);
            assert_eq!(edge.sources, BTreeSet::from([*rag]));
            assert_eq!(edge.targets.len(), 2);
        }
    }

    #[test]
    fn attach_with_no_docs_adds_nothing() {
        let mut graph = ThoughtHypergraph::new(encoder());
        graph.add_vertex("sys", VertexType::System).unwrap();
        graph.add_vertex("usr", VertexType::User).unwrap();
        let before = graph.vertex_count();
        let added = attach_rag_nodes(&mut graph, &[], &RelevanceTable::default()).unwrap();
        assert!(added.is_empty());
        assert_eq!(graph.vertex_count(), before);
    }

    #[test]
    fn attach_requires_seed_vertices() {
        let mut graph = ThoughtHypergraph::new(encoder());
        graph.add_vertex("only user", VertexType::User).unwrap();
        let err = attach_rag_nodes(&mut graph, &[chunk_with(0, "doc")], &RelevanceTable::default()).unwrap_err();
        assert!(matches!(err, AttachError::MissingSeed("system")));
    }
}
