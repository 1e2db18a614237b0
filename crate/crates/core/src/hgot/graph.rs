//! Thought hypergraph: vertices, hyperedges, traversal, and serialization.
//!
//! A vertex is a piece of thought content with a type, a confidence score in
//! `[0, 1]`, and an embedding produced by the graph's encoder. A hyperedge
//! relates a *set* of source vertices to a *set* of target vertices under a
//! relation label; an edge whose source and target sets coincide (targets
//! empty, or equal to sources) is undirected. Storage is linear in the number
//! of vertices plus the total edge membership.

use crate::embeddings::{cosine, Encoder, EncodeError, EmbeddingVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Role a vertex plays in the reasoning graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexType {
    System,
    User,
    Rag,
    Analysis,
    Plan,
    Design,
    Execution,
    Premise,
    Hypothesis,
}

impl VertexType {
    pub fn name(&self) -> &'static str {
        match self {
            VertexType::System => "system",
            VertexType::User => "user",
            VertexType::Rag => "rag",
            VertexType::Analysis => "analysis",
            VertexType::Plan => "plan",
            VertexType::Design => "design",
            VertexType::Execution => "execution",
            VertexType::Premise => "premise",
            VertexType::Hypothesis => "hypothesis",
        }
    }
}

impl fmt::Display for VertexType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Relation label carried by a hyperedge. Known labels cover the relations the
/// construction loop and clustering emit; anything else travels as `Custom`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RelationLabel {
    Context,
    Knowledge,
    Causation,
    Refinement,
    Dependency,
    DataFlow,
    PerformanceOptimization,
    FaultTolerance,
    OperationalConcern,
    PerfReliabilityTradeoff,
    SystemIntegration,
    Custom(String),
}

impl RelationLabel {
    const BUILTINS: [(&'static str, RelationLabel); 11] = [
        ("context", RelationLabel::Context),
        ("knowledge", RelationLabel::Knowledge),
        ("causation", RelationLabel::Causation),
        ("refinement", RelationLabel::Refinement),
        ("dependency", RelationLabel::Dependency),
        ("data_flow", RelationLabel::DataFlow),
        ("performance_optimization", RelationLabel::PerformanceOptimization),
        ("fault_tolerance", RelationLabel::FaultTolerance),
        ("operational_concern", RelationLabel::OperationalConcern),
        ("perf_reliability_tradeoff", RelationLabel::PerfReliabilityTradeoff),
        ("system_integration", RelationLabel::SystemIntegration),
    ];

    pub fn as_str(&self) -> &str {
        match self {
            RelationLabel::Custom(s) => s,
            other => Self::BUILTINS
                .iter()
                .find(|(_, l)| l == other)
                .map(|(name, _)| *name)
                .expect("every non-custom label is listed"),
        }
    }

    /// Build a label from its string form. Known names map onto the matching
    /// builtin (keeping serialization bijective); unknown nonempty names
    /// become `Custom`. Empty names are rejected.
    pub fn custom(name: impl Into<String>) -> Result<RelationLabel, GraphError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(GraphError::EmptyRelationName);
        }
        for (builtin, label) in Self::BUILTINS {
            if builtin == name {
                return Ok(label);
            }
        }
        Ok(RelationLabel::Custom(name))
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for RelationLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RelationLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        RelationLabel::custom(s).map_err(serde::de::Error::custom)
    }
}

/// Thought vertex. `embedding` is always `encode(content)` under the owning
/// graph's encoder. Field order here fixes the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtVertex {
    pub id: VertexId,
    pub content: String,
    pub vtype: VertexType,
    pub confidence: f64,
    pub embedding: EmbeddingVector,
}

/// Hyperedge relating source vertices to target vertices. `directed` is
/// derived at creation time: true iff the source and target sets differ.
/// Field order here fixes the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub id: EdgeId,
    pub sources: BTreeSet<VertexId>,
    pub targets: BTreeSet<VertexId>,
    pub relation: RelationLabel,
    pub weight: f64,
    pub directed: bool,
    pub timestamp: u64,
}

impl Hyperedge {
    /// All vertices the edge touches (sources and targets).
    pub fn members(&self) -> BTreeSet<VertexId> {
        self.sources.union(&self.targets).copied().collect()
    }

    /// Total membership count, |S| + |T| (the unit of storage linearity).
    pub fn membership(&self) -> usize {
        self.sources.len() + self.targets.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("hyperedge must touch at least one vertex")]
    EmptyEdge,
    #[error("relation names must be nonempty")]
    EmptyRelationName,
    #[error("edge weight must be finite, got {0}")]
    NonFiniteWeight(f64),
    #[error("confidence must lie in [0, 1], got {0}")]
    ConfidenceOutOfRange(f64),
    #[error("weight formula needs nonempty source and target sets")]
    EmptyWeightSide,
    #[error("mean pairwise similarity needs at least two members, got {0}")]
    TooFewMembers(usize),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("graph document invalid: {0}")]
    InvalidDocument(String),
}

/// Mixing coefficients for multi-objective traversal: confidence, novelty,
/// and context relevance. Conventionally they sum to 1, but only their
/// relative magnitudes matter for the argmax.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraversalWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for TraversalWeights {
    fn default() -> Self {
        TraversalWeights { alpha: 1.0 / 3.0, beta: 1.0 / 3.0, gamma: 1.0 / 3.0 }
    }
}

/// The hypergraph itself. Vertex and edge ids are assigned monotonically;
/// edge timestamps come from a logical clock that ticks on every connect, so
/// creation order is always recoverable.
pub struct ThoughtHypergraph {
    vertices: BTreeMap<VertexId, ThoughtVertex>,
    hyperedges: BTreeMap<EdgeId, Hyperedge>,
    encoder: Encoder,
    next_vertex: u64,
    next_edge: u64,
    clock: u64,
}

impl ThoughtHypergraph {
    pub fn new(encoder: Encoder) -> Self {
        ThoughtHypergraph {
            vertices: BTreeMap::new(),
            hyperedges: BTreeMap::new(),
            encoder,
            next_vertex: 0,
            next_edge: 0,
            clock: 0,
        }
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn hyperedge_count(&self) -> usize {
        self.hyperedges.len()
    }

    /// Σ over edges of |S| + |T|; with `vertex_count` this bounds storage.
    pub fn membership_total(&self) -> usize {
        self.hyperedges.values().map(Hyperedge::membership).sum()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &ThoughtVertex> {
        self.vertices.values()
    }

    pub fn hyperedges(&self) -> impl Iterator<Item = &Hyperedge> {
        self.hyperedges.values()
    }

    pub fn vertex(&self, id: VertexId) -> Option<&ThoughtVertex> {
        self.vertices.get(&id)
    }

    pub fn hyperedge(&self, id: EdgeId) -> Option<&Hyperedge> {
        self.hyperedges.get(&id)
    }

    pub fn vertex_ids(&self) -> Vec<VertexId> {
        self.vertices.keys().copied().collect()
    }

    /// Add a vertex; the embedding is computed from `content` with the
    /// graph's encoder and confidence starts at 0 until evaluated.
    pub fn add_vertex(&mut self, content: impl Into<String>, vtype: VertexType) -> Result<VertexId, GraphError> {
        let content = content.into();
        let embedding = self.encoder.encode(&content)?;
        let id = VertexId(self.next_vertex);
        self.next_vertex += 1;
        self.vertices.insert(id, ThoughtVertex { id, content, vtype, confidence: 0.0, embedding });
        Ok(id)
    }

    /// Overwrite a vertex's confidence. Values outside `[0, 1]` are rejected.
    pub fn set_confidence(&mut self, id: VertexId, confidence: f64) -> Result<(), GraphError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(GraphError::ConfidenceOutOfRange(confidence));
        }
        let v = self.vertices.get_mut(&id).ok_or(GraphError::UnknownVertex(id))?;
        v.confidence = confidence;
        Ok(())
    }

    /// Create a hyperedge. Direction is derived (`sources != targets`), the
    /// timestamp comes from the logical clock, and every referenced vertex
    /// must exist. An edge whose target set is empty, or equals its source
    /// set, is undirected.
    pub fn connect(
        &mut self,
        sources: BTreeSet<VertexId>,
        targets: BTreeSet<VertexId>,
        relation: RelationLabel,
        weight: f64,
    ) -> Result<EdgeId, GraphError> {
        if sources.is_empty() && targets.is_empty() {
            return Err(GraphError::EmptyEdge);
        }
        if !weight.is_finite() {
            return Err(GraphError::NonFiniteWeight(weight));
        }
        for id in sources.iter().chain(&targets) {
            if !self.vertices.contains_key(id) {
                return Err(GraphError::UnknownVertex(*id));
            }
        }
        let directed = sources != targets && !targets.is_empty();
        let id = EdgeId(self.next_edge);
        self.next_edge += 1;
        let timestamp = self.clock;
        self.clock += 1;
        self.hyperedges.insert(id, Hyperedge { id, sources, targets, relation, weight, directed, timestamp });
        Ok(id)
    }

    /// Find an existing edge with exactly these member sets and relation.
    pub fn find_edge(
        &self,
        sources: &BTreeSet<VertexId>,
        targets: &BTreeSet<VertexId>,
        relation: &RelationLabel,
    ) -> Option<EdgeId> {
        self.hyperedges
            .values()
            .find(|e| &e.sources == sources && &e.targets == targets && &e.relation == relation)
            .map(|e| e.id)
    }

    /// Edges that touch `v` (as source or target).
    pub fn incident_edges(&self, v: VertexId) -> impl Iterator<Item = &Hyperedge> {
        self.hyperedges.values().filter(move |e| e.sources.contains(&v) || e.targets.contains(&v))
    }

    /// Co-members of `v` across all hyperedges, excluding `v` itself.
    pub fn neighborhood(&self, v: VertexId) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        for e in self.incident_edges(v) {
            out.extend(e.sources.iter().copied());
            out.extend(e.targets.iter().copied());
        }
        out.remove(&v);
        out
    }

    /// Confidence-guided traversal: the highest-confidence neighbour of `v`,
    /// ties broken towards the smallest vertex id. `None` when `v` is
    /// isolated.
    pub fn traverse_confidence(&self, v: VertexId) -> Option<VertexId> {
        let mut best: Option<(f64, VertexId)> = None;
        for id in self.neighborhood(v) {
            let sigma = self.vertices[&id].confidence;
            match best {
                Some((best_sigma, _)) if sigma <= best_sigma => {}
                // BTreeSet iteration is ascending, so on ties the earlier
                // (smaller) id wins by the strict comparison above.
                _ => best = Some((sigma, id)),
            }
        }
        best.map(|(_, id)| id)
    }

    /// Relation-guided traversal: all co-members of `v` via hyperedges
    /// carrying relation `r`.
    pub fn traverse_relation(&self, v: VertexId, relation: &RelationLabel) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        for e in self.incident_edges(v) {
            if &e.relation == relation {
                out.extend(e.sources.iter().copied());
                out.extend(e.targets.iter().copied());
            }
        }
        out.remove(&v);
        out
    }

    /// Novelty of a vertex: one minus its maximum similarity to any *other*
    /// vertex in the graph. A vertex with no peers (singleton graph) is
    /// maximally novel.
    pub fn novelty(&self, v: VertexId) -> Result<f64, GraphError> {
        let target = self.vertices.get(&v).ok_or(GraphError::UnknownVertex(v))?;
        let best = self
            .vertices
            .values()
            .filter(|u| u.id != v)
            .map(|u| cosine(&target.embedding, &u.embedding))
            .fold(None::<f64>, |acc, s| Some(acc.map_or(s, |a| a.max(s))));
        Ok(match best {
            Some(max_sim) => 1.0 - max_sim,
            None => 1.0,
        })
    }

    /// Multi-objective traversal over the neighbourhood of `v`: maximise
    /// `alpha·confidence + beta·novelty + gamma·relevance(context)`, ties
    /// broken towards the smallest vertex id. With `beta = gamma = 0` this
    /// reduces to confidence-guided traversal.
    pub fn traverse_multi(
        &self,
        v: VertexId,
        context: &str,
        weights: &TraversalWeights,
    ) -> Result<Option<VertexId>, GraphError> {
        let context_vec = self.encoder.encode(context)?;
        let mut best: Option<(f64, VertexId)> = None;
        for id in self.neighborhood(v) {
            let cand = &self.vertices[&id];
            let novelty = self.novelty(id)?;
            let relevance = cosine(&cand.embedding, &context_vec);
            let score = weights.alpha * cand.confidence + weights.beta * novelty + weights.gamma * relevance;
            match best {
                Some((best_score, _)) if score <= best_score => {}
                _ => best = Some((score, id)),
            }
        }
        Ok(best.map(|(_, id)| id))
    }

    /// Serialize to a single JSON document with vertices and hyperedges in id
    /// order. The output is byte-stable: serializing, parsing, and
    /// serializing again yields identical bytes.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            vertices: Vec<&'a ThoughtVertex>,
            hyperedges: Vec<&'a Hyperedge>,
        }
        let doc = Doc { vertices: self.vertices.values().collect(), hyperedges: self.hyperedges.values().collect() };
        serde_json::to_string(&doc).expect("graph serialization cannot fail")
    }

    /// Rebuild a graph from [`to_json`] output. The encoder is supplied by
    /// the caller (it is configuration, not data); stored embeddings are kept
    /// as-is. Ids, confidences, and edge memberships are validated.
    pub fn from_json(json: &str, encoder: Encoder) -> Result<Self, GraphError> {
        #[derive(Deserialize)]
        struct Doc {
            vertices: Vec<ThoughtVertex>,
            hyperedges: Vec<Hyperedge>,
        }
        let doc: Doc = serde_json::from_str(json).map_err(|e| GraphError::InvalidDocument(e.to_string()))?;
        let mut vertices = BTreeMap::new();
        for v in doc.vertices {
            if !(0.0..=1.0).contains(&v.confidence) {
                return Err(GraphError::ConfidenceOutOfRange(v.confidence));
            }
            if vertices.insert(v.id, v).is_some() {
                return Err(GraphError::InvalidDocument("duplicate vertex id".into()));
            }
        }
        let mut hyperedges = BTreeMap::new();
        let mut max_ts = None::<u64>;
        for e in doc.hyperedges {
            for id in e.sources.iter().chain(&e.targets) {
                if !vertices.contains_key(id) {
                    return Err(GraphError::UnknownVertex(*id));
                }
            }
            if e.sources.is_empty() && e.targets.is_empty() {
                return Err(GraphError::EmptyEdge);
            }
            max_ts = Some(max_ts.map_or(e.timestamp, |m: u64| m.max(e.timestamp)));
            if hyperedges.insert(e.id, e).is_some() {
                return Err(GraphError::InvalidDocument("duplicate edge id".into()));
            }
        }
        let next_vertex = vertices.keys().last().map_or(0, |id| id.0 + 1);
        let next_edge = hyperedges.keys().last().map_or(0, |id| id.0 + 1);
        let clock = max_ts.map_or(0, |t| t + 1);
        Ok(ThoughtHypergraph { vertices, hyperedges, encoder, next_vertex, next_edge, clock })
    }
}

// Debug prints counts rather than full contents; the embedded vectors make a
// derived impl unreadable in test failures.
impl fmt::Debug for ThoughtHypergraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ThoughtHypergraph")
            .field("vertices", &self.vertices.len())
            .field("hyperedges", &self.hyperedges.len())
            .field("clock", &self.clock)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph() -> ThoughtHypergraph {
        ThoughtHypergraph::new(Encoder::deterministic(64, 7))
    }

    fn set(ids: &[VertexId]) -> BTreeSet<VertexId> {
        ids.iter().copied().collect()
    }

    #[test]
    fn vertex_ids_are_sequential_and_confidence_starts_at_zero() {
        let mut g = graph();
        let a = g.add_vertex("kafka source", VertexType::Analysis).unwrap();
        let b = g.add_vertex("file sink", VertexType::Analysis).unwrap();
        assert_eq!((a, b), (VertexId(0), VertexId(1)));
        assert_eq!(g.vertex(a).unwrap().confidence, 0.0);
        assert_eq!(g.vertex(a).unwrap().embedding, g.encoder().encode("kafka source").unwrap());
    }

    #[test]
    fn connect_validates_members_weight_and_derives_direction() {
        let mut g = graph();
        let a = g.add_vertex("a", VertexType::Analysis).unwrap();
        let b = g.add_vertex("b", VertexType::Analysis).unwrap();
        let c = g.add_vertex("c", VertexType::Plan).unwrap();

        let undirected = g.connect(set(&[a, b]), BTreeSet::new(), RelationLabel::Context, 0.5).unwrap();
        assert!(!g.hyperedge(undirected).unwrap().directed);
        // Explicit targets equal to sources still count as undirected.
        let self_loop = g.connect(set(&[a, b]), set(&[a, b]), RelationLabel::Context, 0.5).unwrap();
        assert!(!g.hyperedge(self_loop).unwrap().directed);
        let directed = g.connect(set(&[a, b]), set(&[c]), RelationLabel::Dependency, 0.9).unwrap();
        assert!(g.hyperedge(directed).unwrap().directed);

        assert!(matches!(
            g.connect(BTreeSet::new(), BTreeSet::new(), RelationLabel::Context, 0.1),
            Err(GraphError::EmptyEdge)
        ));
        assert!(matches!(
            g.connect(set(&[a]), BTreeSet::new(), RelationLabel::Context, f64::NAN),
            Err(GraphError::NonFiniteWeight(_))
        ));
        assert!(matches!(
            g.connect(set(&[VertexId(99)]), BTreeSet::new(), RelationLabel::Context, 0.1),
            Err(GraphError::UnknownVertex(VertexId(99)))
        ));
    }

    #[test]
    fn edge_timestamps_strictly_increase_in_creation_order() {
        let mut g = graph();
        let a = g.add_vertex("a", VertexType::Analysis).unwrap();
        let b = g.add_vertex("b", VertexType::Analysis).unwrap();
        let mut last = None;
        for _ in 0..5 {
            let e = g.connect(set(&[a, b]), BTreeSet::new(), RelationLabel::Context, 0.0).unwrap();
            let ts = g.hyperedge(e).unwrap().timestamp;
            if let Some(prev) = last {
                assert!(ts > prev);
            }
            last = Some(ts);
        }
    }

    #[test]
    fn neighborhood_is_comembership_across_all_edges() {
        let mut g = graph();
        let v: Vec<_> = (0..5).map(|i| g.add_vertex(format!("n{i}"), VertexType::Analysis).unwrap()).collect();
        g.connect(set(&[v[0], v[1], v[2]]), BTreeSet::new(), RelationLabel::Context, 0.1).unwrap();
        g.connect(set(&[v[0]]), set(&[v[3]]), RelationLabel::Dependency, 0.2).unwrap();
        // v4 shares no edge with v0.
        g.connect(set(&[v[3], v[4]]), BTreeSet::new(), RelationLabel::Context, 0.3).unwrap();

        assert_eq!(g.neighborhood(v[0]), set(&[v[1], v[2], v[3]]));
        assert_eq!(g.neighborhood(v[4]), set(&[v[3]]));
    }

    #[test]
    fn confidence_traversal_picks_highest_sigma_smallest_id_on_ties() {
        let mut g = graph();
        let a = g.add_vertex("a", VertexType::Analysis).unwrap();
        let b = g.add_vertex("b", VertexType::Analysis).unwrap();
        let c = g.add_vertex("c", VertexType::Analysis).unwrap();
        let d = g.add_vertex("d", VertexType::Analysis).unwrap();
        g.connect(set(&[a, b, c, d]), BTreeSet::new(), RelationLabel::Context, 0.5).unwrap();
        g.set_confidence(b, 0.7).unwrap();
        g.set_confidence(c, 0.7).unwrap();
        g.set_confidence(d, 0.2).unwrap();
        // b and c tie at 0.7; the smaller id wins.
        assert_eq!(g.traverse_confidence(a), Some(b));
        let isolated = g.add_vertex("alone", VertexType::Analysis).unwrap();
        assert_eq!(g.traverse_confidence(isolated), None);
    }

    #[test]
    fn relation_traversal_filters_by_label() {
        let mut g = graph();
        let a = g.add_vertex("a", VertexType::Analysis).unwrap();
        let b = g.add_vertex("b", VertexType::Analysis).unwrap();
        let c = g.add_vertex("c", VertexType::Analysis).unwrap();
        g.connect(set(&[a, b]), BTreeSet::new(), RelationLabel::FaultTolerance, 0.4).unwrap();
        g.connect(set(&[a, c]), BTreeSet::new(), RelationLabel::DataFlow, 0.4).unwrap();
        assert_eq!(g.traverse_relation(a, &RelationLabel::FaultTolerance), set(&[b]));
        assert_eq!(g.traverse_relation(a, &RelationLabel::DataFlow), set(&[c]));
        assert!(g.traverse_relation(b, &RelationLabel::DataFlow).is_empty());
    }

    #[test]
    fn novelty_is_one_for_singletons_and_drops_for_duplicates() {
        let mut g = graph();
        let a = g.add_vertex("tumbling windows", VertexType::Analysis).unwrap();
        assert_eq!(g.novelty(a).unwrap(), 1.0);
        // An exact duplicate has similarity 1, so novelty collapses to 0.
        let _b = g.add_vertex("tumbling windows", VertexType::Analysis).unwrap();
        assert!(g.novelty(a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn multi_objective_traversal_with_beta_gamma_zero_matches_confidence_traversal() {
        // Randomized graphs: the alpha-only objective must agree with the
        // plain confidence rule, including its tie-breaking.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let mut g = graph();
            let n = rng.gen_range(2..=8);
            let ids: Vec<_> = (0..n)
                .map(|i| g.add_vertex(format!("vertex {i} {}", rng.gen::<u32>()), VertexType::Analysis).unwrap())
                .collect();
            for id in &ids {
                // Quantized confidences so ties actually occur.
                g.set_confidence(*id, f64::from(rng.gen_range(0..=4)) / 4.0).unwrap();
            }
            for _ in 0..rng.gen_range(1..=6) {
                let k = rng.gen_range(2..=n);
                let mut members = ids.clone();
                members.shuffle(&mut rng);
                members.truncate(k);
                g.connect(members.into_iter().collect(), BTreeSet::new(), RelationLabel::Context, 0.5).unwrap();
            }
            let start = ids[rng.gen_range(0..n)];
            let weights = TraversalWeights { alpha: 1.0, beta: 0.0, gamma: 0.0 };
            assert_eq!(
                g.traverse_multi(start, "anything", &weights).unwrap(),
                g.traverse_confidence(start),
            );
        }
    }

    #[test]
    fn storage_grows_linearly_with_vertices_plus_membership() {
        let mut g = graph();
        let ids: Vec<_> = (0..6).map(|i| g.add_vertex(format!("v{i}"), VertexType::Analysis).unwrap()).collect();
        g.connect(set(&ids[0..3]), BTreeSet::new(), RelationLabel::Context, 0.1).unwrap();
        g.connect(set(&ids[2..5]), set(&[ids[5]]), RelationLabel::Dependency, 0.1).unwrap();
        assert_eq!(g.vertex_count(), 6);
        assert_eq!(g.membership_total(), 3 + 4);
    }

    #[test]
    fn json_round_trip_is_byte_identical_and_restores_counters() {
        let mut g = graph();
        let a = g.add_vertex("kafka source feeding the splitter", VertexType::User).unwrap();
        let b = g.add_vertex("thirty second tumbling window", VertexType::Analysis).unwrap();
        let c = g.add_vertex("file sink with csv rows", VertexType::Plan).unwrap();
        g.set_confidence(a, 0.9).unwrap();
        g.set_confidence(b, 0.625).unwrap();
        g.connect(set(&[a, b]), BTreeSet::new(), RelationLabel::Context, 0.25).unwrap();
        g.connect(set(&[b]), set(&[c]), RelationLabel::custom("handoff").unwrap(), 0.75).unwrap();

        let json = g.to_json();
        let restored = ThoughtHypergraph::from_json(&json, Encoder::deterministic(64, 7)).unwrap();
        assert_eq!(restored.to_json(), json);

        // Counters continue from the stored maxima, so new ids never collide.
        let mut restored = restored;
        let d = restored.add_vertex("fresh", VertexType::Analysis).unwrap();
        assert_eq!(d, VertexId(3));
        let e = restored.connect(set(&[a, d]), BTreeSet::new(), RelationLabel::Context, 0.0).unwrap();
        assert_eq!(e, EdgeId(2));
        assert_eq!(restored.hyperedge(e).unwrap().timestamp, 2);
    }

    #[test]
    fn from_json_rejects_bad_documents() {
        let enc = || Encoder::deterministic(64, 7);
        let bad_confidence = r#"{"vertices":[{"id":0,"content":"x","vtype":"analysis","confidence":1.5,"embedding":[]}],"hyperedges":[]}"#;
        assert!(matches!(
            ThoughtHypergraph::from_json(bad_confidence, enc()),
            Err(GraphError::ConfidenceOutOfRange(_))
        ));
        let dangling = r#"{"vertices":[],"hyperedges":[{"id":0,"sources":[3],"targets":[],"relation":"context","weight":0.1,"directed":false,"timestamp":0}]}"#;
        assert!(matches!(ThoughtHypergraph::from_json(dangling, enc()), Err(GraphError::UnknownVertex(VertexId(3)))));
        let dup = r#"{"vertices":[{"id":0,"content":"x","vtype":"analysis","confidence":0.0,"embedding":[]},{"id":0,"content":"y","vtype":"analysis","confidence":0.0,"embedding":[]}],"hyperedges":[]}"#;
        assert!(matches!(ThoughtHypergraph::from_json(dup, enc()), Err(GraphError::InvalidDocument(_))));
    }

    #[test]
    fn relation_labels_serialize_bijectively() {
        for (name, label) in RelationLabel::BUILTINS {
            assert_eq!(label.as_str(), name);
            assert_eq!(RelationLabel::custom(name).unwrap(), label);
        }
        let custom = RelationLabel::custom("bespoke_relation").unwrap();
        assert_eq!(custom, RelationLabel::Custom("bespoke_relation".into()));
        assert!(matches!(RelationLabel::custom("  "), Err(GraphError::EmptyRelationName)));
        let json = serde_json::to_string(&RelationLabel::DataFlow).unwrap();
        assert_eq!(json, "\"data_flow\"");
        let back: RelationLabel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, RelationLabel::DataFlow);
    }

    proptest! {
        // Confidence setting accepts exactly [0, 1] and rejects the rest.
        #[test]
        fn confidence_bounds_enforced(c in -1.0f64..2.0) {
            let mut g = graph();
            let v = g.add_vertex("x", VertexType::Analysis).unwrap();
            let res = g.set_confidence(v, c);
            prop_assert_eq!(res.is_ok(), (0.0..=1.0).contains(&c));
        }
    }
}
