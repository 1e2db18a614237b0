//! Hyperedge weight computation.
//!
//! Directed edges are weighted by averaging embedding similarity over every
//! source/target vertex pair, scaled by a per-(relation, type-pair) relevance
//! factor. Undirected cluster edges instead use the mean pairwise similarity
//! of their members, normalised by the number of unordered pairs so the
//! weight stays in `[-1, 1]` regardless of cluster size.

use super::graph::{GraphError, RelationLabel, ThoughtHypergraph, VertexId, VertexType};
use crate::embeddings::cosine;
use std::collections::{BTreeMap, BTreeSet};

/// Static lookup of relevance factors in `[0, 1]` keyed by
/// `(relation, source vertex type, target vertex type)`. Missing entries
/// default to 1.0, so an empty table leaves similarity untouched.
#[derive(Debug, Clone, Default)]
pub struct RelevanceTable {
    entries: BTreeMap<(String, VertexType, VertexType), f64>,
}

impl RelevanceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        relation: &RelationLabel,
        from: VertexType,
        to: VertexType,
        factor: f64,
    ) -> Result<(), GraphError> {
        if !(0.0..=1.0).contains(&factor) || !factor.is_finite() {
            return Err(GraphError::NonFiniteWeight(factor));
        }
        self.entries.insert((relation.as_str().to_string(), from, to), factor);
        Ok(())
    }

    pub fn get(&self, relation: &RelationLabel, from: VertexType, to: VertexType) -> f64 {
        self.entries.get(&(relation.as_str().to_string(), from, to)).copied().unwrap_or(1.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Weight for a directed hyperedge: the similarity of every source/target
/// pair, scaled by the relevance factor for the pair's vertex types and
/// averaged over |S|·|T| pairs. Both sets must be nonempty.
pub fn hyperedge_weight(
    graph: &ThoughtHypergraph,
    sources: &BTreeSet<VertexId>,
    targets: &BTreeSet<VertexId>,
    relation: &RelationLabel,
    relevance: &RelevanceTable,
) -> Result<f64, GraphError> {
    if sources.is_empty() || targets.is_empty() {
        return Err(GraphError::EmptyWeightSide);
    }
    let mut sum = 0.0;
    for &si in sources {
        let sv = graph.vertex(si).ok_or(GraphError::UnknownVertex(si))?;
        for &ti in targets {
            let tv = graph.vertex(ti).ok_or(GraphError::UnknownVertex(ti))?;
            let sim = cosine(&sv.embedding, &tv.embedding);
            sum += sim * relevance.get(relation, sv.vtype, tv.vtype);
        }
    }
    Ok(sum / (sources.len() as f64 * targets.len() as f64))
}

/// Mean pairwise similarity over a member set, normalised by the number of
/// unordered pairs. Used for undirected cluster edges; needs ≥ 2 members.
pub fn mean_pairwise_similarity(
    graph: &ThoughtHypergraph,
    members: &BTreeSet<VertexId>,
) -> Result<f64, GraphError> {
    if members.len() < 2 {
        return Err(GraphError::TooFewMembers(members.len()));
    }
    let ids: Vec<VertexId> = members.iter().copied().collect();
    let mut sum = 0.0;
    let mut pairs = 0u64;
    for i in 0..ids.len() {
        let a = graph.vertex(ids[i]).ok_or(GraphError::UnknownVertex(ids[i]))?;
        for &jid in &ids[i + 1..] {
            let b = graph.vertex(jid).ok_or(GraphError::UnknownVertex(jid))?;
            sum += cosine(&a.embedding, &b.embedding);
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}
