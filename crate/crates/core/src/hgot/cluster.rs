//! Similarity-driven hyperedge construction.
//!
//! Vertices are grouped by average-linkage agglomerative clustering over
//! cosine distance (`1 − similarity`), cutting the dendrogram at
//! `1 − threshold`. Every cluster with at least two members becomes one
//! undirected hyperedge: its relation is picked from a keyword table over the
//! member contents, its weight is the members' mean pairwise similarity.
//!
//! The clustering is hand-rolled rather than pulled from a crate because the
//! merge order (and therefore cluster numbering) must be deterministic:
//! distance ties always merge the lexicographically smallest pair of
//! clusters, identified by their smallest member index.

use super::graph::{EdgeId, GraphError, RelationLabel, ThoughtHypergraph, VertexId};
use super::weights::mean_pairwise_similarity;
use crate::embeddings::similarity_matrix;
use std::collections::BTreeSet;

/// Default similarity threshold for clustering: vertices at least this
/// similar (on average) end up in the same cluster.
pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.7;

/// Average-linkage agglomerative clustering over a similarity matrix.
///
/// Merges continue while the smallest average pairwise *distance* between two
/// clusters is at most `1 − threshold` (inclusive, so exact-threshold pairs
/// merge). Returns clusters as sorted index lists, ordered by smallest
/// member.
pub fn cluster_indices(sim: &[Vec<f64>], threshold: f64) -> Vec<Vec<usize>> {
    let n = sim.len();
    if n == 0 {
        return Vec::new();
    }
    let cutoff = 1.0 - threshold;
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    loop {
        if clusters.len() < 2 {
            break;
        }
        // Find the closest pair by average linkage; ties resolve to the
        // lexicographically smallest (a, b) over smallest-member order.
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let mut sum = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        sum += 1.0 - sim[i][j];
                    }
                }
                let d = sum / (clusters[a].len() * clusters[b].len()) as f64;
                let candidate = (d, clusters[a][0], clusters[b][0]);
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        d < bd - 1e-15 || ((d - bd).abs() <= 1e-15 && (candidate.1, candidate.2) < (bi, bj))
                    }
                };
                if better {
                    best = Some((d, clusters[a][0], clusters[b][0]));
                }
            }
        }
        let Some((d, first_a, first_b)) = best else { break };
        if d > cutoff {
            break;
        }
        let ia = clusters.iter().position(|c| c[0] == first_a).expect("cluster present");
        let ib = clusters.iter().position(|c| c[0] == first_b).expect("cluster present");
        let (keep, drop) = if ia < ib { (ia, ib) } else { (ib, ia) };
        let merged = clusters.remove(drop);
        clusters[keep].extend(merged);
        clusters[keep].sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    clusters
}

/// Keyword groups that map a cluster's dominant theme onto a relation label.
/// Scanned in order; the group with the most keyword hits wins, earlier
/// groups winning ties. A cluster matching nothing gets a `cluster-<k>`
/// custom label.
const THEME_KEYWORDS: [(&str, &[&str]); 5] = [
    (
        "fault_tolerance",
        &["checkpoint", "checkpointing", "recovery", "dlq", "dead-letter", "failover", "retry", "resilience", "fault"],
    ),
    (
        "data_flow",
        &["source", "sink", "topic", "stream", "ingest", "kafka", "pipeline", "flow", "input", "output"],
    ),
    (
        "performance_optimization",
        &["parallelism", "throughput", "latency", "window", "windowing", "performance", "optimization", "scaling", "partition"],
    ),
    (
        "operational_concern",
        &["monitor", "monitoring", "metric", "metrics", "logging", "alert", "deployment", "operations", "dashboard"],
    ),
    ("dependency", &["depends", "requires", "dependency", "prerequisite", "before", "after"]),
];

/// Pick a relation label for a cluster from its members' contents.
pub fn relation_for_cluster(contents: &[&str], ordinal: usize) -> RelationLabel {
    let tokens: BTreeSet<String> = contents
        .iter()
        .flat_map(|c| c.to_lowercase().split_whitespace().map(|t| t.trim_matches(|ch: char| !ch.is_alphanumeric() && ch != '-' && ch != '_').to_string()).collect::<Vec<_>>())
        .filter(|t| !t.is_empty())
        .collect();
    let mut best: Option<(usize, &str)> = None;
    for (label, keywords) in THEME_KEYWORDS {
        let hits = keywords.iter().filter(|k| tokens.contains(**k)).count();
        if hits > 0 && best.map_or(true, |(bh, _)| hits > bh) {
            best = Some((hits, label));
        }
    }
    match best {
        Some((_, label)) => RelationLabel::custom(label).expect("theme labels are nonempty"),
        None => RelationLabel::Custom(format!("cluster-{ordinal}")),
    }
}

/// Cluster the given vertices and add one undirected hyperedge per cluster of
/// two or more members. Weight is the members' mean pairwise similarity;
/// relation comes from the theme table. An edge whose member set and relation
/// already exist is not duplicated (repeated construction rounds keep the
/// edge set a union). Returns the ids of newly created edges.
pub fn build_hyperedges(
    graph: &mut ThoughtHypergraph,
    vertex_ids: &[VertexId],
    threshold: f64,
) -> Result<Vec<EdgeId>, GraphError> {
    let mut embeddings = Vec::with_capacity(vertex_ids.len());
    for &id in vertex_ids {
        let v = graph.vertex(id).ok_or(GraphError::UnknownVertex(id))?;
        embeddings.push(v.embedding.clone());
    }
    let sim = similarity_matrix(&embeddings);
    let clusters = cluster_indices(&sim, threshold);

    let mut created = Vec::new();
    let mut ordinal = 0usize;
    for cluster in clusters {
        if cluster.len() < 2 {
            continue;
        }
        ordinal += 1;
        let members: BTreeSet<VertexId> = cluster.iter().map(|&i| vertex_ids[i]).collect();
        let contents: Vec<&str> =
            members.iter().map(|id| graph.vertex(*id).expect("member exists").content.as_str()).collect();
        let relation = relation_for_cluster(&contents, ordinal);
        if graph.find_edge(&members, &BTreeSet::new(), &relation).is_some() {
            continue;
        }
        let weight = mean_pairwise_similarity(graph, &members)?;
        let id = graph.connect(members, BTreeSet::new(), relation, weight)?;
        created.push(id);
    }
    Ok(created)
}
