//! Hypergraph-of-thoughts reasoning substrate.
//!
//! A thought hypergraph holds typed, confidence-scored vertices connected by
//! weighted hyperedges that may join any number of vertices at once. The
//! submodules split the concerns: [`graph`] owns the structure and
//! traversals, [`weights`] the edge-weight formula, [`confidence`] the
//! vertex scoring model, [`cluster`] similarity-driven hyperedge discovery,
//! and [`construct`] the iterative build loop plus design extraction.

pub mod cluster;
pub mod confidence;
pub mod construct;
pub mod graph;
pub mod weights;

pub use cluster::{build_hyperedges, cluster_indices, relation_for_cluster, DEFAULT_CLUSTER_THRESHOLD};
pub use confidence::{ConfidenceModel, ConfidenceWeights};
pub use construct::{construct, extract_optimal_design, ConstructConfig, ConstructError, PipelineDesign};
pub use graph::{
    EdgeId, GraphError, Hyperedge, RelationLabel, ThoughtHypergraph, ThoughtVertex, TraversalWeights,
    VertexId, VertexType,
};
pub use weights::{hyperedge_weight, mean_pairwise_similarity, RelevanceTable};
