//! Vertex confidence scoring.
//!
//! Confidence is a convex combination of three component scores — relevance
//! to the session context, consistency with the current graph, and
//! specificity of the content — each clamped to `[0, 1]` before weighting.
//! The component functions are pluggable; the defaults are cheap and fully
//! deterministic.

use super::graph::{GraphError, ThoughtHypergraph, ThoughtVertex, VertexId};
use crate::embeddings::{cosine, EmbeddingVector};
use std::collections::BTreeSet;

/// Weights of the three confidence components. Must be nonnegative and sum
/// to 1 (within 1e-12).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ConfidenceWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, GraphError> {
        let sum = alpha + beta + gamma;
        if alpha < 0.0 || beta < 0.0 || gamma < 0.0 || (sum - 1.0).abs() > 1e-12 {
            return Err(GraphError::InvalidDocument(format!(
                "confidence weights must be nonnegative and sum to 1, got ({alpha}, {beta}, {gamma})"
            )));
        }
        Ok(ConfidenceWeights { alpha, beta, gamma })
    }

    pub fn uniform() -> Self {
        ConfidenceWeights { alpha: 1.0 / 3.0, beta: 1.0 / 3.0, gamma: 1.0 / 3.0 }
    }
}

impl Default for ConfidenceWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

/// A confidence component: given the graph, the vertex, the raw context text
/// and its embedding, produce a score (clamped to `[0, 1]` by the caller).
pub type ComponentFn =
    Box<dyn Fn(&ThoughtHypergraph, &ThoughtVertex, &str, &EmbeddingVector) -> f64 + Send + Sync>;

pub struct ConfidenceModel {
    pub weights: ConfidenceWeights,
    relevance: ComponentFn,
    consistency: ComponentFn,
    specificity: ComponentFn,
}

impl ConfidenceModel {
    /// Default model: relevance is cosine similarity to the context
    /// embedding, consistency is the mean weight of incident hyperedges (0
    /// for an isolated vertex), and specificity grows with distinct token
    /// count, saturating at 32 tokens.
    pub fn with_weights(weights: ConfidenceWeights) -> Self {
        ConfidenceModel {
            weights,
            relevance: Box::new(|_g, v, _ctx, ctx_vec| cosine(&v.embedding, ctx_vec)),
            consistency: Box::new(|g, v, _ctx, _ctx_vec| {
                let mut sum = 0.0;
                let mut n = 0u32;
                for e in g.incident_edges(v.id) {
                    sum += e.weight;
                    n += 1;
                }
                if n == 0 {
                    0.0
                } else {
                    sum / f64::from(n)
                }
            }),
            specificity: Box::new(|_g, v, _ctx, _ctx_vec| {
                let distinct: BTreeSet<&str> = v.content.split_whitespace().collect();
                distinct.len() as f64 / 32.0
            }),
        }
    }

    /// Model with caller-supplied component functions.
    pub fn with_components(
        weights: ConfidenceWeights,
        relevance: ComponentFn,
        consistency: ComponentFn,
        specificity: ComponentFn,
    ) -> Self {
        ConfidenceModel { weights, relevance, consistency, specificity }
    }

    /// Score a vertex against a context. Each component is clamped to
    /// `[0, 1]` before weighting, so the result lies in `[0, 1]` as well.
    pub fn score(
        &self,
        graph: &ThoughtHypergraph,
        vertex: &ThoughtVertex,
        context: &str,
        context_vec: &EmbeddingVector,
    ) -> f64 {
        let rel = (self.relevance)(graph, vertex, context, context_vec).clamp(0.0, 1.0);
        let cons = (self.consistency)(graph, vertex, context, context_vec).clamp(0.0, 1.0);
        let spec = (self.specificity)(graph, vertex, context, context_vec).clamp(0.0, 1.0);
        self.weights.alpha * rel + self.weights.beta * cons + self.weights.gamma * spec
    }
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        Self::with_weights(ConfidenceWeights::uniform())
    }
}

impl std::fmt::Debug for ConfidenceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConfidenceModel").field("weights", &self.weights).finish()
    }
}

impl ThoughtHypergraph {
    /// Re-score a vertex's confidence against `context` and store the result.
    pub fn evaluate(
        &mut self,
        id: VertexId,
        context: &str,
        model: &ConfidenceModel,
    ) -> Result<f64, GraphError> {
        let context_vec = self.encoder().encode(context)?;
        let vertex = self.vertex(id).ok_or(GraphError::UnknownVertex(id))?.clone();
        let sigma = model.score(self, &vertex, context, &context_vec);
        self.set_confidence(id, sigma)?;
        Ok(sigma)
    }
}
