//! Iterative hypergraph construction and design extraction.
//!
//! Construction seeds the graph with system and user vertices (plus one
//! vertex per retrieved knowledge document), then alternates rounds of
//! provider-backed generation: analysis vertices per configured aspect, plan
//! vertices per plan component, similarity-clustered hyperedges, a traversal
//! step (confidence-guided on odd rounds, dependency-relation on even
//! rounds), and refinement of the traversal's picks. The loop stops early
//! when confidences settle or a round adds nothing new.

use super::cluster::build_hyperedges;
use super::confidence::ConfidenceModel;
use super::graph::{GraphError, RelationLabel, ThoughtHypergraph, VertexId, VertexType};
use super::weights::{hyperedge_weight, mean_pairwise_similarity, RelevanceTable};
use crate::embeddings::Encoder;
use crate::providers::{ChatRequest, ProviderError, TextCompletion};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Knobs for the construction loop. The defaults describe a small,
/// desk-scale graph: four analysis aspects, two plan components, two rounds.
pub struct ConstructConfig {
    pub max_iterations: u32,
    pub model: ConfidenceModel,
    pub cluster_threshold: f64,
    /// Confidence movement below this between rounds counts as converged.
    pub convergence_epsilon: f64,
    pub analysis_aspects: Vec<String>,
    pub plan_components: Vec<String>,
    /// How many prior thoughts are quoted back into generation prompts.
    pub max_priors: usize,
    pub relevance: RelevanceTable,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        ConstructConfig {
            max_iterations: 2,
            model: ConfidenceModel::default(),
            cluster_threshold: super::cluster::DEFAULT_CLUSTER_THRESHOLD,
            convergence_epsilon: 1e-3,
            analysis_aspects: vec![
                "data sources and sinks".into(),
                "processing operations and windowing".into(),
                "state management and fault tolerance".into(),
                "parallelism and performance".into(),
            ],
            plan_components: vec!["architecture outline".into(), "implementation steps".into()],
            max_priors: 3,
            relevance: RelevanceTable::default(),
        }
    }
}

impl ConstructConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.max_iterations < 1 {
            return Err(GraphError::InvalidDocument("max_iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.cluster_threshold) {
            return Err(GraphError::InvalidDocument(format!(
                "cluster threshold must lie in [0, 1], got {}",
                self.cluster_threshold
            )));
        }
        Ok(())
    }
}

/// The extracted result: the best design/plan vertex plus everything it
/// reaches over dependency and data-flow edges, rendered for humans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDesign {
    pub summary: String,
    pub vertex_ids: Vec<VertexId>,
    pub rationale: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ConstructError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("provider failure during graph construction: {0}")]
    Provider(#[from] ProviderError),
    #[error("graph holds no design or plan vertex to extract")]
    NoDesignVertex,
}

impl ThoughtHypergraph {
    /// Generate one new vertex from the provider: the prompt carries the
    /// context plus up to `max_priors` prior thought contents, and the reply
    /// becomes the vertex content.
    pub fn generate(
        &mut self,
        context: &str,
        priors: &[VertexId],
        provider: &mut dyn TextCompletion,
        vtype: VertexType,
    ) -> Result<VertexId, ConstructError> {
        let mut prior_lines = String::new();
        for id in priors {
            let v = self.vertex(*id).ok_or(GraphError::UnknownVertex(*id))?;
            prior_lines.push_str("- ");
            prior_lines.push_str(v.content.lines().next().unwrap_or(""));
            prior_lines.push('\n');
        }
        let system_text = format!(
            "You are contributing one {vtype} vertex to a pipeline-design thought hypergraph.\n\
             vertex-type: {vtype}\n\
             Reply with the vertex content only - no preamble."
        );
        let user_text = if prior_lines.is_empty() {
            context.to_string()
        } else {
            format!("{context}\n\nPrior thoughts:\n{prior_lines}")
        };
        let response = provider.complete(&ChatRequest::new(system_text, user_text))?;
        Ok(self.add_vertex(response.content, vtype)?)
    }

    /// Refine an existing vertex: the provider rewrites its content in light
    /// of the context, the rewrite is added as a new vertex of the same type,
    /// and a directed refinement edge links original to refinement. The
    /// original vertex is kept.
    pub fn refine(
        &mut self,
        id: VertexId,
        context: &str,
        provider: &mut dyn TextCompletion,
        relevance: &RelevanceTable,
    ) -> Result<VertexId, ConstructError> {
        let original = self.vertex(id).ok_or(GraphError::UnknownVertex(id))?;
        let vtype = original.vtype;
        let system_text = format!(
            "Refine the following {vtype} thought for a stream-pipeline design.\n\
             Keep what is right, sharpen what is vague. Reply with the refined content only."
        );
        let user_text = format!("Context: {context}\n\nThought to refine:\n{}", original.content);
        let response = provider.complete(&ChatRequest::new(system_text, user_text))?;
        let refined = self.add_vertex(response.content, vtype)?;
        let sources = BTreeSet::from([id]);
        let targets = BTreeSet::from([refined]);
        let weight = hyperedge_weight(self, &sources, &targets, &RelationLabel::Refinement, relevance)?;
        self.connect(sources, targets, RelationLabel::Refinement, weight)?;
        Ok(refined)
    }

    /// Up to `k` vertex ids ranked by confidence (descending), ties towards
    /// the smaller id. Used to pick prompt priors deterministically.
    fn top_confidence(&self, k: usize) -> Vec<VertexId> {
        let mut ids: Vec<(f64, VertexId)> = self.vertices().map(|v| (v.confidence, v.id)).collect();
        ids.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        ids.into_iter().take(k).map(|(_, id)| id).collect()
    }
}

/// Build a thought hypergraph for a user request under the given system
/// constraints, optionally seeded with retrieved knowledge documents, and
/// extract the best design from it.
pub fn construct(
    user_request: &str,
    system_constraints: &str,
    knowledge_docs: &[String],
    provider: &mut dyn TextCompletion,
    encoder: Encoder,
    config: &ConstructConfig,
) -> Result<(ThoughtHypergraph, PipelineDesign), ConstructError> {
    config.validate()?;
    let mut graph = ThoughtHypergraph::new(encoder);
    let context = user_request;

    // Seed vertices: system constraints, user request, retrieved documents.
    let system_v = graph.add_vertex(system_constraints, VertexType::System)?;
    let user_v = graph.add_vertex(user_request, VertexType::User)?;
    let mut rag_vs = Vec::new();
    for doc in knowledge_docs {
        rag_vs.push(graph.add_vertex(doc.clone(), VertexType::Rag)?);
    }

    // Seed edges: one undirected context edge over {system, user}, one
    // directed knowledge edge from each document into the seed pair.
    let seed_pair = BTreeSet::from([system_v, user_v]);
    let w = mean_pairwise_similarity(&graph, &seed_pair)?;
    graph.connect(seed_pair.clone(), BTreeSet::new(), RelationLabel::Context, w)?;
    for &rag in &rag_vs {
        let sources = BTreeSet::from([rag]);
        let w = hyperedge_weight(&graph, &sources, &seed_pair, &RelationLabel::Knowledge, &config.relevance)?;
        graph.connect(sources, seed_pair.clone(), RelationLabel::Knowledge, w)?;
    }
    for id in graph.vertex_ids() {
        graph.evaluate(id, context, &config.model)?;
    }

    let mut current = user_v;
    for t in 1..=config.max_iterations {
        let before_count = graph.vertex_count();
        let before_conf: Vec<(VertexId, f64)> =
            graph.vertices().map(|v| (v.id, v.confidence)).collect();

        // Analysis vertices, one per aspect.
        let priors = graph.top_confidence(config.max_priors);
        let mut analyses = Vec::new();
        for aspect in &config.analysis_aspects {
            let ctx = format!("{context}\n\nSystem constraints: {system_constraints}\naspect: {aspect}");
            let v = graph.generate(&ctx, &priors, provider, VertexType::Analysis)?;
            graph.evaluate(v, context, &config.model)?;
            analyses.push(v);
        }

        // Plan vertices, one per component, fed by this round's analyses.
        for component in &config.plan_components {
            let ctx = format!("{context}\n\nSystem constraints: {system_constraints}\nplan-component: {component}");
            let mut priors = analyses.clone();
            priors.truncate(config.max_priors);
            let v = graph.generate(&ctx, &priors, provider, VertexType::Plan)?;
            graph.evaluate(v, context, &config.model)?;
        }

        // Cluster everything into this round's hyperedges.
        let all_ids = graph.vertex_ids();
        build_hyperedges(&mut graph, &all_ids, config.cluster_threshold)?;

        // Traverse: confidence-guided on odd rounds, dependency edges on even.
        let next_vertices: Vec<VertexId> = if t % 2 == 1 {
            graph.traverse_confidence(current).into_iter().collect()
        } else {
            graph.traverse_relation(current, &RelationLabel::Dependency).into_iter().collect()
        };
        for &v in &next_vertices {
            let refined = graph.refine(v, context, provider, &config.relevance)?;
            graph.evaluate(refined, context, &config.model)?;
        }
        if let Some(&first) = next_vertices.first() {
            current = first;
        }

        // Re-score everything now that the edge set moved.
        let mut max_delta = 0.0f64;
        for (id, old) in &before_conf {
            let new = graph.evaluate(*id, context, &config.model)?;
            max_delta = max_delta.max((new - old).abs());
        }
        let added_vertices = graph.vertex_count() > before_count;
        if max_delta < config.convergence_epsilon || !added_vertices {
            break;
        }
    }

    let design = extract_optimal_design(&graph)?;
    Ok((graph, design))
}

/// Select the highest-confidence design or plan vertex (ties towards the
/// smallest id) and collect every vertex reachable from it over dependency
/// and data-flow hyperedges — following direction on directed edges,
/// co-membership on undirected ones. Renders a human-readable summary.
pub fn extract_optimal_design(graph: &ThoughtHypergraph) -> Result<PipelineDesign, ConstructError> {
    let root = graph
        .vertices()
        .filter(|v| matches!(v.vtype, VertexType::Design | VertexType::Plan))
        .map(|v| (v.confidence, v.id))
        .fold(None::<(f64, VertexId)>, |best, (sigma, id)| match best {
            Some((bs, bid)) if sigma < bs || (sigma == bs && id > bid) => Some((bs, bid)),
            _ => Some((sigma, id)),
        })
        .map(|(_, id)| id)
        .ok_or(ConstructError::NoDesignVertex)?;

    // Breadth-first closure over dependency/data-flow edges, visiting
    // neighbours in ascending id order for a stable output ordering.
    let mut visited = BTreeSet::from([root]);
    let mut order = vec![root];
    let mut frontier = vec![root];
    while let Some(v) = frontier.pop() {
        let mut next: BTreeSet<VertexId> = BTreeSet::new();
        for e in graph.incident_edges(v) {
            if !matches!(e.relation, RelationLabel::Dependency | RelationLabel::DataFlow) {
                continue;
            }
            if e.directed {
                if e.sources.contains(&v) {
                    next.extend(e.targets.iter().copied());
                }
            } else {
                next.extend(e.sources.iter().copied());
                next.extend(e.targets.iter().copied());
            }
        }
        for n in next {
            if visited.insert(n) {
                order.push(n);
                frontier.push(n);
            }
        }
        frontier.sort_unstable_by(|a, b| b.cmp(a)); // pop smallest first
    }

    let root_vertex = graph.vertex(root).expect("root exists");
    let mut summary = format!(
        "Pipeline design rooted at {} ({}, confidence {:.3}).\n",
        root, root_vertex.vtype, root_vertex.confidence
    );
    for id in &order {
        let v = graph.vertex(*id).expect("reachable vertex exists");
        let first_line = v.content.lines().next().unwrap_or("");
        let clipped: String = first_line.chars().take(120).collect();
        summary.push_str(&format!("- [{}] {}: {}\n", v.vtype, id, clipped));
    }
    let rationale = format!(
        "Selected the highest-confidence design/plan vertex out of {} vertices; {} vertices are reachable over dependency/data-flow edges.",
        graph.vertex_count(),
        order.len()
    );
    Ok(PipelineDesign { summary, vertex_ids: order, rationale })
}
