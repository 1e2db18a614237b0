//! Final-response assembly: one ordered section per executed step, plus an
//! architecture section drawn from the graph's design vertices.
//!
//! The output is a pure function of its inputs — same plan, graph, and
//! results always render byte-identical text — so golden tests can compare
//! whole documents.

use crate::executor::StepResult;
use crate::hgot::{ThoughtHypergraph, VertexType};
use crate::query::ExecutionPlan;
use std::collections::BTreeMap;

/// Marker prefixed to sections whose step ran out of providers and shipped
/// the canned fallback instead of a model answer.
pub const DEGRADED_MARKER: &str = "> [degraded result: provider fallback]";

fn first_line(text: &str) -> &str {
    text.lines().next().unwrap_or("")
}

/// Render the user-facing response document.
///
/// Steps appear in plan order; a step missing from `results` (which a
/// completed run never produces) renders as explicitly absent rather than
/// being silently skipped.
pub fn synthesize_response(
    plan: &ExecutionPlan,
    graph: &ThoughtHypergraph,
    results: &BTreeMap<String, StepResult>,
) -> String {
    let mut doc = String::new();
    doc.push_str("# Pipeline session response\n");

    for (n, step) in plan.steps.iter().enumerate() {
        doc.push_str(&format!("\n## {}. {}\n\n", n + 1, step.action));
        match results.get(&step.id) {
            Some(result) => {
                if result.fallback {
                    doc.push_str(DEGRADED_MARKER);
                    doc.push('\n');
                    doc.push('\n');
                }
                doc.push_str(result.content.trim_end());
                doc.push('\n');
            }
            None => doc.push_str("(no result recorded for this step)\n"),
        }
    }

    doc.push_str("\n## Architecture\n\n");
    let mut design_lines = 0;
    for v in graph.vertices() {
        if matches!(v.vtype, VertexType::Design | VertexType::Plan) {
            doc.push_str(&format!("- {} (confidence {:.3}): {}\n", v.id, v.confidence, first_line(&v.content)));
            design_lines += 1;
        }
    }
    if design_lines == 0 {
        doc.push_str("(the reasoning graph recorded no design vertices)\n");
    }
    doc
}
