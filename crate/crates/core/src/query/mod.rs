//! Query understanding: normalization, intent, parameters, and the plan.
//!
//! [`analyze_query`] is the front door: it normalizes the raw text, detects
//! the intent (pattern fast path, model fallback), extracts whatever
//! parameters the text names, and builds the matching execution plan.

pub mod intent;
pub mod params;
pub mod plan;

pub use intent::{detect_by_pattern, detect_intent, DetectionSource, Intent, IntentDetection, PATTERN_CONFIDENCE};
pub use params::{extract_parameters, normalize_query, PipelineParameters};
pub use plan::{plan_for, ExecutionPlan, PlanError, PlanStep, StepAction};

use crate::providers::{ProviderError, TextCompletion};
use serde::{Deserialize, Serialize};

/// Everything the query phase learned, bundled for the rest of the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAnalysis {
    /// The normalized query text — the form every later stage sees.
    pub query: String,
    pub detection: IntentDetection,
    pub parameters: PipelineParameters,
}

impl QueryAnalysis {
    /// Short human-readable digest for logs and session summaries.
    pub fn digest(&self) -> String {
        format!(
            "intent={} (confidence {:.2}, via {:?}); {} parameters extracted",
            self.detection.intent,
            self.detection.confidence,
            self.detection.source,
            self.parameters.populated()
        )
    }
}

/// Run the whole query phase. The provider is only consulted when the
/// pattern fast path misses.
pub fn analyze_query(
    raw_query: &str,
    provider: &mut dyn TextCompletion,
) -> Result<(QueryAnalysis, ExecutionPlan), ProviderError> {
    let query = normalize_query(raw_query);
    let detection = detect_intent(&query, provider)?;
    let parameters = extract_parameters(&query);
    let plan = plan_for(detection.intent);
    debug_assert!(plan.validate().is_ok(), "built-in plan shapes are valid");
    Ok((QueryAnalysis { query, detection, parameters }, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{DirectCompletion, MockBackend, ModelHandle};
    use crate::spe::TargetSystem;
    use std::sync::Arc;

    #[test]
    fn analyze_query_wires_the_pieces_together() {
        // Pattern fast path: the mock should never be called.
        let mock = Arc::new(MockBackend::echo());
        let mut p = DirectCompletion {
            backend: mock.clone(),
            model: ModelHandle::new("mock", "mock-model", Default::default()),
        };
        let raw = "Create a Spark streaming pipeline reading from kafka topic \"metrics\" with 60-second tumbling windows";
        let (analysis, plan) = analyze_query(raw, &mut p).unwrap();
        assert_eq!(mock.call_count(), 0);
        assert_eq!(analysis.detection.intent, Intent::PipelineDesign);
        assert_eq!(analysis.parameters.target_system, Some(TargetSystem::Spark));
        assert_eq!(analysis.parameters.source_topic.as_deref(), Some("metrics"));
        assert_eq!(analysis.parameters.window_seconds, Some(60));
        assert_eq!(plan.len(), 6);
        assert!(analysis.digest().contains("pipeline_design"));
    }
}
