//! Intent detection: fast regex path with a model-backed fallback.
//!
//! The fast path scans a versioned pattern table (see `data/
//! intent_patterns.json`); a hit classifies the query instantly with fixed
//! high confidence and no provider round-trip. Queries that match nothing go
//! to the model with a strict single-JSON-object reply contract; replies
//! that fail to parse are re-asked a bounded number of times before the
//! detector gives up and labels the query `other`.

use crate::providers::{ChatRequest, ProviderError, TextCompletion};
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::LazyLock;

/// What the user wants from the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    PipelineDesign,
    Explanation,
    Deployment,
    Optimization,
    Other,
}

impl Intent {
    pub const ALL: [Intent; 5] =
        [Intent::PipelineDesign, Intent::Explanation, Intent::Deployment, Intent::Optimization, Intent::Other];

    pub fn name(&self) -> &'static str {
        match self {
            Intent::PipelineDesign => "pipeline_design",
            Intent::Explanation => "explanation",
            Intent::Deployment => "deployment",
            Intent::Optimization => "optimization",
            Intent::Other => "other",
        }
    }

    fn from_name(name: &str) -> Option<Intent> {
        Self::ALL.into_iter().find(|i| i.name() == name)
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which path produced the classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionSource {
    Pattern,
    Model,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentDetection {
    pub intent: Intent,
    pub confidence: f64,
    pub source: DetectionSource,
}

/// Confidence assigned to fast-path pattern hits.
pub const PATTERN_CONFIDENCE: f64 = 0.95;

/// How many malformed model replies are tolerated before falling back.
pub const MAX_DETECT_ATTEMPTS: u32 = 3;

const PATTERN_FILE: &str = include_str!("../../data/intent_patterns.json");

#[derive(Deserialize)]
struct PatternFile {
    version: u32,
    patterns: Vec<PatternEntry>,
}

#[derive(Deserialize)]
struct PatternEntry {
    intent: String,
    pattern: String,
}

static PATTERNS: LazyLock<Vec<(Intent, Regex)>> = LazyLock::new(|| {
    let file: PatternFile = serde_json::from_str(PATTERN_FILE).expect("pattern file parses");
    assert_eq!(file.version, 1, "unknown intent pattern file version");
    file.patterns
        .into_iter()
        .map(|e| {
            let intent = Intent::from_name(&e.intent)
                .unwrap_or_else(|| panic!("pattern file names unknown intent {:?}", e.intent));
            let re = RegexBuilder::new(&e.pattern)
                .case_insensitive(true)
                .build()
                .unwrap_or_else(|err| panic!("pattern {:?} does not compile: {err}", e.pattern));
            (intent, re)
        })
        .collect()
});

/// Fast path only: first pattern hit, in table order.
pub fn detect_by_pattern(query: &str) -> Option<IntentDetection> {
    for (intent, re) in PATTERNS.iter() {
        if re.is_match(query) {
            return Some(IntentDetection {
                intent: *intent,
                confidence: PATTERN_CONFIDENCE,
                source: DetectionSource::Pattern,
            });
        }
    }
    None
}

#[derive(Deserialize)]
struct ModelVerdict {
    intent: String,
    confidence: f64,
}

/// Strip a markdown code fence if the model wrapped its JSON in one.
fn strip_fence(reply: &str) -> &str {
    let trimmed = reply.trim();
    let Some(rest) = trimmed.strip_prefix("```") else { return trimmed };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    let rest = rest.strip_suffix("```").unwrap_or(rest);
    rest.trim()
}

fn parse_verdict(reply: &str) -> Option<IntentDetection> {
    let verdict: ModelVerdict = serde_json::from_str(strip_fence(reply)).ok()?;
    let intent = Intent::from_name(&verdict.intent)?;
    if !(0.0..=1.0).contains(&verdict.confidence) {
        return None;
    }
    Some(IntentDetection { intent, confidence: verdict.confidence, source: DetectionSource::Model })
}

/// Full detection: fast path, then up to [`MAX_DETECT_ATTEMPTS`] model
/// round-trips, then the `other` fallback. Provider errors propagate — the
/// retry here is only for well-delivered replies that break the JSON
/// contract.
pub fn detect_intent(
    query: &str,
    provider: &mut dyn TextCompletion,
) -> Result<IntentDetection, ProviderError> {
    if let Some(hit) = detect_by_pattern(query) {
        return Ok(hit);
    }
    let names: Vec<&str> = Intent::ALL.iter().map(Intent::name).collect();
    let system_text = format!(
        "Classify the user's request about stream processing.\n\
         Reply with exactly one JSON object and nothing else:\n\
         {{\"intent\": <one of {names:?}>, \"confidence\": <number in [0,1]>}}"
    );
    for attempt in 0..MAX_DETECT_ATTEMPTS {
        let user_text = if attempt == 0 {
            query.to_string()
        } else {
            format!("{query}\n\nYour previous reply was not a single JSON object. JSON only.")
        };
        let response = provider.complete(&ChatRequest::new(system_text.clone(), user_text))?;
        if let Some(verdict) = parse_verdict(&response.content) {
            return Ok(verdict);
        }
    }
    Ok(IntentDetection { intent: Intent::Other, confidence: 0.0, source: DetectionSource::Fallback })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{DirectCompletion, MockBackend, ModelHandle, ScriptEvent};
    use std::sync::Arc;

    fn provider(events: Vec<ScriptEvent>) -> (Arc<MockBackend>, DirectCompletion) {
        let mock = Arc::new(MockBackend::from_events(events));
        let p = DirectCompletion {
            backend: mock.clone(),
            model: ModelHandle::new("mock", "mock-model", Default::default()),
        };
        (mock, p)
    }

    #[test]
    fn pattern_path_classifies_the_obvious_cases() {
        let cases = [
            ("Create a streaming pipeline that counts words from Kafka", Intent::PipelineDesign),
            ("build a flink application that filters click events", Intent::PipelineDesign),
            ("How does checkpointing interact with exactly-once sinks?", Intent::Explanation),
            ("explain the difference between tumbling and sliding windows", Intent::Explanation),
            ("Deploy the word count job to the staging cluster", Intent::Deployment),
            ("optimize my topology, the window operator is the bottleneck", Intent::Optimization),
        ];
        for (query, want) in cases {
            let got = detect_by_pattern(query).unwrap_or_else(|| panic!("no pattern hit for {query:?}"));
            assert_eq!(got.intent, want, "query {query:?}");
            assert_eq!(got.confidence, PATTERN_CONFIDENCE);
            assert_eq!(got.source, DetectionSource::Pattern);
        }
    }

    #[test]
    fn pattern_order_prefers_explanation_over_design_for_questions() {
        // Contains both "how" (explanation) and "create ... pipeline"
        // (design); the table lists explanation first.
        let got = detect_by_pattern("How would I create a streaming pipeline for word counts?").unwrap();
        assert_eq!(got.intent, Intent::Explanation);
    }

    #[test]
    fn model_path_parses_a_clean_json_verdict() {
        let (mock, mut p) = provider(vec![ScriptEvent::Respond(
            r#"{"intent": "optimization", "confidence": 0.8}"#.into(),
        )]);
        let got = detect_intent("the thing is slow somehow??", &mut p).unwrap();
        assert_eq!(got.intent, Intent::Optimization);
        assert_eq!(got.confidence, 0.8);
        assert_eq!(got.source, DetectionSource::Model);
        assert_eq!(mock.call_count(), 1);
    }

    #[test]
    fn model_path_tolerates_a_fenced_reply() {
        let (_, mut p) = provider(vec![ScriptEvent::Respond(
            "```json\n{\"intent\": \"deployment\", \"confidence\": 0.6}\n```".into(),
        )]);
        let got = detect_intent("ship it to the cluster thing", &mut p).unwrap();
        assert_eq!(got.intent, Intent::Deployment);
        assert_eq!(got.source, DetectionSource::Model);
    }

    #[test]
    fn malformed_replies_are_reasked_then_fall_back_to_other() {
        let (mock, mut p) = provider(vec![
            ScriptEvent::Respond("sure! it looks like a deployment thing".into()),
            ScriptEvent::Respond(r#"{"intent": "no_such_intent", "confidence": 0.9}"#.into()),
            ScriptEvent::Respond(r#"{"intent": "deployment", "confidence": 7.0}"#.into()),
        ]);
        let got = detect_intent("hmm", &mut p).unwrap();
        assert_eq!(got.intent, Intent::Other);
        assert_eq!(got.confidence, 0.0);
        assert_eq!(got.source, DetectionSource::Fallback);
        assert_eq!(mock.call_count(), MAX_DETECT_ATTEMPTS as usize);
        // The re-ask carries a correction nudge.
        let transcript = mock.transcript();
        assert!(transcript[1].request.user_text.contains("JSON only"));
    }

    #[test]
    fn provider_errors_propagate_instead_of_falling_back() {
        use crate::providers::ProviderErrorKind;
        let (_, mut p) = provider(vec![ScriptEvent::Fail(ProviderErrorKind::RateLimit, "slow down".into())]);
        let err = detect_intent("hmm", &mut p).unwrap_err();
        assert_eq!(err.kind, ProviderErrorKind::RateLimit);
    }
}
