//! Execution event log.
//!
//! The executor narrates what it does — step boundaries, provider attempts,
//! backoff sleeps, model switches, fallbacks — as typed events. Tests assert
//! on the sequence; the CLI can print it or write it out as JSON lines.

use serde::{Deserialize, Serialize};
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ExecEvent {
    StepStart {
        step_id: String,
        at_ms: u64,
    },
    /// One provider call is about to go out.
    Attempt {
        step_id: String,
        attempt: u32,
        model: String,
    },
    /// A rate limit triggered an exponential-backoff sleep.
    Backoff {
        step_id: String,
        retries: u32,
        delay_ms: u64,
    },
    /// Quota or a fatal reply rotated the pool to another model.
    ModelSwitch {
        step_id: String,
        from: String,
        to: String,
    },
    /// All retries burned; a canned fallback result stands in.
    FallbackUsed {
        step_id: String,
    },
    StepCompleted {
        step_id: String,
        attempts: u32,
        at_ms: u64,
    },
}

impl ExecEvent {
    pub fn step_id(&self) -> &str {
        match self {
            ExecEvent::StepStart { step_id, .. }
            | ExecEvent::Attempt { step_id, .. }
            | ExecEvent::Backoff { step_id, .. }
            | ExecEvent::ModelSwitch { step_id, .. }
            | ExecEvent::FallbackUsed { step_id }
            | ExecEvent::StepCompleted { step_id, .. } => step_id,
        }
    }
}

/// Where events go. Implementations must tolerate concurrent recording.
pub trait EventSink: Send + Sync {
    fn record(&self, event: ExecEvent);
}

/// Drops everything.
#[derive(Debug, Default)]
pub struct NullSink;

impl EventSink for NullSink {
    fn record(&self, _event: ExecEvent) {}
}

/// Collects events in memory, in arrival order.
#[derive(Debug, Default)]
pub struct VecSink {
    events: Mutex<Vec<ExecEvent>>,
}

impl VecSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> Vec<ExecEvent> {
        self.events.lock().expect("event sink poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.events.lock().expect("event sink poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EventSink for VecSink {
    fn record(&self, event: ExecEvent) {
        self.events.lock().expect("event sink poisoned").push(event);
    }
}

/// One JSON object per line, in order.
pub fn to_jsonl(events: &[ExecEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_serialize_with_a_tag_field() {
        let e = ExecEvent::Backoff { step_id: "design".into(), retries: 2, delay_ms: 4861 };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"{"event":"backoff","step_id":"design","retries":2,"delay_ms":4861}"#);
        let back: ExecEvent = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn vec_sink_preserves_order_and_jsonl_is_line_per_event() {
        let sink = VecSink::new();
        sink.record(ExecEvent::StepStart { step_id: "a".into(), at_ms: 0 });
        sink.record(ExecEvent::StepCompleted { step_id: "a".into(), attempts: 1, at_ms: 5 });
        let events = sink.snapshot();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].step_id(), "a");
        let jsonl = to_jsonl(&events);
        assert_eq!(jsonl.lines().count(), 2);
        assert!(jsonl.ends_with('\n'));
    }
}
