//! Resilient execution: retries, backoff, model rotation, and fallbacks.
//!
//! The retry loop distinguishes four failure kinds and treats each the way
//! the provider expects: rate limits get jittered exponential backoff, quota
//! exhaustion rotates to the next model immediately, transient faults are
//! simply retried, and fatal replies also rotate (the model clearly cannot
//! serve the request as posed). When the retry budget runs out the caller
//! still gets a usable — clearly labelled — fallback result, never a panic
//! mid-session.
//!
//! All timing flows through [`clock::Clock`] and all randomness through a
//! per-step seeded generator, so offline runs replay bit-for-bit.

pub mod clock;
pub mod events;
pub mod scheduler;

pub use clock::{Clock, SystemClock, VirtualClock};
pub use events::{to_jsonl, EventSink, ExecEvent, NullSink, VecSink};
pub use scheduler::{run_plan, ExecError, ModelStepRunner, NullResultSink, ResultSink, StepResult, StepRunner};

use crate::providers::{Capability, ChatRequest, ChatResponse, ModelPool, ProviderErrorKind, TextCompletion};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Retry knobs. The defaults match production behaviour; tests usually zero
/// out the base delay or swap in a virtual clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub base_delay_ms: u64,
    pub max_retries: u32,
    /// Seed for backoff jitter; per-step generators derive from it.
    pub seed: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { base_delay_ms: 1000, max_retries: 5, seed: 0 }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// The jitter generator for one step: derived from the policy seed and the
/// step tag, so concurrent steps draw from independent streams and any
/// step's delays can be replayed in isolation.
pub fn step_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(tag.as_bytes()))
}

/// One backoff delay: `base · 2^retries · (0.5 + u)` milliseconds, with `u`
/// drawn uniformly from `[0, 1)`. The jitter factor spans `[0.5, 1.5)`, so
/// consecutive clients never thundering-herd on the same boundary.
pub fn backoff_delay_ms(base_delay_ms: u64, retries: u32, rng: &mut dyn RngCore) -> u64 {
    let jitter: f64 = rng.gen::<f64>();
    (base_delay_ms as f64 * 2f64.powi(retries as i32) * (0.5 + jitter)) as u64
}

/// What a retried call produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryOutcome {
    pub response: ChatResponse,
    /// Label of the model that answered; `None` for fallback results.
    pub model: Option<String>,
    /// Provider calls actually made.
    pub attempts: u32,
    pub fallback: bool,
}

/// Canned stand-in when every retry failed. Clearly marked so it can never
/// be mistaken for model output downstream.
pub fn generate_fallback_result(request: &ChatRequest, attempts: u32) -> ChatResponse {
    let head: String = request.user_text.lines().next().unwrap_or("").chars().take(80).collect();
    ChatResponse {
        content: format!(
            "[fallback] No provider could complete this step after {attempts} attempts.\n\
             Request: {head}\n\
             The result is a placeholder; re-run the step once a provider is available."
        ),
        finish_reason: "fallback".into(),
    }
}

/// Drive one request through the pool until success, fallback, or — never —
/// a panic. `tag` identifies the step in events and seeds its jitter stream.
pub fn run_with_retry(
    pool: &ModelPool,
    capability: Capability,
    request: &ChatRequest,
    policy: &RetryPolicy,
    clock: &dyn Clock,
    events: &dyn EventSink,
    tag: &str,
) -> RetryOutcome {
    let mut rng = step_rng(policy.seed, tag);
    let mut retries: u32 = 0;
    while retries < policy.max_retries {
        let index = pool.index_for_capability(capability);
        let model_label = pool.models()[index].label();
        events.record(ExecEvent::Attempt {
            step_id: tag.to_string(),
            attempt: retries + 1,
            model: model_label.clone(),
        });
        match pool.send_with_capability(capability, request) {
            Ok((response, _)) => {
                return RetryOutcome { response, model: Some(model_label), attempts: retries + 1, fallback: false };
            }
            Err(err) => match err.kind {
                ProviderErrorKind::RateLimit => {
                    let delay_ms = backoff_delay_ms(policy.base_delay_ms, retries, &mut rng);
                    events.record(ExecEvent::Backoff { step_id: tag.to_string(), retries, delay_ms });
                    clock.sleep(delay_ms);
                    retries += 1;
                }
                ProviderErrorKind::QuotaExceeded | ProviderErrorKind::Fatal => {
                    let from = model_label;
                    pool.switch_to_next_model();
                    let to = pool.active().label();
                    events.record(ExecEvent::ModelSwitch { step_id: tag.to_string(), from, to });
                    retries += 1;
                }
                ProviderErrorKind::Transient => {
                    retries += 1;
                }
            },
        }
    }
    events.record(ExecEvent::FallbackUsed { step_id: tag.to_string() });
    RetryOutcome {
        response: generate_fallback_result(request, policy.max_retries),
        model: None,
        attempts: policy.max_retries,
        fallback: true,
    }
}

/// A [`TextCompletion`] that hides the whole retry/rotation machinery behind
/// one `complete` call. Each call gets its own tag (`<base>#<n>`), so jitter
/// streams stay independent and replayable.
pub struct RetryingProvider {
    pool: Arc<ModelPool>,
    policy: RetryPolicy,
    clock: Arc<dyn Clock>,
    events: Arc<dyn EventSink>,
    capability: Capability,
    base_tag: String,
    calls: AtomicU64,
}

impl RetryingProvider {
    pub fn new(
        pool: Arc<ModelPool>,
        policy: RetryPolicy,
        clock: Arc<dyn Clock>,
        events: Arc<dyn EventSink>,
        capability: Capability,
        base_tag: impl Into<String>,
    ) -> Self {
        RetryingProvider { pool, policy, clock, events, capability, base_tag: base_tag.into(), calls: AtomicU64::new(0) }
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl TextCompletion for RetryingProvider {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, crate::providers::ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        let tag = format!("{}#{n}", self.base_tag);
        let outcome = run_with_retry(
            &self.pool,
            self.capability,
            request,
            &self.policy,
            self.clock.as_ref(),
            self.events.as_ref(),
            &tag,
        );
        Ok(outcome.response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{
        initialize_models, MockBackend, ModelHandle, ProviderError, ProviderErrorKind, ScriptEvent,
    };
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn handle(id: &str) -> ModelHandle {
        ModelHandle::new("mock", id, BTreeSet::new())
    }

    /// `n` models rotating over one scripted backend. Scripts are consumed
    /// in global call order, whichever model is active.
    fn scripted_pool(n: usize, events: Vec<ScriptEvent>) -> ModelPool {
        let handles = (0..n).map(|i| handle(&format!("m{i}"))).collect();
        let mut pool = initialize_models(handles, vec![]).unwrap();
        pool.register_backend("mock", Arc::new(MockBackend::from_events(events)));
        pool
    }

    fn zero_delay_policy() -> RetryPolicy {
        RetryPolicy { base_delay_ms: 0, ..RetryPolicy::default() }
    }

    #[test]
    fn backoff_doubles_and_keeps_jitter_in_half_open_band() {
        let base = 1000u64;
        for retries in 0..5u32 {
            let mut rng = step_rng(7, "band-check");
            for _ in 0..2000 {
                let d = backoff_delay_ms(base, retries, &mut rng);
                let scale = base as f64 * 2f64.powi(retries as i32);
                assert!(d as f64 >= scale * 0.5, "retries={retries} d={d}");
                assert!((d as f64) < scale * 1.5, "retries={retries} d={d}");
            }
        }
    }

    #[test]
    fn backoff_replays_exactly_from_the_derived_generator() {
        let policy = RetryPolicy::default();
        let mut expected_rng = step_rng(policy.seed, "replay");
        let expected: Vec<u64> = (0..5u32)
            .map(|r| {
                let u: f64 = expected_rng.gen();
                (policy.base_delay_ms as f64 * 2f64.powi(r as i32) * (0.5 + u)) as u64
            })
            .collect();
        let mut rng = step_rng(policy.seed, "replay");
        let got: Vec<u64> = (0..5u32).map(|r| backoff_delay_ms(policy.base_delay_ms, r, &mut rng)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn distinct_tags_draw_from_distinct_streams() {
        let mut a = step_rng(0, "step-a");
        let mut b = step_rng(0, "step-b");
        let da: Vec<u64> = (0..4).map(|r| backoff_delay_ms(1000, r, &mut a)).collect();
        let db: Vec<u64> = (0..4).map(|r| backoff_delay_ms(1000, r, &mut b)).collect();
        assert_ne!(da, db);
    }

    #[test]
    fn rate_limits_back_off_and_eventually_succeed() {
        let pool = scripted_pool(1, vec![
            ScriptEvent::Fail(ProviderErrorKind::RateLimit, "429".into()),
            ScriptEvent::Fail(ProviderErrorKind::RateLimit, "429".into()),
            ScriptEvent::Respond("answer".into()),
        ]);
        let clock = VirtualClock::default();
        let sink = VecSink::new();
        let outcome = run_with_retry(
            &pool,
            Capability::General,
            &ChatRequest::new("s", "u"),
            &zero_delay_policy(),
            &clock,
            &sink,
            "step",
        );
        assert!(!outcome.fallback);
        assert_eq!(outcome.response.content, "answer");
        assert_eq!(outcome.attempts, 3);
        let backoffs: Vec<_> = sink
            .snapshot()
            .into_iter()
            .filter(|e| matches!(e, ExecEvent::Backoff { .. }))
            .collect();
        assert_eq!(backoffs.len(), 2);
    }

    #[test]
    fn rate_limit_sleeps_follow_the_backoff_law_on_the_virtual_clock() {
        let pool = scripted_pool(1, vec![
            ScriptEvent::Fail(ProviderErrorKind::RateLimit, "429".into()),
            ScriptEvent::Fail(ProviderErrorKind::RateLimit, "429".into()),
            ScriptEvent::Fail(ProviderErrorKind::RateLimit, "429".into()),
            ScriptEvent::Respond("late answer".into()),
        ]);
        let policy = RetryPolicy { base_delay_ms: 1000, max_retries: 5, seed: 99 };
        let clock = VirtualClock::default();
        let outcome =
            run_with_retry(&pool, Capability::General, &ChatRequest::new("s", "u"), &policy, &clock, &NullSink, "t");
        assert!(!outcome.fallback);
        // The virtual clock accumulated exactly the three drawn delays.
        let mut rng = step_rng(policy.seed, "t");
        let want: u64 = (0..3u32).map(|r| backoff_delay_ms(policy.base_delay_ms, r, &mut rng)).sum();
        assert_eq!(clock.now_ms(), want);
    }

    #[test]
    fn quota_rotates_without_sleeping() {
        let pool = scripted_pool(2, vec![
            ScriptEvent::Fail(ProviderErrorKind::QuotaExceeded, "quota".into()),
            ScriptEvent::Respond("from the backup".into()),
        ]);
        let clock = VirtualClock::default();
        let sink = VecSink::new();
        let outcome = run_with_retry(
            &pool,
            Capability::General,
            &ChatRequest::new("s", "u"),
            &RetryPolicy::default(),
            &clock,
            &sink,
            "step",
        );
        assert!(!outcome.fallback);
        assert_eq!(clock.now_ms(), 0, "quota must not sleep");
        assert!(sink.snapshot().iter().any(|e| matches!(e, ExecEvent::ModelSwitch { .. })));
        assert_eq!(pool.current_index(), 1);
    }

    #[test]
    fn fatal_consumes_a_retry_and_rotates() {
        let pool = scripted_pool(2, vec![
            ScriptEvent::Fail(ProviderErrorKind::Fatal, "bad request".into()),
            ScriptEvent::Respond("ok".into()),
        ]);
        let sink = VecSink::new();
        let outcome = run_with_retry(
            &pool,
            Capability::General,
            &ChatRequest::new("s", "u"),
            &RetryPolicy::default(),
            &VirtualClock::default(),
            &sink,
            "step",
        );
        assert!(!outcome.fallback);
        assert_eq!(outcome.attempts, 2);
        assert!(sink.snapshot().iter().any(|e| matches!(e, ExecEvent::ModelSwitch { .. })));
    }

    #[test]
    fn transient_errors_retry_in_place() {
        let pool = scripted_pool(1, vec![
            ScriptEvent::Fail(ProviderErrorKind::Transient, "503".into()),
            ScriptEvent::Respond("recovered".into()),
        ]);
        let clock = VirtualClock::default();
        let sink = VecSink::new();
        let outcome = run_with_retry(
            &pool,
            Capability::General,
            &ChatRequest::new("s", "u"),
            &RetryPolicy::default(),
            &clock,
            &sink,
            "step",
        );
        assert!(!outcome.fallback);
        assert_eq!(outcome.attempts, 2);
        assert_eq!(clock.now_ms(), 0);
        assert_eq!(pool.current_index(), 0, "transient must not rotate");
        assert!(!sink.snapshot().iter().any(|e| matches!(e, ExecEvent::ModelSwitch { .. })));
    }

    #[test]
    fn exhausted_retries_yield_a_labelled_fallback_after_exactly_max_attempts() {
        let fails = vec![ScriptEvent::Fail(ProviderErrorKind::QuotaExceeded, "quota".into()); 5];
        let pool = scripted_pool(1, fails);
        let sink = VecSink::new();
        let outcome = run_with_retry(
            &pool,
            Capability::General,
            &ChatRequest::new("s", "the user asked for a pipeline"),
            &RetryPolicy::default(),
            &VirtualClock::default(),
            &sink,
            "step",
        );
        assert!(outcome.fallback);
        assert_eq!(outcome.attempts, 5);
        assert_eq!(outcome.model, None);
        assert!(outcome.response.content.starts_with("[fallback]"));
        assert_eq!(outcome.response.finish_reason, "fallback");
        let attempts = sink.snapshot().iter().filter(|e| matches!(e, ExecEvent::Attempt { .. })).count();
        assert_eq!(attempts, 5);
        assert!(sink.snapshot().iter().any(|e| matches!(e, ExecEvent::FallbackUsed { .. })));
    }

    #[test]
    fn retrying_provider_is_infallible_and_tags_calls_distinctly() {
        let backend = Arc::new(MockBackend::from_events(vec![
            ScriptEvent::Respond("one".into()),
            ScriptEvent::Fail(ProviderErrorKind::Transient, "hiccup".into()),
            ScriptEvent::Respond("two".into()),
        ]));
        let mut pool = initialize_models(vec![handle("m0")], vec![]).unwrap();
        pool.register_backend("mock", backend);
        let mut provider = RetryingProvider::new(
            Arc::new(pool),
            zero_delay_policy(),
            Arc::new(VirtualClock::default()),
            Arc::new(NullSink),
            Capability::General,
            "unit",
        );
        let a: Result<_, ProviderError> = provider.complete(&ChatRequest::new("s", "u"));
        let b = provider.complete(&ChatRequest::new("s", "u"));
        assert_eq!(a.unwrap().content, "one");
        assert_eq!(b.unwrap().content, "two");
        assert_eq!(provider.call_count(), 2);
    }
}
