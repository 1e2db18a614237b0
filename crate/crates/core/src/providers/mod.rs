//! Model provider pool: handles, rotation, and the chat contract.
//!
//! A run owns an ordered pool of model handles — primaries first, then
//! backups — with one active index. Quota and fatal failures rotate the
//! index to the next model, wrapping back to the first; retry pacing lives in
//! the executor, not here. Backends are registered per provider id, so a
//! scripted mock, the deterministic offline responder, and the real HTTP
//! adapter all plug in behind the same trait.

mod http;
mod mock;

pub use http::HttpBackend;
pub use mock::{MockBackend, ScriptEvent};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

/// What a model is good at; used to route plan steps to suitable models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Planning,
    Codegen,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    Primary,
    Backup,
}

/// One configured model: which provider serves it, the provider-side model
/// id, and what it is capable of.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub provider_id: String,
    pub model_id: String,
    pub capabilities: BTreeSet<Capability>,
    pub role: ModelRole,
}

impl ModelHandle {
    pub fn new(provider_id: impl Into<String>, model_id: impl Into<String>, capabilities: BTreeSet<Capability>) -> Self {
        ModelHandle {
            provider_id: provider_id.into(),
            model_id: model_id.into(),
            capabilities,
            role: ModelRole::Primary,
        }
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.provider_id, self.model_id)
    }
}

/// Request half of a chat exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(system_text: impl Into<String>, user_text: impl Into<String>) -> Self {
        ChatRequest { system_text: system_text.into(), user_text: user_text.into(), max_tokens: 2048, temperature: 0.2 }
    }
}

/// Response half of a chat exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: String,
}

impl ChatResponse {
    pub fn stopped(content: impl Into<String>) -> Self {
        ChatResponse { content: content.into(), finish_reason: "stop".into() }
    }
}

/// One request/outcome pair, as recorded in transcripts. `response` is
/// present exactly when the call succeeded; otherwise `error` holds the
/// failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatExchange {
    pub request: ChatRequest,
    pub response: Option<ChatResponse>,
    pub error: Option<ProviderError>,
}

/// Failure taxonomy driving the retry loop: rate limits back off, quota and
/// fatal errors rotate the pool, transient errors retry immediately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderErrorKind {
    RateLimit,
    QuotaExceeded,
    Transient,
    Fatal,
}

impl ProviderErrorKind {
    /// Classify an HTTP outcome: 429 is a rate limit (unless the body blames
    /// quota or billing, which also covers 402/403 quota responses), 5xx and
    /// timeouts are transient, and any other 4xx is fatal for this request.
    pub fn from_http(status: u16, body: &str) -> Self {
        let quota_worded = {
            let lower = body.to_ascii_lowercase();
            lower.contains("quota") || lower.contains("billing") || lower.contains("insufficient_quota")
        };
        match status {
            402 => ProviderErrorKind::QuotaExceeded,
            429 if quota_worded => ProviderErrorKind::QuotaExceeded,
            429 => ProviderErrorKind::RateLimit,
            403 if quota_worded => ProviderErrorKind::QuotaExceeded,
            s if s >= 500 => ProviderErrorKind::Transient,
            s if (400..500).contains(&s) => ProviderErrorKind::Fatal,
            _ => ProviderErrorKind::Transient,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProviderErrorKind::RateLimit => "rate_limit",
            ProviderErrorKind::QuotaExceeded => "quota_exceeded",
            ProviderErrorKind::Transient => "transient",
            ProviderErrorKind::Fatal => "fatal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}: {detail}", kind.name())]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub detail: String,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, detail: impl Into<String>) -> Self {
        ProviderError { kind, detail: detail.into() }
    }

    pub fn rate_limit(detail: impl Into<String>) -> Self {
        Self::new(ProviderErrorKind::RateLimit, detail)
    }

    pub fn quota_exceeded(detail: impl Into<String>) -> Self {
        Self::new(ProviderErrorKind::QuotaExceeded, detail)
    }

    pub fn transient(detail: impl Into<String>) -> Self {
        Self::new(ProviderErrorKind::Transient, detail)
    }

    pub fn fatal(detail: impl Into<String>) -> Self {
        Self::new(ProviderErrorKind::Fatal, detail)
    }
}

/// Backend contract: deliver one chat request to one model. Implementations
/// must be shareable across threads; scripted backends use interior locking.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, model: &ModelHandle, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

/// A single completion source as seen by the reasoning loop: the graph
/// construction operators call this, whether it is a bare mock in a unit test
/// or the executor's retrying wrapper around a whole pool.
pub trait TextCompletion {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

/// A backend bound to one fixed model, usable directly as a completion
/// source. Handy for tests and single-model flows.
pub struct DirectCompletion {
    pub backend: Arc<dyn ChatBackend>,
    pub model: ModelHandle,
}

impl TextCompletion for DirectCompletion {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.backend.chat(&self.model, request)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("model pool cannot be empty")]
    Empty,
}

/// Ordered pool of models with one active index.
pub struct ModelPool {
    models: Vec<ModelHandle>,
    backends: BTreeMap<String, Arc<dyn ChatBackend>>,
    current: AtomicUsize,
}

/// Build a pool from primary and backup model lists, preserving order:
/// primaries first, then backups. Roles are stamped from the list a handle
/// arrived in. At least one model is required.
pub fn initialize_models(primary: Vec<ModelHandle>, backup: Vec<ModelHandle>) -> Result<ModelPool, PoolError> {
    let mut models = Vec::with_capacity(primary.len() + backup.len());
    for mut m in primary {
        m.role = ModelRole::Primary;
        models.push(m);
    }
    for mut m in backup {
        m.role = ModelRole::Backup;
        models.push(m);
    }
    if models.is_empty() {
        return Err(PoolError::Empty);
    }
    Ok(ModelPool { models, backends: BTreeMap::new(), current: AtomicUsize::new(0) })
}

impl ModelPool {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty pools
    }

    pub fn models(&self) -> &[ModelHandle] {
        &self.models
    }

    pub fn current_index(&self) -> usize {
        self.current.load(Ordering::SeqCst)
    }

    pub fn active(&self) -> &ModelHandle {
        &self.models[self.current_index()]
    }

    /// Register the backend serving `provider_id`.
    pub fn register_backend(&mut self, provider_id: impl Into<String>, backend: Arc<dyn ChatBackend>) {
        self.backends.insert(provider_id.into(), backend);
    }

    /// Register one backend for every provider id in the pool (mock/offline).
    pub fn register_shared_backend(&mut self, backend: Arc<dyn ChatBackend>) {
        let ids: BTreeSet<String> = self.models.iter().map(|m| m.provider_id.clone()).collect();
        for id in ids {
            self.backends.insert(id, backend.clone());
        }
    }

    /// Advance the active index to the next model, wrapping from the last
    /// back to the first. Atomic, so the index is a valid position under any
    /// interleaving. Returns the new index.
    pub fn switch_to_next_model(&self) -> usize {
        let len = self.models.len();
        self.current
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |i| {
                Some(if i < len - 1 { i + 1 } else { 0 })
            })
            .expect("rotation closure never rejects");
        self.current_index()
    }

    fn backend_for(&self, model: &ModelHandle) -> Result<&Arc<dyn ChatBackend>, ProviderError> {
        self.backends.get(&model.provider_id).ok_or_else(|| {
            ProviderError::fatal(format!("no backend registered for provider '{}'", model.provider_id))
        })
    }

    /// Send a request to the active model. Errors pass straight through —
    /// pacing and rotation decisions belong to the executor.
    pub fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let model = self.active();
        self.backend_for(model)?.chat(model, request)
    }

    /// Index of the model that would serve a request preferring `capability`:
    /// the first capable model at or after the active index (wrapping), or
    /// the active model when none is capable.
    pub fn index_for_capability(&self, capability: Capability) -> usize {
        let start = self.current_index();
        let len = self.models.len();
        for off in 0..len {
            let idx = (start + off) % len;
            if self.models[idx].capabilities.contains(&capability) {
                return idx;
            }
        }
        start
    }

    /// Send preferring a capability (static routing; the active index is not
    /// changed by preference, only by rotation).
    pub fn send_with_capability(
        &self,
        capability: Capability,
        request: &ChatRequest,
    ) -> Result<(ChatResponse, usize), ProviderError> {
        let idx = self.index_for_capability(capability);
        let model = &self.models[idx];
        self.backend_for(model)?.chat(model, request).map(|r| (r, idx))
    }
}

impl fmt::Debug for ModelPool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelPool")
            .field("models", &self.models.iter().map(ModelHandle::label).collect::<Vec<_>>())
            .field("current", &self.current_index())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn handle(name: &str) -> ModelHandle {
        ModelHandle::new("prov", name, BTreeSet::from([Capability::General]))
    }

    fn pool_of(n: usize) -> ModelPool {
        initialize_models((0..n).map(|i| handle(&format!("m{i}"))).collect(), Vec::new()).unwrap()
    }

    #[test]
    fn initialize_orders_primaries_before_backups_and_stamps_roles() {
        let pool = initialize_models(
            vec![handle("p0"), handle("p1")],
            vec![ModelHandle::new("prov", "b0", BTreeSet::new())],
        )
        .unwrap();
        let labels: Vec<_> = pool.models().iter().map(|m| m.model_id.clone()).collect();
        assert_eq!(labels, ["p0", "p1", "b0"]);
        assert_eq!(pool.models()[0].role, ModelRole::Primary);
        assert_eq!(pool.models()[2].role, ModelRole::Backup);
        assert_eq!(pool.current_index(), 0);
    }

    #[test]
    fn empty_pool_is_rejected() {
        assert!(matches!(initialize_models(Vec::new(), Vec::new()), Err(PoolError::Empty)));
    }

    #[test]
    fn rotation_wraps_from_last_to_first() {
        let pool = pool_of(3);
        assert_eq!(pool.switch_to_next_model(), 1);
        assert_eq!(pool.switch_to_next_model(), 2);
        assert_eq!(pool.switch_to_next_model(), 0);
        assert_eq!(pool.switch_to_next_model(), 1);
    }

    #[test]
    fn singleton_pool_rotation_stays_put() {
        let pool = pool_of(1);
        assert_eq!(pool.switch_to_next_model(), 0);
        assert_eq!(pool.switch_to_next_model(), 0);
    }

    #[test]
    fn rotation_has_period_pool_size() {
        for n in 1..=6 {
            let pool = pool_of(n);
            for _ in 0..n {
                pool.switch_to_next_model();
            }
            assert_eq!(pool.current_index(), 0, "pool of {n} must return to start after {n} switches");
        }
    }

    #[test]
    fn index_stays_valid_under_concurrent_switching() {
        let pool = std::sync::Arc::new(pool_of(3));
        let mut joins = Vec::new();
        for _ in 0..4 {
            let p = pool.clone();
            joins.push(std::thread::spawn(move || {
                for _ in 0..1000 {
                    let idx = p.switch_to_next_model();
                    assert!(idx < p.len());
                }
            }));
        }
        for j in joins {
            j.join().unwrap();
        }
        assert!(pool.current_index() < pool.len());
    }

    #[test]
    fn http_status_mapping_follows_the_taxonomy() {
        use ProviderErrorKind::*;
        assert_eq!(ProviderErrorKind::from_http(429, "slow down"), RateLimit);
        assert_eq!(ProviderErrorKind::from_http(429, "insufficient_quota"), QuotaExceeded);
        assert_eq!(ProviderErrorKind::from_http(402, ""), QuotaExceeded);
        assert_eq!(ProviderErrorKind::from_http(403, "billing hard limit reached"), QuotaExceeded);
        assert_eq!(ProviderErrorKind::from_http(500, ""), Transient);
        assert_eq!(ProviderErrorKind::from_http(503, "overloaded"), Transient);
        assert_eq!(ProviderErrorKind::from_http(400, "bad request"), Fatal);
        assert_eq!(ProviderErrorKind::from_http(404, ""), Fatal);
        assert_eq!(ProviderErrorKind::from_http(401, "bad key"), Fatal);
    }

    #[test]
    fn send_without_backend_is_a_fatal_config_error() {
        let pool = pool_of(1);
        let err = pool.send(&ChatRequest::new("s", "u")).unwrap_err();
        assert_eq!(err.kind, ProviderErrorKind::Fatal);
    }

    #[test]
    fn capability_routing_prefers_first_capable_model_without_rotating() {
        let mut models = vec![
            ModelHandle::new("prov", "planner", BTreeSet::from([Capability::Planning, Capability::General])),
            ModelHandle::new("prov", "coder", BTreeSet::from([Capability::Codegen])),
        ];
        models[0].role = ModelRole::Primary;
        let pool = initialize_models(models, Vec::new()).unwrap();
        assert_eq!(pool.index_for_capability(Capability::Codegen), 1);
        assert_eq!(pool.index_for_capability(Capability::Planning), 0);
        // No model claims a capability: fall back to the active index.
        let plain = pool_of(2);
        assert_eq!(plain.index_for_capability(Capability::Codegen), plain.current_index());
        // Preference never moves the active index.
        assert_eq!(pool.current_index(), 0);
    }
}
