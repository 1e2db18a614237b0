//! Scripted mock backend for tests and offline runs.
//!
//! A mock consumes a fixed sequence of events — canned responses and injected
//! failures — and records every exchange in a transcript. Consuming the same
//! script from fresh state always yields the same transcript, which is what
//! the retry and rotation tests key on.

use super::{ChatBackend, ChatExchange, ChatRequest, ChatResponse, ModelHandle, ProviderError, ProviderErrorKind};
use serde::Deserialize;
use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

/// One scripted interaction.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptEvent {
    Respond(String),
    Fail(ProviderErrorKind, String),
}

enum Mode {
    /// Consume scripted events in order; a call past the end is a fatal
    /// "script exhausted" error so an over-long test fails loudly.
    Script(VecDeque<ScriptEvent>),
    /// Always return the same content.
    Always(String),
    /// Echo a deterministic digest of the request — distinct prompts get
    /// distinct but reproducible replies.
    Echo,
}

pub struct MockBackend {
    mode: Mutex<Mode>,
    transcript: Mutex<Vec<ChatExchange>>,
}

impl MockBackend {
    pub fn from_events(events: Vec<ScriptEvent>) -> Self {
        MockBackend { mode: Mutex::new(Mode::Script(events.into())), transcript: Mutex::new(Vec::new()) }
    }

    pub fn always(content: impl Into<String>) -> Self {
        MockBackend { mode: Mutex::new(Mode::Always(content.into())), transcript: Mutex::new(Vec::new()) }
    }

    pub fn echo() -> Self {
        MockBackend { mode: Mutex::new(Mode::Echo), transcript: Mutex::new(Vec::new()) }
    }

    /// Load a script from its JSON file form:
    ///
    /// ```json
    /// {
    ///   "responses": ["first reply", "second reply"],
    ///   "errors": [{"position": 0, "kind": "rate_limit", "detail": "slow down"}]
    /// }
    /// ```
    ///
    /// `position` is the zero-based index in the overall call sequence at
    /// which the error fires; responses fill the remaining positions in
    /// order. Positions must be unique and inside the combined sequence.
    pub fn from_script_str(json: &str) -> Result<Self, ScriptError> {
        #[derive(Deserialize)]
        struct File {
            #[serde(default)]
            responses: Vec<String>,
            #[serde(default)]
            errors: Vec<ErrorSpec>,
        }
        #[derive(Deserialize)]
        struct ErrorSpec {
            position: usize,
            kind: ProviderErrorKind,
            #[serde(default)]
            detail: Option<String>,
        }
        let file: File = serde_json::from_str(json).map_err(|e| ScriptError::Parse(e.to_string()))?;
        let total = file.responses.len() + file.errors.len();
        let mut slots: Vec<Option<ScriptEvent>> = vec![None; total];
        for err in &file.errors {
            if err.position >= total {
                return Err(ScriptError::BadPosition { position: err.position, total });
            }
            if slots[err.position].is_some() {
                return Err(ScriptError::DuplicatePosition(err.position));
            }
            slots[err.position] = Some(ScriptEvent::Fail(
                err.kind,
                err.detail.clone().unwrap_or_else(|| format!("scripted {} failure", err.kind.name())),
            ));
        }
        let mut responses = file.responses.into_iter();
        let events = slots
            .into_iter()
            .map(|slot| slot.unwrap_or_else(|| ScriptEvent::Respond(responses.next().expect("slot counts match"))))
            .collect();
        Ok(Self::from_events(events))
    }

    pub fn from_script_file(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScriptError::Io(path.display().to_string(), e))?;
        Self::from_script_str(&text)
    }

    pub fn transcript(&self) -> Vec<ChatExchange> {
        self.transcript.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.transcript.lock().unwrap().len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("mock script is not valid JSON: {0}")]
    Parse(String),
    #[error("error position {position} outside the {total}-call script")]
    BadPosition { position: usize, total: usize },
    #[error("two errors scripted at position {0}")]
    DuplicatePosition(usize),
    #[error("cannot read mock script {0}: {1}")]
    Io(String, std::io::Error),
}

/// Stable content hash used by echo mode (deliberately not DefaultHasher,
/// which may change across toolchains).
fn stable_digest(text: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl ChatBackend for MockBackend {
    fn chat(&self, _model: &ModelHandle, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let outcome = {
            let mut mode = self.mode.lock().unwrap();
            match &mut *mode {
                Mode::Script(events) => match events.pop_front() {
                    Some(ScriptEvent::Respond(content)) => Ok(ChatResponse::stopped(content)),
                    Some(ScriptEvent::Fail(kind, detail)) => Err(ProviderError::new(kind, detail)),
                    None => Err(ProviderError::fatal("mock script exhausted")),
                },
                Mode::Always(content) => Ok(ChatResponse::stopped(content.clone())),
                Mode::Echo => {
                    let head: String = request.user_text.chars().take(48).collect();
                    Ok(ChatResponse::stopped(format!("echo[{:016x}]: {head}", stable_digest(&request.user_text))))
                }
            }
        };
        self.transcript.lock().unwrap().push(ChatExchange {
            request: request.clone(),
            response: outcome.as_ref().ok().cloned(),
            error: outcome.as_ref().err().cloned(),
        });
        outcome
    }
}
