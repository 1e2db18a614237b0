//! Real provider adapter speaking the OpenAI-compatible chat-completions
//! wire format.
//!
//! One adapter serves any number of providers; per-provider configuration is
//! environment-driven: `<PROVIDER>_API_KEY` and `<PROVIDER>_BASE_URL` (the
//! provider id uppercased, non-alphanumerics replaced by `_`). The `openai`
//! provider id falls back to the public endpoint when no base URL is set.
//! Network and HTTP failures map onto the retry taxonomy via
//! [`ProviderErrorKind::from_http`].

use super::{ChatBackend, ChatRequest, ChatResponse, ModelHandle, ProviderError, ProviderErrorKind};
use serde_json::{json, Value};
use std::time::Duration;

pub struct HttpBackend {
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new() -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build();
        HttpBackend { agent: config.new_agent() }
    }
}

impl Default for HttpBackend {
    fn default() -> Self {
        Self::new()
    }
}

/// `provider_id` → environment variable prefix: uppercase, non-alphanumerics
/// become underscores.
fn env_prefix(provider_id: &str) -> String {
    provider_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect()
}

fn resolve_config(provider_id: &str) -> Result<(String, String), ProviderError> {
    let prefix = env_prefix(provider_id);
    let key = std::env::var(format!("{prefix}_API_KEY"))
        .map_err(|_| ProviderError::fatal(format!("{prefix}_API_KEY is not set")))?;
    let base = match std::env::var(format!("{prefix}_BASE_URL")) {
        Ok(url) => url,
        Err(_) if provider_id == "openai" => "https://api.openai.com/v1".to_string(),
        Err(_) => return Err(ProviderError::fatal(format!("{prefix}_BASE_URL is not set"))),
    };
    Ok((key, base.trim_end_matches('/').to_string()))
}

/// Chat-completions request body for one exchange.
pub fn request_body(model_id: &str, request: &ChatRequest) -> Value {
    json!({
        "model": model_id,
        "messages": [
            {"role": "system", "content": request.system_text},
            {"role": "user", "content": request.user_text},
        ],
        "max_tokens": request.max_tokens,
        "temperature": request.temperature,
    })
}

/// Pull the assistant message out of a chat-completions response body.
pub fn parse_response(body: &Value) -> Result<ChatResponse, ProviderError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| ProviderError::transient("response carried no choices"))?;
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::transient("response choice carried no message content"))?;
    let finish_reason = choice.get("finish_reason").and_then(Value::as_str).unwrap_or("stop");
    Ok(ChatResponse { content: content.to_string(), finish_reason: finish_reason.to_string() })
}

impl ChatBackend for HttpBackend {
    fn chat(&self, model: &ModelHandle, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let (key, base) = resolve_config(&model.provider_id)?;
        let url = format!("{base}/chat/completions");
        let body = request_body(&model.model_id, request);
        let mut response = self
            .agent
            .post(&url)
            .header("authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => ProviderError::transient(format!("request timed out: {e}")),
                other => ProviderError::transient(format!("transport failure: {other}")),
            })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::transient(format!("could not read response body: {e}")))?;
        if !(200..300).contains(&status) {
            let kind = ProviderErrorKind::from_http(status, &text);
            return Err(ProviderError::new(kind, format!("HTTP {status}: {}", text.chars().take(200).collect::<String>())));
        }
        let parsed: Value = serde_json::from_str(&text)
            .map_err(|e| ProviderError::transient(format!("response was not JSON: {e}")))?;
        parse_response(&parsed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_prefix_uppercases_and_replaces_punctuation() {
        assert_eq!(env_prefix("openai"), "OPENAI");
        assert_eq!(env_prefix("my-provider.v2"), "MY_PROVIDER_V2");
    }

    #[test]
    fn request_body_carries_both_messages_and_sampling_knobs() {
        let req = ChatRequest { system_text: "sys".into(), user_text: "usr".into(), max_tokens: 77, temperature: 0.5 };
        let body = request_body("gpt-x", &req);
        assert_eq!(body["model"], "gpt-x");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][0]["content"], "sys");
        assert_eq!(body["messages"][1]["role"], "user");
        assert_eq!(body["messages"][1]["content"], "usr");
        assert_eq!(body["max_tokens"], 77);
        assert_eq!(body["temperature"], 0.5);
    }

    #[test]
    fn parse_response_extracts_the_first_choice() {
        let body = json!({
            "choices": [{"message": {"role": "assistant", "content": "hello"}, "finish_reason": "length"}]
        });
        let resp = parse_response(&body).unwrap();
        assert_eq!(resp.content, "hello");
        assert_eq!(resp.finish_reason, "length");
    }

    #[test]
    fn parse_response_flags_malformed_bodies_as_transient() {
        let err = parse_response(&json!({"choices": []})).unwrap_err();
        assert_eq!(err.kind, ProviderErrorKind::Transient);
        let err = parse_response(&json!({"choices": [{"message": {}}]})).unwrap_err();
        assert_eq!(err.kind, ProviderErrorKind::Transient);
    }
}
