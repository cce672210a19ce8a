//! Adapter for the common chat-completion JSON shape: a POST of
//! `{model, messages: [{role, content}], temperature}` answered by
//! `{choices: [{message: {content}}], usage: {prompt_tokens, completion_tokens}}`.

use std::fmt;
use std::time::Duration;

use erc_sentinel_core::llm::{concat_prompt, Completion, GatewayError, Message};
use erc_sentinel_core::prompt::estimate_tokens;
use serde_json::{json, Value};

use super::{Backend, BackendError, BackendKind, LlmConfig};

/// Never printed; `Debug` is redacted.
struct ApiKey(String);

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

#[derive(Debug)]
pub struct HttpBackend {
    agent: ureq::Agent,
    key: ApiKey,
    endpoint: String,
    model: String,
}

impl HttpBackend {
    /// Reads the key from the environment variable named in `config`.
    pub fn from_env(config: &LlmConfig) -> Result<Self, GatewayError> {
        let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.trim().is_empty());
        Self::new(config, key)
    }

    fn new(config: &LlmConfig, key: Option<String>) -> Result<Self, GatewayError> {
        let key = key.ok_or_else(|| {
            GatewayError::Auth(format!("environment variable {} is not set", config.api_key_env))
        })?;
        if config.endpoint.trim().is_empty() {
            return Err(GatewayError::Transport("no endpoint configured".into()));
        }
        if config.model.trim().is_empty() {
            return Err(GatewayError::Transport("no model configured".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Ok(HttpBackend {
            agent,
            key: ApiKey(key),
            endpoint: config.endpoint.clone(),
            model: config.model.clone(),
        })
    }
}

fn request_body(model: &str, messages: &[Message], temperature: f64) -> Value {
    let messages: Vec<Value> = messages
        .iter()
        .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
        .collect();
    json!({"model": model, "messages": messages, "temperature": temperature})
}

/// Maps a non-success status to an error; `None` for 2xx.
fn classify_status(status: u16, retry_after: Option<&str>, body: &str) -> Option<BackendError> {
    let snippet: String = body.chars().take(200).collect();
    match status {
        200..=299 => None,
        401 | 403 => Some(BackendError::Auth(format!("http status {status}"))),
        408 | 429 | 500..=599 => Some(BackendError::Transient {
            message: format!("http status {status}: {snippet}"),
            retry_after: retry_after.and_then(|s| s.trim().parse::<u64>().ok()).map(Duration::from_secs),
        }),
        _ => Some(BackendError::Fatal(format!("http status {status}: {snippet}"))),
    }
}

fn parse_completion(body: &Value, prompt: &str) -> Result<Completion, BackendError> {
    let text = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Fatal("response has no choices[0].message.content".into()))?
        .to_string();
    let count = |key: &str, fallback: usize| {
        body.pointer(&format!("/usage/{key}"))
            .and_then(Value::as_u64)
            .map_or(fallback, |n| n as usize)
    };
    Ok(Completion {
        in_tokens: count("prompt_tokens", estimate_tokens(prompt)),
        out_tokens: count("completion_tokens", estimate_tokens(&text)),
        text,
    })
}

impl Backend for HttpBackend {
    fn send(&self, messages: &[Message], config: &LlmConfig) -> Result<Completion, BackendError> {
        let body = request_body(&self.model, messages, config.temperature);
        let response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.key.0))
            .send_json(&body);
        let mut response = match response {
            Ok(r) => r,
            Err(e) => {
                return Err(BackendError::Transient {
                    message: e.to_string(),
                    retry_after: None,
                })
            }
        };
        let status = response.status().as_u16();
        let retry_after = response
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let text = response.body_mut().read_to_string().map_err(|e| BackendError::Transient {
            message: e.to_string(),
            retry_after: None,
        })?;
        if let Some(err) = classify_status(status, retry_after.as_deref(), &text) {
            return Err(err);
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Fatal(format!("response is not JSON: {e}")))?;
        parse_completion(&value, &concat_prompt(messages))
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Live
    }

    fn model_id(&self) -> &str {
        &self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> LlmConfig {
        LlmConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            ..LlmConfig::default()
        }
    }

    #[test]
    fn missing_key_is_an_auth_error() {
        let err = HttpBackend::new(&config(), None).unwrap_err();
        assert!(matches!(err, GatewayError::Auth(m) if m.contains("ERC_SENTINEL_API_KEY")));
        let c = LlmConfig {
            api_key_env: "ERC_SENTINEL_TEST_UNSET_VARIABLE".into(),
            ..config()
        };
        assert!(matches!(HttpBackend::from_env(&c), Err(GatewayError::Auth(_))));
    }

    #[test]
    fn key_is_redacted_in_debug() {
        let b = HttpBackend::new(&config(), Some("sk-secret-value".into())).unwrap();
        let dbg = format!("{b:?}");
        assert!(!dbg.contains("sk-secret-value"));
        assert!(dbg.contains("<redacted>"));
    }

    #[test]
    fn body_shape() {
        let body = request_body("m", &[Message::system("s"), Message::user("u")], 0.0);
        assert_eq!(
            body,
            json!({"model": "m", "messages": [{"role": "system", "content": "s"}, {"role": "user", "content": "u"}], "temperature": 0.0})
        );
    }

    #[test]
    fn status_classes() {
        assert_eq!(classify_status(200, None, ""), None);
        assert!(matches!(classify_status(401, None, ""), Some(BackendError::Auth(_))));
        assert!(matches!(classify_status(403, None, ""), Some(BackendError::Auth(_))));
        assert_eq!(
            classify_status(429, Some("7"), "slow down"),
            Some(BackendError::Transient {
                message: "http status 429: slow down".into(),
                retry_after: Some(Duration::from_secs(7))
            })
        );
        assert!(matches!(classify_status(503, None, ""), Some(BackendError::Transient { retry_after: None, .. })));
        assert!(matches!(classify_status(400, None, ""), Some(BackendError::Fatal(_))));
    }

    #[test]
    fn completion_parsing() {
        let v = json!({"choices": [{"message": {"role": "assistant", "content": "VERDICT: COMPLIANT"}}], "usage": {"prompt_tokens": 11, "completion_tokens": 4}});
        let c = parse_completion(&v, "p").unwrap();
        assert_eq!((c.text.as_str(), c.in_tokens, c.out_tokens), ("VERDICT: COMPLIANT", 11, 4));
        let v = json!({"choices": [{"message": {"content": "abcdefgh"}}]});
        let c = parse_completion(&v, "1234").unwrap();
        assert_eq!((c.in_tokens, c.out_tokens), (1, 2));
        assert!(parse_completion(&json!({"choices": []}), "").is_err());
    }

    #[test]
    fn unreachable_endpoint_is_transient() {
        let b = HttpBackend::new(&config(), Some("k".into())).unwrap();
        let c = LlmConfig {
            timeout: Duration::from_secs(2),
            ..config()
        };
        assert!(matches!(b.send(&[Message::user("x")], &c), Err(BackendError::Transient { .. })));
    }
}
