//! Chat-completion client: request/response wire format, bearer auth from
//! the environment and transport retries with exponential backoff.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::prompts::ChatMessage;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "NEGOTIATE_API_KEY";
/// Endpoint value selecting the in-process stub backend.
pub const STUB_ENDPOINT: &str = "stub";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("backend unavailable after {attempts} attempts: {last}")]
    Unavailable { attempts: u32, last: String },
}

impl BackendError {
    fn retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status(code) => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

/// Assistant text plus an optional separate reasoning channel.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Completion {
    pub content: String,
    pub reasoning: Option<String>,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    pub fn no_delay(attempts: u32) -> Self {
        Self { attempts, base_delay: Duration::ZERO }
    }

    /// Runs `f` until it succeeds, fails with a non-retryable error, or the
    /// attempts are used up. Delay doubles after every failure.
    pub fn run<T>(&self, mut f: impl FnMut() -> Result<T, BackendError>) -> Result<T, BackendError> {
        let attempts = self.attempts.max(1);
        let mut delay = self.base_delay;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match f() {
                Ok(v) => return Ok(v),
                Err(e) if e.retryable() => {
                    last = e.to_string();
                    if attempt < attempts && !delay.is_zero() {
                        thread::sleep(delay);
                        delay *= 2;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Err(BackendError::Unavailable { attempts, last })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self { endpoint_url: STUB_ENDPOINT.into(), model_name: "stub".into(), temperature: 0.6 }
    }
}

pub fn request_body(model: &str, messages: &[ChatMessage], temperature: f64) -> Value {
    json!({ "model": model, "messages": messages, "temperature": temperature })
}

/// Reads the assistant text from an OpenAI-shaped response, falling back
/// to a few common alternative layouts.
pub fn parse_completion(body: &Value) -> Result<Completion, BackendError> {
    let message = body.pointer("/choices/0/message");
    let content = message
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .or_else(|| body.pointer("/choices/0/text").and_then(Value::as_str))
        .or_else(|| body.pointer("/message/content").and_then(Value::as_str))
        .or_else(|| body.get("content").and_then(Value::as_str))
        .ok_or_else(|| BackendError::Malformed("no assistant text".into()))?;
    let reasoning = message
        .and_then(|m| m.get("reasoning_content").or_else(|| m.get("reasoning")))
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .map(str::to_string);
    Ok(Completion { content: content.to_string(), reasoning })
}

pub struct HttpBackend {
    agent: ureq::Agent,
    config: LlmConfig,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl HttpBackend {
    pub fn new(config: LlmConfig, api_key: Option<String>, retry: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(600)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, config, api_key, retry }
    }

    /// Reads the bearer token from `NEGOTIATE_API_KEY`.
    pub fn from_env(config: LlmConfig) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(config, key, RetryPolicy::default())
    }

    fn send_once(&self, body: &str) -> Result<Completion, BackendError> {
        let mut req = self.agent.post(&self.config.endpoint_url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(BackendError::Status(status));
        }
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parse_completion(&v)
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<Completion, BackendError> {
        let body = request_body(&self.config.model_name, messages, self.config.temperature).to_string();
        self.retry.run(|| self.send_once(&body))
    }
}
