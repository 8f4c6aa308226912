//! Minimal chat-completion client with retries.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Environment variable holding the bearer token, if any.
pub const API_KEY_ENV: &str = "BPMN_EVAL_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig { temperature: 0.1, top_p: 1.0, max_new_tokens: 2048 }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.max_new_tokens == 0 {
            return Err("max_new_tokens must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Total attempts, including the first.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub initial_backoff: Duration,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            url: url.into(),
            model: model.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(120),
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("network error: {0}")]
    Network(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("invalid decoding config: {0}")]
    Config(String),
}

impl ClientError {
    fn is_transient(&self) -> bool {
        match self {
            ClientError::Network(_) | ClientError::Timeout => true,
            ClientError::Endpoint { status, .. } => *status == 429 || *status >= 500,
            ClientError::Config(_) => false,
        }
    }
}

pub fn request_body(model: &str, prompt: &str, cfg: &DecodingConfig) -> Value {
    json!({
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": cfg.temperature,
        "top_p": cfg.top_p,
        "max_tokens": cfg.max_new_tokens,
    })
}

/// Pulls the completion text out of a chat or plain completion response.
pub fn response_text(body: &Value) -> Option<String> {
    let choice = body.get("choices")?.get(0)?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

fn attempt(agent: &ureq::Agent, endpoint: &EndpointConfig, body: &Value) -> Result<String, ClientError> {
    let mut req = agent.post(&endpoint.url).header("Content-Type", "application/json");
    if let Some(key) = &endpoint.api_key {
        req = req.header("Authorization", format!("Bearer {key}"));
    }
    let mut resp = req.send_json(body).map_err(|e| match e {
        ureq::Error::Timeout(_) => ClientError::Timeout,
        other => ClientError::Network(other.to_string()),
    })?;
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(|e| match e {
        ureq::Error::Timeout(_) => ClientError::Timeout,
        other => ClientError::Network(other.to_string()),
    })?;
    if !(200..300).contains(&status) {
        return Err(ClientError::Endpoint { status, body: text });
    }
    let json: Value = serde_json::from_str(&text)
        .map_err(|e| ClientError::Endpoint { status, body: format!("invalid JSON ({e}): {text}") })?;
    response_text(&json).ok_or_else(|| ClientError::Endpoint { status, body: format!("no completion text: {text}") })
}

/// Sends one prompt and returns the raw completion text. Transient failures
/// (network errors, timeouts, HTTP 429 and 5xx) are retried with exponential
/// backoff up to `max_attempts` in total.
pub fn generate_completion(endpoint: &EndpointConfig, prompt: &str, cfg: &DecodingConfig) -> Result<String, ClientError> {
    cfg.validate().map_err(ClientError::Config)?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(endpoint.timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let body = request_body(&endpoint.model, prompt, cfg);
    let mut delay = endpoint.initial_backoff;
    let attempts = endpoint.max_attempts.max(1);
    for n in 1..=attempts {
        match attempt(&agent, endpoint, &body) {
            Ok(text) => return Ok(text),
            Err(e) if e.is_transient() && n < attempts => {
                log::warn!("attempt {n}/{attempts} failed: {e}; retrying in {delay:?}");
                thread::sleep(delay);
                delay *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("loop returns on the last attempt")
}
