use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendConfig, BackendError, CompletionResult};
use crate::text::TokenCount;

pub const API_KEY_ENV: &str = "CLIQUEPARCEL_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_seconds: f64,
    pub backoff_multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, initial_backoff_seconds: 0.5, backoff_multiplier: 2.0 }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let secs = self.initial_backoff_seconds * self.backoff_multiplier.powi(attempt as i32);
        Duration::from_secs_f64(secs.max(0.0))
    }
}

/// Chat-completions client. The reported latency is that of the final,
/// successful attempt; failed attempts and backoff are not counted.
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint_url: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl HttpBackend {
    pub fn from_config(config: &BackendConfig) -> Result<Self, BackendError> {
        let endpoint_url = config
            .endpoint_url
            .clone()
            .ok_or_else(|| BackendError::Config("http backend requires endpoint_url".into()))?;
        let model =
            config.model_name.clone().ok_or_else(|| BackendError::Config("http backend requires model_name".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_seconds)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint_url,
            model,
            temperature: config.temperature,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            retry: config.retry,
        })
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    fn attempt(&self, prompt: &str) -> Result<CompletionResult, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        });
        let mut request = self.agent.post(&self.endpoint_url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let start = Instant::now();
        let mut response = request.send_json(&body).map_err(map_transport)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(BackendError::HttpStatus(status));
        }
        let value: Value = response.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout,
            other => BackendError::MalformedResponse(other.to_string()),
        })?;
        let latency_seconds = start.elapsed().as_secs_f64();
        let (text, input_tokens, output_tokens) = parse_response(&value)?;
        Ok(CompletionResult {
            text,
            input_tokens,
            output_tokens,
            latency_seconds,
            backend_id: format!("http:{}", self.model),
        })
    }
}

fn map_transport(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::StatusCode(code) => BackendError::HttpStatus(code),
        other => BackendError::Transport(other.to_string()),
    }
}

/// Extracts `choices[0].message.content` and the usage token counts.
pub(crate) fn parse_response(value: &Value) -> Result<(String, TokenCount, TokenCount), BackendError> {
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::MalformedResponse("missing choices[0].message.content".into()))?;
    let usage = |field: &str| {
        value
            .pointer(&format!("/usage/{field}"))
            .and_then(Value::as_u64)
            .map(TokenCount)
            .ok_or_else(|| BackendError::MalformedResponse(format!("missing usage.{field}")))
    };
    Ok((text.to_string(), usage("prompt_tokens")?, usage("completion_tokens")?))
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&self, prompt: &str) -> Result<CompletionResult, BackendError> {
        let mut attempt = 0;
        loop {
            match self.attempt(prompt) {
                Err(e) if e.is_retriable() && attempt < self.retry.max_retries => {
                    std::thread::sleep(self.retry.backoff(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
