//! Completion backends behind one [`Backend`] trait: a live chat-completions
//! endpoint, a deterministic simulator of the linear latency model, and a
//! record/replay cache. [`run_group`] turns a group of prompts into
//! per-prompt answers through the batch template.

mod clock;
mod group;
mod http;
mod replay;
mod simulated;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Workload;
use crate::text::TokenCount;

pub use clock::SimClock;
pub use group::{run_group, run_plan, run_plan_outcomes, GroupOutcome, RunError};
pub use http::{HttpBackend, RetryPolicy, API_KEY_ENV};
pub use replay::{cache_key, prompt_sha256, CacheEntry, RecordingBackend, ReplayBackend, ReplayCache};
pub use simulated::{
    simulate_complete, synthetic_answer, ScriptedAnswers, SimulatedBackend, SimulationOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    HttpStatus(u16),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no cached completion for model {model:?}, prompt {prompt_sha256}")]
    CacheMiss { model: String, prompt_sha256: String },
    #[error("request timed out")]
    Timeout,
    #[error("no scripted answer for prompt {0:?}")]
    UnknownPrompt(String),
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("cache I/O: {0}")]
    Io(String),
}

impl BackendError {
    /// 429, 5xx and timeouts are worth retrying.
    pub fn is_retriable(&self) -> bool {
        match self {
            BackendError::HttpStatus(code) => *code == 429 || (500..600).contains(code),
            BackendError::Timeout => true,
            _ => false,
        }
    }
}

/// Latency model `t = base + in_coeff * l(prompt) + out_coeff * l(answer)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    pub base_seconds: f64,
    pub in_coeff: f64,
    pub out_coeff: f64,
}

impl Default for CostModelParams {
    fn default() -> Self {
        Self { base_seconds: 0.5, in_coeff: 0.001, out_coeff: 0.05 }
    }
}

impl CostModelParams {
    pub fn new(base_seconds: f64, in_coeff: f64, out_coeff: f64) -> Self {
        Self { base_seconds, in_coeff, out_coeff }
    }

    /// Hard errors for unusable parameters; the returned strings are
    /// warnings (output tokens expected to cost at least as much as input).
    pub fn validate(&self) -> Result<Vec<String>, BackendError> {
        if !(self.base_seconds > 0.0) {
            return Err(BackendError::Config(format!("base_seconds must be > 0, got {}", self.base_seconds)));
        }
        if !(self.in_coeff >= 0.0) || !(self.out_coeff >= 0.0) {
            return Err(BackendError::Config("token coefficients must be >= 0".into()));
        }
        let mut warnings = Vec::new();
        if self.out_coeff < self.in_coeff {
            warnings.push(format!(
                "out_coeff {} < in_coeff {}: output length is expected to dominate latency",
                self.out_coeff, self.in_coeff
            ));
        }
        Ok(warnings)
    }

    pub fn latency(&self, input_tokens: u64, output_tokens: u64) -> f64 {
        self.base_seconds + self.in_coeff * input_tokens as f64 + self.out_coeff * output_tokens as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub input_tokens: TokenCount,
    pub output_tokens: TokenCount,
    pub latency_seconds: f64,
    pub backend_id: String,
}

pub trait Backend: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, prompt: &str) -> Result<CompletionResult, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn complete(&self, prompt: &str) -> Result<CompletionResult, BackendError> {
        (**self).complete(prompt)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn id(&self) -> String {
        (**self).id()
    }
    fn complete(&self, prompt: &str) -> Result<CompletionResult, BackendError> {
        (**self).complete(prompt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Simulated,
    Replay,
}

impl std::str::FromStr for BackendKind {
    type Err = BackendError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "http" => Ok(BackendKind::Http),
            "simulated" | "sim" => Ok(BackendKind::Simulated),
            "replay" => Ok(BackendKind::Replay),
            other => Err(BackendError::Config(format!("unknown backend kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    pub temperature: f64,
    pub max_in_flight: usize,
    pub timeout_seconds: f64,
    /// Re-issue prompts missing from a batched answer one by one.
    pub fallback_separate: bool,
    /// Replay source, or record target for the http kind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
    pub retry: RetryPolicy,
    /// Simulator latency model; defaults apply when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_params: Option<CostModelParams>,
    pub simulation: SimulationOptions,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Simulated,
            endpoint_url: None,
            model_name: None,
            temperature: 0.0,
            max_in_flight: 4,
            timeout_seconds: 60.0,
            fallback_separate: false,
            cache_path: None,
            retry: RetryPolicy::default(),
            cost_params: None,
            simulation: SimulationOptions::default(),
        }
    }
}

impl BackendConfig {
    pub fn simulated() -> Self {
        Self::default()
    }

    pub fn model(&self) -> &str {
        self.model_name.as_deref().unwrap_or("simulated")
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_in_flight == 0 {
            return Err(BackendError::Config("max_in_flight must be >= 1".into()));
        }
        if !(self.timeout_seconds > 0.0) {
            return Err(BackendError::Config("timeout_seconds must be > 0".into()));
        }
        match self.kind {
            BackendKind::Http => {
                if self.endpoint_url.is_none() || self.model_name.is_none() {
                    return Err(BackendError::Config("http backend requires endpoint_url and model_name".into()));
                }
            }
            BackendKind::Replay => {
                if self.cache_path.is_none() {
                    return Err(BackendError::Config("replay backend requires cache_path".into()));
                }
            }
            BackendKind::Simulated => {
                self.cost_params.unwrap_or_default().validate()?;
                self.simulation.validate()?;
            }
        }
        Ok(())
    }
}

/// Builds the configured backend. The simulator scripts its answers from
/// `workload`; an http backend with a `cache_path` records every call.
pub fn build_backend(config: &BackendConfig, workload: &Workload) -> Result<Box<dyn Backend>, BackendError> {
    config.validate()?;
    Ok(match config.kind {
        BackendKind::Simulated => Box::new(SimulatedBackend::new(
            config.cost_params.unwrap_or_default(),
            ScriptedAnswers::from_workload(workload, config.simulation.answer_words),
            config.simulation,
        )),
        BackendKind::Replay => {
            let cache = ReplayCache::open(config.cache_path.as_ref().expect("validated"))?;
            Box::new(ReplayBackend::new(cache, config.model()))
        }
        BackendKind::Http => {
            let http = HttpBackend::from_config(config)?;
            match &config.cache_path {
                Some(path) => Box::new(RecordingBackend::new(http, ReplayCache::open(path)?, config.model())),
                None => Box::new(http),
            }
        }
    })
}

/// `complete` for a config: build then call once.
pub fn complete(config: &BackendConfig, workload: &Workload, prompt: &str) -> Result<CompletionResult, BackendError> {
    build_backend(config, workload)?.complete(prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(CostModelParams::default().validate().unwrap().is_empty());
        assert_eq!(CostModelParams::new(0.5, 0.1, 0.01).validate().unwrap().len(), 1);
        assert!(CostModelParams::new(0.0, 0.1, 0.1).validate().is_err());
        assert!(CostModelParams::new(1.0, -0.1, 0.1).validate().is_err());
        assert!((CostModelParams::new(0.5, 0.001, 0.05).latency(100, 40) - 2.6).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut c = BackendConfig { kind: BackendKind::Http, ..Default::default() };
        assert!(c.validate().is_err());
        c.endpoint_url = Some("http://localhost:1".into());
        c.model_name = Some("m".into());
        assert!(c.validate().is_ok());
        let r = BackendConfig { kind: BackendKind::Replay, ..Default::default() };
        assert!(r.validate().is_err());
        assert!(BackendConfig::default().validate().is_ok());
        assert!(BackendConfig { max_in_flight: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn retriable_statuses() {
        assert!(BackendError::HttpStatus(429).is_retriable());
        assert!(BackendError::HttpStatus(503).is_retriable());
        assert!(BackendError::Timeout.is_retriable());
        assert!(!BackendError::HttpStatus(400).is_retriable());
        assert!(!BackendError::MalformedResponse("x".into()).is_retriable());
    }

    #[test]
    fn kind_parsing_and_json() {
        assert_eq!("replay".parse::<BackendKind>().unwrap(), BackendKind::Replay);
        assert!("grpc".parse::<BackendKind>().is_err());
        let c: BackendConfig = serde_json::from_str(r#"{"kind":"http","endpoint_url":"u","model_name":"m"}"#).unwrap();
        assert_eq!(c.kind, BackendKind::Http);
        assert_eq!(c.max_in_flight, 4);
        assert_eq!(c.retry.max_retries, 3);
    }
}
