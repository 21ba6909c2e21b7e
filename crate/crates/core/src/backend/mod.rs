//! Completion backends.
//!
//! [`Completer`] is what the chain engine talks to. It wraps one concrete
//! [`CompletionBackend`] (the OpenAI-compatible HTTP client or the scripted
//! replay backend) with the on-disk response cache and the in-flight limit.

mod cache;
mod http;
mod retry;
mod scripted;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

pub use cache::ResponseCache;
pub use http::HttpBackend;
pub use retry::RetryPolicy;
pub use scripted::{prompt_digest, Matcher, ScriptEntry, ScriptedBackend};

use crate::digest::{json_digest, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("request timed out after {0} s")]
    Timeout(u64),
    #[error("HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("environment variable `{0}` holding the API key is not set")]
    AuthMissing(String),
    #[error("no script entry matches prompt: {0}")]
    ScriptExhausted(String),
    #[error("cannot parse script file: {0}")]
    ScriptParse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    InvalidResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("cache error: {0}")]
    Cache(String),
}

impl BackendError {
    /// Transient failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Timeout(_) | BackendError::Transport(_) => true,
            BackendError::HttpStatus { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[async_trait]
pub trait CompletionBackend: Send + Sync {
    async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Scripted,
}

fn default_timeout() -> u64 {
    60
}
fn default_in_flight() -> usize {
    4
}

/// Backend description as read from a backend config file. Credentials are
/// never stored here, only the name of the variable that holds them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_path: Option<PathBuf>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl BackendConfig {
    pub fn scripted(script_path: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            base_url: None,
            api_key_env: None,
            model: "scripted".into(),
            timeout_secs: default_timeout(),
            script_path: Some(script_path.into()),
            max_in_flight: default_in_flight(),
        }
    }

    pub fn http(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::Http,
            base_url: Some(base_url.into()),
            api_key_env: None,
            model: model.into(),
            timeout_secs: default_timeout(),
            script_path: None,
            max_in_flight: default_in_flight(),
        }
    }

    /// Reads a TOML backend file; a relative `script_path` is resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: BackendConfig =
            toml::from_str(&text).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        if let Some(script) = &cfg.script_path {
            if script.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.script_path = Some(base.join(script));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.kind {
            BackendKind::Http => {
                if self.base_url.as_deref().is_none_or(str::is_empty) {
                    return Err(BackendError::Config("http backend requires base_url".into()));
                }
                if self.model.is_empty() {
                    return Err(BackendError::Config("http backend requires model".into()));
                }
            }
            BackendKind::Scripted => {
                if self.script_path.is_none() {
                    return Err(BackendError::Config("scripted backend requires script_path".into()));
                }
            }
        }
        if self.max_in_flight == 0 {
            return Err(BackendError::Config("max_in_flight must be positive".into()));
        }
        Ok(())
    }

    /// Digest identifying the backend: its config and, for scripted
    /// backends, the script file contents.
    pub fn digest(&self) -> Result<String, BackendError> {
        #[derive(Serialize)]
        struct Identity<'a> {
            kind: BackendKind,
            base_url: &'a Option<String>,
            model: &'a str,
            script_digest: Option<String>,
        }
        let script_digest = match (&self.kind, &self.script_path) {
            (BackendKind::Scripted, Some(p)) => Some(sha256_hex(
                &std::fs::read(p).map_err(|e| BackendError::Config(format!("{}: {e}", p.display())))?,
            )),
            _ => None,
        };
        Ok(json_digest(&Identity { kind: self.kind, base_url: &self.base_url, model: &self.model, script_digest }))
    }
}

/// Content digest over every field that can change a completion.
pub fn cache_key(request: &CompletionRequest, config: &BackendConfig) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        kind: BackendKind,
        base_url: &'a Option<String>,
        model: &'a str,
        system_text: &'a str,
        user_text: &'a str,
        temperature: f64,
        max_tokens: u32,
        seed: Option<u64>,
    }
    json_digest(&Key {
        kind: config.kind,
        base_url: &config.base_url,
        model: &request.model,
        system_text: &request.system_text,
        user_text: &request.user_text,
        temperature: request.temperature,
        max_tokens: request.max_tokens,
        seed: request.seed,
    })
}

/// Backend plus cache plus in-flight limit. Safe to share across tasks.
pub struct Completer {
    backend: Arc<dyn CompletionBackend>,
    config: BackendConfig,
    cache: Option<ResponseCache>,
    in_flight: Semaphore,
    backend_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl Completer {
    pub fn new(backend: Arc<dyn CompletionBackend>, config: BackendConfig, cache: Option<ResponseCache>) -> Self {
        let limit = config.max_in_flight.max(1);
        Completer {
            backend,
            config,
            cache,
            in_flight: Semaphore::new(limit),
            backend_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    /// Builds the concrete backend named by `config`.
    pub fn from_config(config: BackendConfig, cache: Option<ResponseCache>) -> Result<Self, BackendError> {
        config.validate()?;
        let backend: Arc<dyn CompletionBackend> = match config.kind {
            BackendKind::Http => Arc::new(HttpBackend::new(&config)?),
            BackendKind::Scripted => {
                let path = config.script_path.as_ref().expect("validated");
                Arc::new(ScriptedBackend::from_file(path)?)
            }
        };
        Ok(Self::new(backend, config, cache))
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Requests that reached the underlying backend (cache hits excluded).
    pub fn backend_calls(&self) -> u64 {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn request(&self, system_text: &str, user_text: &str, temperature: f64, max_tokens: u32, seed: Option<u64>) -> CompletionRequest {
        CompletionRequest {
            model: self.config.model.clone(),
            system_text: system_text.to_string(),
            user_text: user_text.to_string(),
            temperature,
            max_tokens,
            seed,
        }
    }

    pub async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        if request.user_text.trim().is_empty() {
            return Err(BackendError::InvalidRequest("empty user_text".into()));
        }
        if request.temperature.is_nan() || request.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(format!("temperature {}", request.temperature)));
        }
        let key = self.cache.as_ref().map(|_| cache_key(request, &self.config));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(mut hit) = cache.get(key).await? {
                self.cache_hits.fetch_add(1, Ordering::SeqCst);
                hit.cache_hit = true;
                return Ok(hit);
            }
        }

        let response = {
            let _permit = self.in_flight.acquire().await.expect("semaphore never closed");
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            let started = Instant::now();
            let mut response = self.backend.complete(request).await?;
            if self.config.kind == BackendKind::Http {
                response.latency_ms = started.elapsed().as_millis() as u64;
            }
            response.cache_hit = false;
            response
        };

        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            cache.put(key, &response).await?;
        }
        Ok(response)
    }
}

/// Rough whitespace token count for backends that do not report usage.
pub(crate) fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
