//! Pluggable clients for the compiler, chat models and embeddings.
//!
//! Everything outside this module talks to the [`LeanClient`],
//! [`ChatClient`] and [`EmbeddingProvider`] traits. Each has an HTTP
//! implementation ([`http`]) and deterministic offline doubles
//! ([`script`], [`simulated`], [`embed`]).

pub mod embed;
pub mod http;
pub mod script;
pub mod simulated;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::types::Diagnostic;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("request timed out after {0}s")]
    Timeout(f64),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("server error {status}: {message}")]
    Server { status: u16, message: String },
    #[error("rate limited")]
    RateLimited,
    #[error("model refused: {0}")]
    ModelRefusal(String),
    #[error("embedding provider failed for items {indices:?}: {message}")]
    ProviderFailure { indices: Vec<usize>, message: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unexpected request to strict mock: {0}")]
    UnexpectedRequest(String),
}

impl BackendError {
    /// Transient faults worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Timeout(_) | BackendError::Transport(_) | BackendError::RateLimited => {
                true
            }
            BackendError::Server { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

/// Executes a complete compiler input file and returns its diagnostics.
/// An empty list means a clean compile.
pub trait LeanClient: Send + Sync {
    fn execute(&self, code: &str, timeout_s: f64) -> Result<Vec<Diagnostic>, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for ChatParams {
    fn default() -> Self {
        Self {
            temperature: 0.6,
            max_tokens: None,
            seed: None,
        }
    }
}

pub trait ChatClient: Send + Sync {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError>;
}

pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;
}

impl<T: LeanClient + ?Sized> LeanClient for Arc<T> {
    fn execute(&self, code: &str, timeout_s: f64) -> Result<Vec<Diagnostic>, BackendError> {
        (**self).execute(code, timeout_s)
    }
}

impl<T: ChatClient + ?Sized> ChatClient for Arc<T> {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        (**self).chat(messages, params)
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<T> {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        (**self).embed(texts)
    }
}

/// Endpoint settings shared by the HTTP clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub auth_env: Option<String>,
}

fn default_timeout() -> f64 {
    300.0
}

fn default_retries() -> u32 {
    1
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: None,
            timeout_s: default_timeout(),
            max_retries: default_retries(),
            auth_env: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err(BackendError::Precondition("timeout_s must be positive".into()));
        }
        Ok(())
    }
}

/// Source of delays between retries; tests inject a recording clock.
pub trait Sleeper: Send + Sync {
    fn sleep(&self, delay: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, delay: Duration) {
        std::thread::sleep(delay);
    }
}

/// Records requested delays instead of sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    delays: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn delays(&self) -> Vec<Duration> {
        self.delays.lock().unwrap().clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, delay: Duration) {
        self.delays.lock().unwrap().push(delay);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl RetryPolicy {
    pub fn new(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay: Duration::from_millis(500),
        }
    }

    /// Exponential backoff: `base * 2^attempt`.
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt.min(16))
    }
}

/// Runs `op` until it succeeds, fails with a non-retryable error, or the
/// retry budget is spent. `op` receives the zero-based attempt number.
pub fn with_retries<T>(
    policy: RetryPolicy,
    sleeper: &dyn Sleeper,
    mut op: impl FnMut(u32) -> Result<T, BackendError>,
) -> Result<T, BackendError> {
    let mut attempt = 0;
    loop {
        match op(attempt) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() && attempt < policy.max_retries => {
                tracing::debug!(attempt, error = %e, "retrying backend call");
                sleeper.sleep(policy.delay(attempt));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Chat client wrapper that applies a [`RetryPolicy`].
pub struct RetryingChat {
    inner: Arc<dyn ChatClient>,
    policy: RetryPolicy,
    sleeper: Arc<dyn Sleeper>,
}

impl RetryingChat {
    pub fn new(inner: Arc<dyn ChatClient>, policy: RetryPolicy, sleeper: Arc<dyn Sleeper>) -> Self {
        Self {
            inner,
            policy,
            sleeper,
        }
    }
}

impl ChatClient for RetryingChat {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        with_retries(self.policy, self.sleeper.as_ref(), |_| {
            self.inner.chat(messages, params)
        })
    }
}
