//! HTTP clients.
//!
//! * compiler: `POST {base_url}` with `{"code", "timeout_s"}`, answered by
//!   `{"diagnostics": [...]}` in the server's diagnostic shape;
//! * chat: OpenAI-style `POST {base_url}/chat/completions`;
//! * embeddings: OpenAI-style `POST {base_url}/embeddings`.

use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder, Response};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    BackendError, ChatClient, ChatMessage, ChatParams, EmbeddingProvider, EndpointConfig,
    LeanClient,
};
use crate::types::Diagnostic;

fn build_client(timeout: Duration) -> Result<Client, BackendError> {
    Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| BackendError::Transport(e.to_string()))
}

fn with_auth(req: RequestBuilder, config: &EndpointConfig) -> RequestBuilder {
    match config
        .auth_env
        .as_deref()
        .and_then(|name| std::env::var(name).ok())
    {
        Some(token) => req.bearer_auth(token),
        None => req,
    }
}

fn send(req: RequestBuilder, timeout_s: f64) -> Result<Response, BackendError> {
    let resp = req.send().map_err(|e| {
        if e.is_timeout() {
            BackendError::Timeout(timeout_s)
        } else {
            BackendError::Transport(e.to_string())
        }
    })?;
    let status = resp.status();
    match status.as_u16() {
        429 => return Err(BackendError::RateLimited),
        408 | 504 => return Err(BackendError::Timeout(timeout_s)),
        _ => {}
    }
    if !status.is_success() {
        let message = resp.text().unwrap_or_default();
        return Err(BackendError::Server {
            status: status.as_u16(),
            message,
        });
    }
    Ok(resp)
}

fn decode<T: for<'de> Deserialize<'de>>(resp: Response) -> Result<T, BackendError> {
    let body = resp
        .text()
        .map_err(|e| BackendError::Transport(e.to_string()))?;
    serde_json::from_str(&body).map_err(|e| BackendError::Server {
        status: 200,
        message: format!("malformed response body: {e}"),
    })
}

#[derive(Debug, Serialize)]
struct CompileRequest<'a> {
    code: &'a str,
    timeout_s: f64,
}

#[derive(Debug, Deserialize)]
struct CompileResponse {
    #[serde(default)]
    diagnostics: Vec<Diagnostic>,
}

pub struct HttpLean {
    config: EndpointConfig,
    client: Client,
}

impl HttpLean {
    pub fn new(config: EndpointConfig) -> Result<Self, BackendError> {
        config.validate()?;
        // the request-level timeout is applied per call
        let client = build_client(Duration::from_secs(24 * 3600))?;
        Ok(Self { config, client })
    }
}

impl LeanClient for HttpLean {
    fn execute(&self, code: &str, timeout_s: f64) -> Result<Vec<Diagnostic>, BackendError> {
        let req = self
            .client
            .post(&self.config.base_url)
            .timeout(Duration::from_secs_f64(timeout_s + 5.0))
            .json(&CompileRequest { code, timeout_s });
        let resp = send(with_auth(req, &self.config), timeout_s)?;
        let parsed: CompileResponse = decode(resp)?;
        Ok(parsed.diagnostics)
    }
}

pub struct HttpChat {
    config: EndpointConfig,
    client: Client,
}

impl HttpChat {
    pub fn new(config: EndpointConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let client = build_client(Duration::from_secs_f64(config.timeout_s))?;
        Ok(Self { config, client })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ChatChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

impl ChatClient for HttpChat {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::Precondition("empty message list".into()));
        }
        let mut body = json!({
            "model": self.config.model_name.clone().unwrap_or_default(),
            "messages": messages,
            "temperature": params.temperature,
        });
        if let Some(max_tokens) = params.max_tokens {
            body["max_tokens"] = json!(max_tokens);
        }
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        let req = with_auth(self.client.post(self.url()).json(&body), &self.config);
        let resp: ChatResponse = decode(send(req, self.config.timeout_s)?)?;
        let choice = resp
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Server {
                status: 200,
                message: "response has no choices".into(),
            })?;
        if choice.finish_reason.as_deref() == Some("content_filter") {
            return Err(BackendError::ModelRefusal("content filtered".into()));
        }
        choice
            .message
            .content
            .ok_or_else(|| BackendError::ModelRefusal("empty completion".into()))
    }
}

pub struct HttpEmbedder {
    config: EndpointConfig,
    client: Client,
    batch_size: usize,
}

#[derive(Debug, Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

impl HttpEmbedder {
    pub fn new(config: EndpointConfig, batch_size: usize) -> Result<Self, BackendError> {
        config.validate()?;
        if batch_size == 0 {
            return Err(BackendError::Precondition("batch_size must be positive".into()));
        }
        let client = build_client(Duration::from_secs_f64(config.timeout_s))?;
        Ok(Self {
            config,
            client,
            batch_size,
        })
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let mut out = Vec::with_capacity(texts.len());
        for (batch_no, batch) in texts.chunks(self.batch_size).enumerate() {
            let offset = batch_no * self.batch_size;
            let indices = || (offset..offset + batch.len()).collect::<Vec<_>>();
            let body = json!({
                "model": self.config.model_name.clone().unwrap_or_default(),
                "input": batch,
            });
            let req = with_auth(self.client.post(&url).json(&body), &self.config);
            let resp: EmbeddingResponse = send(req, self.config.timeout_s)
                .and_then(decode)
                .map_err(|e| BackendError::ProviderFailure {
                    indices: indices(),
                    message: e.to_string(),
                })?;
            if resp.data.len() != batch.len() {
                return Err(BackendError::ProviderFailure {
                    indices: indices(),
                    message: format!("expected {} vectors, got {}", batch.len(), resp.data.len()),
                });
            }
            out.extend(resp.data.into_iter().map(|d| d.embedding));
        }
        Ok(out)
    }
}
