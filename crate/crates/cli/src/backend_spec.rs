//! Backend selection: `simulated[:param]`, a URL, or a full endpoint table.

use std::sync::Arc;

use autoformal::backends::embed::HashingEmbedder;
use autoformal::backends::http::{HttpChat, HttpEmbedder, HttpLean};
use autoformal::backends::simulated::{SimulatedFormalizer, SimulatedJudge, SimulatedLean};
use autoformal::backends::{ChatClient, EmbeddingProvider, EndpointConfig, LeanClient};
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// Default acceptance rate of a simulated judge, in basis points.
pub const SIMULATED_JUDGE_ACCEPT_BP: u32 = 8_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackendSpec {
    Named(String),
    Endpoint(EndpointConfig),
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Named("simulated".into())
    }
}

enum Resolved {
    Simulated(Option<u64>),
    Http(EndpointConfig),
}

impl BackendSpec {
    fn resolve(&self) -> Result<Resolved, UsageError> {
        match self {
            BackendSpec::Endpoint(cfg) => Ok(Resolved::Http(cfg.clone())),
            BackendSpec::Named(s) if s.starts_with("http://") || s.starts_with("https://") => {
                Ok(Resolved::Http(EndpointConfig::new(s.clone())))
            }
            BackendSpec::Named(s) => match s.split_once(':') {
                None if s == "simulated" => Ok(Resolved::Simulated(None)),
                Some(("simulated", p)) => p
                    .parse()
                    .map(|n| Resolved::Simulated(Some(n)))
                    .map_err(|_| UsageError(format!("bad simulated parameter in `{s}`"))),
                _ => Err(UsageError(format!("unknown backend `{s}`; expected simulated[:N] or a URL"))),
            },
        }
    }

    /// Chat model; the simulated parameter is the formalizer seed.
    pub fn chat_model(&self, default_seed: u64) -> anyhow::Result<Arc<dyn ChatClient>> {
        Ok(match self.resolve()? {
            Resolved::Simulated(seed) => Arc::new(SimulatedFormalizer {
                seed: seed.unwrap_or(default_seed),
                ..SimulatedFormalizer::default()
            }),
            Resolved::Http(cfg) => Arc::new(HttpChat::new(cfg)?),
        })
    }

    /// Judge; the simulated parameter is the acceptance rate in basis points.
    pub fn judge(&self, id: &str) -> anyhow::Result<Arc<dyn ChatClient>> {
        Ok(match self.resolve()? {
            Resolved::Simulated(bp) => {
                let bp = bp.unwrap_or(u64::from(SIMULATED_JUDGE_ACCEPT_BP)).min(10_000) as u32;
                Arc::new(SimulatedJudge::new(id, bp))
            }
            Resolved::Http(cfg) => Arc::new(HttpChat::new(cfg)?),
        })
    }

    pub fn lean(&self) -> anyhow::Result<Arc<dyn LeanClient>> {
        Ok(match self.resolve()? {
            Resolved::Simulated(_) => Arc::new(SimulatedLean::new()),
            Resolved::Http(cfg) => Arc::new(HttpLean::new(cfg)?),
        })
    }

    /// Embedder; the simulated parameter is the vector dimension.
    pub fn embedder(&self, batch_size: usize) -> anyhow::Result<Arc<dyn EmbeddingProvider>> {
        Ok(match self.resolve()? {
            Resolved::Simulated(None) => Arc::new(HashingEmbedder::default()),
            Resolved::Simulated(Some(dim)) => Arc::new(HashingEmbedder::new(dim.max(1) as usize, 3)),
            Resolved::Http(cfg) => Arc::new(HttpEmbedder::new(cfg, batch_size)?),
        })
    }
}

/// `a,b,c` into specs; a URL may not itself contain commas.
pub fn parse_list(s: &str) -> Vec<BackendSpec> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| BackendSpec::Named(p.to_string()))
        .collect()
}
