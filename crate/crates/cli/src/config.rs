//! Configuration file schema. Flags override file values; the environment
//! only supplies credentials, through the `auth_env` names of endpoints.
//!
//! ```toml
//! seed = 0
//! workers = 8
//! strict = true
//! log_level = "info"
//!
//! [run]
//! max_revisions = 4
//! samples_per_query = 16
//! temperature = 0.6
//! batch_size = 20
//! compile_timeout_s = 300.0
//! judge_order = ["judge-a", "judge-b"]
//! decontamination_threshold = 0.8
//!
//! [backends]
//! model = "simulated"
//! lean = "https://lean.example/verify"
//! judges = ["simulated", "simulated:9000"]
//! embedder = { base_url = "https://emb.example/v1", model_name = "all-MiniLM-L6-v2" }
//! ```

use std::path::Path;

use autoformal::types::RunConfig;
use serde::{Deserialize, Serialize};

use crate::backend_spec::BackendSpec;
use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Backends {
    pub model: BackendSpec,
    pub lean: BackendSpec,
    pub judges: Vec<BackendSpec>,
    pub embedder: BackendSpec,
    pub embed_batch_size: usize,
}

impl Default for Backends {
    fn default() -> Self {
        Self {
            model: BackendSpec::default(),
            lean: BackendSpec::default(),
            judges: vec![BackendSpec::default(), BackendSpec::default()],
            embedder: BackendSpec::default(),
            embed_batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    /// Worker threads; `None` means one per logical core.
    pub workers: Option<usize>,
    /// `None` leaves the per-command default.
    pub strict: Option<bool>,
    pub log_level: String,
    pub run: RunConfig,
    pub backends: Backends,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: None,
            strict: None,
            log_level: "info".into(),
            run: RunConfig::default(),
            backends: Backends::default(),
        }
    }
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        self.run.validate().map_err(|e| UsageError(e.to_string()))?;
        if self.workers == Some(0) {
            return Err(UsageError("workers must be positive".into()));
        }
        if self.backends.judges.is_empty() {
            return Err(UsageError("at least one judge is required".into()));
        }
        if self.backends.embed_batch_size == 0 {
            return Err(UsageError("embed_batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn worker_count(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// Judge ids follow `run.judge_order`, then fall back to positions.
    pub fn judge_ids(&self) -> Vec<String> {
        (0..self.backends.judges.len())
            .map(|i| self.run.judge_order.get(i).cloned().unwrap_or_else(|| format!("judge-{i}")))
            .collect()
    }
}
