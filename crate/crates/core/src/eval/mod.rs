//! Evaluation: pass@k tables, judge confusion metrics, correlation,
//! benchmark cleaning, tool-usage analytics and the reference loss.

mod corpus;
mod estimators;
mod usage;

use serde::{Deserialize, Serialize};

pub use corpus::{cosine, decontaminate, dedup_queries, normalize_query_text, Decontamination, RemovedItem};
pub use estimators::{
    aggregate_rates, confusion_metrics, dpo_nll_loss, pass_at_k, pearson, softplus,
    ConfusionCounts, ConfusionMetrics, RateRow, DPO_BETA, NLL_ALPHA,
};
pub use usage::{
    human_agreement, outcomes_from_trajectories, tool_usage_stats, Agreement, HumanLabel,
    ToolUsageStats,
};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("outside the estimator's domain: {0}")]
    DomainError(String),
    #[error("benchmark {benchmark}: query {query_id} has {found} samples, expected {expected}")]
    RaggedSamples {
        benchmark: String,
        query_id: String,
        expected: usize,
        found: usize,
    },
    #[error("metric {0} is undefined for these counts")]
    UndefinedMetric(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("embedding failed for item {item_id}: {message}")]
    ProviderFailure { item_id: String, message: String },
    #[error("query {query_id} sample {sample_index} passes consistency without passing syntax")]
    GatingViolation { query_id: String, sample_index: usize },
}

fn default_benchmark() -> String {
    "default".to_string()
}

/// One orchestrator run, reduced to what the rate tables need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleOutcome {
    #[serde(default = "default_benchmark")]
    pub benchmark: String,
    pub query_id: String,
    pub sample_index: usize,
    pub syntax_pass: bool,
    pub consistency_pass: bool,
    #[serde(default)]
    pub tool_calls: usize,
    #[serde(default)]
    pub revisions: usize,
}

impl SampleOutcome {
    /// Consistency is only judged on syntactically valid statements.
    pub fn check(&self) -> Result<(), EvalError> {
        if self.consistency_pass && !self.syntax_pass {
            return Err(EvalError::GatingViolation {
                query_id: self.query_id.clone(),
                sample_index: self.sample_index,
            });
        }
        Ok(())
    }
}
