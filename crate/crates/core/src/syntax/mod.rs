//! The syntax-check tool.
//!
//! Statements flow through three stages:
//!
//! ```text
//!   precheck ──fail──▶ report (stage = precheck, no compiler call)
//!      │
//!   group by imports ─▶ assemble namespaced file ─▶ compile ─▶ map lines
//!                                                     │
//!                              exception / timeout ───┴─▶ compile each member alone
//! ```

pub mod batch;
pub mod precheck;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backends::embed::fnv1a;
use crate::backends::LeanClient;
use crate::metrics::RunCounters;
use crate::par::{default_workers, parallel_map};
use crate::types::{Diagnostic, FormalStatement, RunConfig};
use batch::{assemble_group, group_statements, map_diagnostics, StatementGroup};
use precheck::{precheck_with, BracketOptions, PrecheckFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntaxStage {
    Precheck,
    Batch,
    IndividualFallback,
}

/// Per-statement verdict. `errors` holds error-severity diagnostics in
/// statement-local coordinates; warnings are kept apart and never fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntaxReport {
    pub pass: bool,
    pub errors: Vec<Diagnostic>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Diagnostic>,
    pub stage: SyntaxStage,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub precheck_failures: Vec<PrecheckFailure>,
    /// Set when the compiler could not be reached even for the individual
    /// retry; such a report never passes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_error: Option<String>,
}

impl SyntaxReport {
    pub fn from_diagnostics(diagnostics: Vec<Diagnostic>, stage: SyntaxStage) -> Self {
        let (errors, warnings): (Vec<_>, Vec<_>) =
            diagnostics.into_iter().partition(Diagnostic::is_error);
        Self {
            pass: errors.is_empty(),
            errors,
            warnings,
            stage,
            precheck_failures: Vec::new(),
            backend_error: None,
        }
    }

    fn backend_failure(error: String) -> Self {
        Self {
            pass: false,
            errors: vec![Diagnostic::error(
                (1, 0),
                (1, 0),
                format!("compiler backend unavailable: {error}"),
            )],
            warnings: Vec::new(),
            stage: SyntaxStage::IndividualFallback,
            precheck_failures: Vec::new(),
            backend_error: Some(error),
        }
    }

    /// The `{"pass", "errors"}` object the model sees.
    pub fn wire_payload(&self) -> serde_json::Value {
        serde_json::json!({ "pass": self.pass, "errors": self.errors })
    }
}

fn fresh_nonce() -> String {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::SeqCst);
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_nanos());
    let key = format!("{}/{n}/{nanos}", std::process::id());
    format!("{:08x}", fnv1a(key.as_bytes()) as u32)
}

/// Batched syntax checker around a compiler client.
pub struct SyntaxChecker {
    client: Arc<dyn LeanClient>,
    batch_size: usize,
    timeout_s: f64,
    workers: usize,
    nonce: String,
    brackets: BracketOptions,
    counters: Arc<RunCounters>,
}

impl SyntaxChecker {
    pub fn new(client: Arc<dyn LeanClient>, config: &RunConfig) -> Self {
        Self {
            client,
            batch_size: config.batch_size.max(1),
            timeout_s: config.compile_timeout_s,
            workers: default_workers(),
            nonce: fresh_nonce(),
            brackets: BracketOptions::default(),
            counters: Arc::new(RunCounters::default()),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_nonce(mut self, nonce: impl Into<String>) -> Self {
        self.nonce = nonce.into();
        self
    }

    pub fn with_brackets(mut self, brackets: BracketOptions) -> Self {
        self.brackets = brackets;
        self
    }

    pub fn with_counters(mut self, counters: Arc<RunCounters>) -> Self {
        self.counters = counters;
        self
    }

    pub fn counters(&self) -> &RunCounters {
        &self.counters
    }

    /// One report per input statement, in input order.
    pub fn check(&self, statements: &[FormalStatement]) -> Vec<SyntaxReport> {
        let mut reports: Vec<Option<SyntaxReport>> = vec![None; statements.len()];
        let mut runnable = Vec::new();
        for (idx, st) in statements.iter().enumerate() {
            let pre = precheck_with(st, &self.brackets);
            if pre.pass {
                runnable.push((idx, st.clone()));
            } else {
                RunCounters::bump(&self.counters.precheck_rejections);
                let mut report = SyntaxReport::from_diagnostics(pre.diagnostics, SyntaxStage::Precheck);
                report.precheck_failures = pre.failures;
                reports[idx] = Some(report);
            }
        }

        let groups = group_statements(&runnable, self.batch_size);
        let results = parallel_map(&groups, self.workers, |gid, group| self.run_group(gid, group));
        for (group, group_reports) in groups.iter().zip(results) {
            for ((idx, _), report) in group.members.iter().zip(group_reports) {
                reports[*idx] = Some(report);
            }
        }
        reports
            .into_iter()
            .map(|r| r.expect("every statement receives exactly one report"))
            .collect()
    }

    pub fn check_one(&self, statement: &FormalStatement) -> SyntaxReport {
        self.check(std::slice::from_ref(statement)).remove(0)
    }

    fn run_group(&self, group_id: usize, group: &StatementGroup) -> Vec<SyntaxReport> {
        let file = assemble_group(group, &self.nonce, group_id).expect("groups are nonempty");
        RunCounters::bump(&self.counters.compiler_calls);
        RunCounters::bump(&self.counters.groups_compiled);
        let outcome = self
            .client
            .execute(&file.source, self.timeout_s)
            .map_err(|e| e.to_string())
            .and_then(|diags| map_diagnostics(&diags, &file).map_err(|e| e.to_string()));
        match outcome {
            Ok(per_member) => per_member
                .into_iter()
                .map(|d| SyntaxReport::from_diagnostics(d, SyntaxStage::Batch))
                .collect(),
            Err(error) => {
                tracing::warn!(group_id, members = group.members.len(), %error, "group failed; compiling members individually");
                RunCounters::bump(&self.counters.fallbacks);
                group
                    .members
                    .iter()
                    .map(|(_, st)| self.run_individual(st))
                    .collect()
            }
        }
    }

    fn run_individual(&self, statement: &FormalStatement) -> SyntaxReport {
        RunCounters::bump(&self.counters.compiler_calls);
        match self.client.execute(&statement.code, self.timeout_s) {
            Ok(diags) => SyntaxReport::from_diagnostics(diags, SyntaxStage::IndividualFallback),
            Err(e) => SyntaxReport::backend_failure(e.to_string()),
        }
    }
}

/// Checks `statements` with a fresh [`SyntaxChecker`].
pub fn run_syntax_check(
    statements: &[FormalStatement],
    client: Arc<dyn LeanClient>,
    config: &RunConfig,
) -> Vec<SyntaxReport> {
    SyntaxChecker::new(client, config).check(statements)
}
