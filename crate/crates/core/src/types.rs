//! Value types shared by every stage: queries, statements, diagnostics,
//! tool traffic and trajectories.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::consistency::ConsistencyReport;
use crate::syntax::SyntaxReport;

/// Imports the formalization prompt mandates at the top of every statement.
pub const DEFAULT_REQUIRED_IMPORTS: [&str; 2] = ["Mathlib", "Aesop"];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("query id must be nonempty")]
    EmptyQueryId,
    #[error("query `{0}` has empty text")]
    EmptyQueryText(String),
    #[error("statement code must be nonempty")]
    EmptyStatement,
    #[error("diagnostic span is invalid: {0}")]
    InvalidSpan(String),
    #[error("trajectory has no statement versions")]
    EmptyTrajectory,
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
}

/// A natural-language problem plus its identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MathQuery {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source: String,
}

impl MathQuery {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        source: impl Into<String>,
    ) -> Result<Self, TypeError> {
        let query = Self {
            id: id.into(),
            text: text.into(),
            source: source.into(),
        };
        query.check()?;
        Ok(query)
    }

    pub fn check(&self) -> Result<(), TypeError> {
        if self.id.is_empty() {
            return Err(TypeError::EmptyQueryId);
        }
        if self.text.trim().is_empty() {
            return Err(TypeError::EmptyQueryText(self.id.clone()));
        }
        Ok(())
    }
}

fn default_required_imports() -> Vec<String> {
    DEFAULT_REQUIRED_IMPORTS.iter().map(|s| s.to_string()).collect()
}

/// Candidate formal statement and the imports it is required to carry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormalStatement {
    pub code: String,
    #[serde(default = "default_required_imports")]
    pub required_imports: Vec<String>,
}

impl FormalStatement {
    /// Statement with the default `Mathlib`/`Aesop` import contract.
    pub fn new(code: impl Into<String>) -> Result<Self, TypeError> {
        Self::with_imports(code, default_required_imports())
    }

    pub fn with_imports(
        code: impl Into<String>,
        required_imports: Vec<String>,
    ) -> Result<Self, TypeError> {
        let code = code.into();
        if code.trim().is_empty() {
            return Err(TypeError::EmptyStatement);
        }
        Ok(Self {
            code,
            required_imports,
        })
    }

    /// Two statements denote the same version when their code matches up to
    /// surrounding whitespace.
    pub fn same_code(&self, other: &str) -> bool {
        self.code.trim() == other.trim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    #[serde(alias = "information")]
    Info,
}

/// One compiler message. Lines are 1-based, columns 0-based.
///
/// Serializes in the compiler server's shape:
/// `{"severity", "pos": {"line", "column"}, "endPos": {...}, "data"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WireDiagnostic", into = "WireDiagnostic")]
pub struct Diagnostic {
    pub severity: Severity,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn new(
        severity: Severity,
        (start_line, start_col): (u32, u32),
        (end_line, end_col): (u32, u32),
        message: impl Into<String>,
    ) -> Result<Self, TypeError> {
        if start_line == 0 || end_line == 0 {
            return Err(TypeError::InvalidSpan("lines are 1-based".into()));
        }
        if (start_line, start_col) > (end_line, end_col) {
            return Err(TypeError::InvalidSpan(format!(
                "start {start_line}:{start_col} after end {end_line}:{end_col}"
            )));
        }
        Ok(Self {
            severity,
            start_line,
            start_col,
            end_line,
            end_col,
            message: message.into(),
        })
    }

    pub fn error(start: (u32, u32), end: (u32, u32), message: impl Into<String>) -> Self {
        Self::new(Severity::Error, start, end, message).expect("valid span")
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// Moves the span by `delta` lines, keeping columns.
    pub(crate) fn shifted(&self, delta: i64) -> Self {
        let shift = |line: u32| (i64::from(line) + delta).max(1) as u32;
        let mut out = self.clone();
        out.start_line = shift(self.start_line);
        out.end_line = shift(self.end_line).max(out.start_line);
        if out.end_line == out.start_line && out.end_col < out.start_col {
            out.end_col = out.start_col;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WirePos {
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireDiagnostic {
    pub severity: Severity,
    pub pos: WirePos,
    #[serde(rename = "endPos", default, skip_serializing_if = "Option::is_none")]
    pub end_pos: Option<WirePos>,
    pub data: String,
}

impl TryFrom<WireDiagnostic> for Diagnostic {
    type Error = TypeError;

    fn try_from(wire: WireDiagnostic) -> Result<Self, Self::Error> {
        let end = wire.end_pos.unwrap_or(wire.pos);
        Diagnostic::new(
            wire.severity,
            (wire.pos.line, wire.pos.column),
            (end.line, end.column),
            wire.data,
        )
    }
}

impl From<Diagnostic> for WireDiagnostic {
    fn from(d: Diagnostic) -> Self {
        WireDiagnostic {
            severity: d.severity,
            pos: WirePos {
                line: d.start_line,
                column: d.start_col,
            },
            end_pos: Some(WirePos {
                line: d.end_line,
                column: d.end_col,
            }),
            data: d.message,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolName {
    SyntaxCheck,
    ConsistencyCheck,
}

impl ToolName {
    pub fn as_str(self) -> &'static str {
        match self {
            ToolName::SyntaxCheck => "syntax_check",
            ToolName::ConsistencyCheck => "consistency_check",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "syntax_check" => Some(ToolName::SyntaxCheck),
            "consistency_check" => Some(ToolName::ConsistencyCheck),
            _ => None,
        }
    }
}

impl fmt::Display for ToolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A tool call as emitted by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub tool: ToolName,
    pub arguments: serde_json::Value,
    pub raw: String,
}

impl ToolInvocation {
    /// The statement code carried in the `lean4_code` argument.
    pub fn lean4_code(&self) -> Option<&str> {
        self.arguments.get("lean4_code").and_then(|v| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToolPayload {
    Syntax(SyntaxReport),
    Consistency(ConsistencyReport),
}

impl ToolPayload {
    pub fn tool(&self) -> ToolName {
        match self {
            ToolPayload::Syntax(_) => ToolName::SyntaxCheck,
            ToolPayload::Consistency(_) => ToolName::ConsistencyCheck,
        }
    }

    pub fn passed(&self) -> bool {
        match self {
            ToolPayload::Syntax(r) => r.pass,
            ToolPayload::Consistency(r) => r.pass,
        }
    }
}

/// A tool's answer together with the exact text injected into the conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub tool: ToolName,
    pub payload: ToolPayload,
    pub raw: String,
}

impl ToolResult {
    pub fn passed(&self) -> bool {
        self.payload.passed()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    ModelTurn,
    ToolResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub kind: StepKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invocation: Option<ToolInvocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ToolResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement_version: Option<usize>,
}

impl TrajectoryStep {
    pub fn model_turn(
        text: impl Into<String>,
        invocation: Option<ToolInvocation>,
        statement_version: Option<usize>,
    ) -> Self {
        Self {
            kind: StepKind::ModelTurn,
            text: text.into(),
            invocation,
            result: None,
            statement_version,
        }
    }

    pub fn tool_result(result: ToolResult) -> Self {
        Self {
            kind: StepKind::ToolResult,
            text: result.raw.clone(),
            invocation: None,
            result: Some(result),
            statement_version: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Success,
    FailedBudget,
    FailedRule,
    Aborted,
}

/// One complete formalization session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub query: MathQuery,
    #[serde(default)]
    pub sample_index: usize,
    pub steps: Vec<TrajectoryStep>,
    pub statements: Vec<FormalStatement>,
    pub status: TrajectoryStatus,
    pub revision_count: usize,
}

impl Trajectory {
    pub fn is_success(&self) -> bool {
        self.status == TrajectoryStatus::Success
    }

    pub fn final_statement(&self) -> Option<&FormalStatement> {
        self.statements.last()
    }

    pub fn tool_results(&self) -> impl Iterator<Item = &ToolResult> {
        self.steps.iter().filter_map(|s| s.result.as_ref())
    }

    pub fn invocation_count(&self) -> usize {
        self.steps.iter().filter(|s| s.invocation.is_some()).count()
    }
}

/// Number of revisions: statement versions beyond the first.
pub fn count_revisions(trajectory: &Trajectory) -> Result<usize, TypeError> {
    match trajectory.statements.len() {
        0 => Err(TypeError::EmptyTrajectory),
        n => Ok(n - 1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Exclusive bound on revisions: a run may use at most `max_revisions - 1`.
    pub max_revisions: usize,
    pub samples_per_query: usize,
    pub temperature: f64,
    pub batch_size: usize,
    pub compile_timeout_s: f64,
    pub judge_order: Vec<String>,
    pub decontamination_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_revisions: 4,
            samples_per_query: 16,
            temperature: 0.6,
            batch_size: 20,
            compile_timeout_s: 300.0,
            judge_order: vec!["judge-a".into(), "judge-b".into()],
            decontamination_threshold: 0.8,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), TypeError> {
        let bad = |msg: &str| Err(TypeError::InvalidConfig(msg.to_string()));
        if self.max_revisions == 0 {
            return bad("max_revisions must be positive");
        }
        if self.samples_per_query == 0 {
            return bad("samples_per_query must be positive");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.compile_timeout_s.is_nan() || self.compile_timeout_s <= 0.0 {
            return bad("compile_timeout_s must be positive");
        }
        if !(0.0..=1.0).contains(&self.decontamination_threshold) {
            return bad("decontamination_threshold must lie in [0, 1]");
        }
        Ok(())
    }

    /// Revisions a single run may spend.
    pub fn revision_budget(&self) -> usize {
        self.max_revisions.saturating_sub(1)
    }
}
