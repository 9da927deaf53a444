//! The revision-loop rule machine.
//!
//! Three rules govern tool use: consistency may only run on a version whose
//! syntax check passed, every new version starts with a syntax check, and
//! the loop ends successfully exactly when both checks pass.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::parse::{render_tool_result, ModelTurn, TurnAction};
use crate::consistency::{ConsistencyError, ConsistencyReport};
use crate::syntax::SyntaxReport;
use crate::types::{
    FormalStatement, MathQuery, ToolInvocation, ToolName, ToolPayload, ToolResult,
    TrajectoryStatus,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingFirstStatement,
    AwaitingSyntax,
    SyntaxPassed,
    DoneSuccess,
    DoneFailed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::DoneSuccess | Phase::DoneFailed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    pub phase: Phase,
    /// Index of the latest statement version.
    pub current_version: Option<usize>,
    pub current_statement: Option<FormalStatement>,
    pub revisions_used: usize,
    /// Revisions allowed beyond the first version.
    pub budget: usize,
    /// The latest check on the current version failed; the next statement
    /// submitted is a revision even if its text is unchanged.
    pub failure_pending: bool,
    pub reprompted: bool,
    pub last_syntax: Option<SyntaxReport>,
    pub status: Option<TrajectoryStatus>,
    pub violation: Option<String>,
}

impl LoopState {
    pub fn new(budget: usize) -> Self {
        Self {
            phase: Phase::AwaitingFirstStatement,
            current_version: None,
            current_statement: None,
            revisions_used: 0,
            budget,
            failure_pending: false,
            reprompted: false,
            last_syntax: None,
            status: None,
            violation: None,
        }
    }

    fn fail(&mut self, status: TrajectoryStatus, reason: impl Into<String>) {
        self.phase = Phase::DoneFailed;
        self.status = Some(status);
        self.violation = Some(reason.into());
    }
}

pub fn next_allowed_tools(state: &LoopState) -> BTreeSet<ToolName> {
    match state.phase {
        Phase::AwaitingFirstStatement | Phase::AwaitingSyntax => [ToolName::SyntaxCheck].into(),
        Phase::SyntaxPassed => [ToolName::ConsistencyCheck].into(),
        Phase::DoneSuccess | Phase::DoneFailed => BTreeSet::new(),
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ToolError {
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
    #[error("tool unavailable: {0}")]
    Unavailable(String),
}

/// The two checks as seen by the loop.
pub trait ToolExecutor: Send + Sync {
    fn syntax_check(&self, statement: &FormalStatement) -> Result<SyntaxReport, ToolError>;

    fn consistency_check(
        &self,
        query: &MathQuery,
        statement: &FormalStatement,
        syntax: &SyntaxReport,
    ) -> Result<ConsistencyReport, ToolError>;
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("loop already finished in phase {0:?}")]
pub struct TerminalState(pub Phase);

/// Side effects of one step, for the caller to record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepEffect {
    /// Statement introduced by this turn as a new version.
    pub new_version: Option<FormalStatement>,
    /// Version the turn introduced or invoked a tool on.
    pub statement_version: Option<usize>,
    pub invocation: Option<ToolInvocation>,
    pub result: Option<ToolResult>,
    /// The turn carried no action and earned a re-prompt.
    pub reprompt: bool,
}

/// Registers `code` as the next version, or ends the run when that would
/// overspend the budget. Returns false when the run ended.
fn introduce(state: &mut LoopState, code: &FormalStatement, effect: &mut StepEffect) -> bool {
    let next = state.current_version.map_or(0, |v| v + 1);
    if next > 0 {
        if state.revisions_used >= state.budget {
            state.fail(
                TrajectoryStatus::FailedBudget,
                format!("revision budget of {} exhausted", state.budget),
            );
            return false;
        }
        state.revisions_used += 1;
    }
    state.current_version = Some(next);
    state.current_statement = Some(code.clone());
    state.phase = Phase::AwaitingSyntax;
    state.failure_pending = false;
    state.last_syntax = None;
    effect.new_version = Some(code.clone());
    effect.statement_version = Some(next);
    true
}

fn is_fresh(state: &LoopState, code: &FormalStatement) -> bool {
    match &state.current_statement {
        None => true,
        Some(current) => state.failure_pending || !current.same_code(&code.code),
    }
}

/// Applies one model turn. Returns the next state and what happened.
pub fn step(
    state: &LoopState,
    turn: &ModelTurn,
    query: &MathQuery,
    tools: &dyn ToolExecutor,
) -> Result<(LoopState, StepEffect), TerminalState> {
    if state.phase.is_terminal() {
        return Err(TerminalState(state.phase));
    }
    let mut next = state.clone();
    let mut effect = StepEffect::default();

    if let Some(code) = &turn.statement {
        if is_fresh(&next, code) && !introduce(&mut next, code, &mut effect) {
            return Ok((next, effect));
        }
    }

    match &turn.action {
        TurnAction::NoAction => {
            if effect.new_version.is_none() {
                if next.reprompted {
                    next.fail(TrajectoryStatus::FailedRule, "turn carried no action");
                } else {
                    next.reprompted = true;
                    effect.reprompt = true;
                }
            }
        }
        TurnAction::FinalStatement(_) => {
            next.fail(
                TrajectoryStatus::FailedRule,
                "final statement declared before both checks passed",
            );
        }
        TurnAction::NewStatement(code) => {
            if is_fresh(&next, code) {
                introduce(&mut next, code, &mut effect);
            }
        }
        TurnAction::Invoke(invocation) => {
            effect.invocation = Some(invocation.clone());
            let Some(code) = invocation.lean4_code() else {
                next.fail(TrajectoryStatus::FailedRule, "tool call lacks lean4_code");
                return Ok((next, effect));
            };
            let submitted = match FormalStatement::new(code) {
                Ok(st) => st,
                Err(_) => {
                    next.fail(TrajectoryStatus::FailedRule, "tool call carries empty code");
                    return Ok((next, effect));
                }
            };
            let implicit = turn.statement.is_none()
                && (next.current_statement.is_none() || next.failure_pending);
            if implicit && !introduce(&mut next, &submitted, &mut effect) {
                return Ok((next, effect));
            }
            let current = next.current_statement.clone().expect("a version exists");
            if !current.same_code(&submitted.code) {
                next.fail(
                    TrajectoryStatus::FailedRule,
                    "checked code differs from the latest statement version",
                );
                return Ok((next, effect));
            }
            effect.statement_version = next.current_version;
            if !next_allowed_tools(&next).contains(&invocation.tool) {
                next.fail(
                    TrajectoryStatus::FailedRule,
                    format!("{} not allowed in phase {:?}", invocation.tool, next.phase),
                );
                return Ok((next, effect));
            }
            let payload = match invocation.tool {
                ToolName::SyntaxCheck => tools.syntax_check(&current).map(ToolPayload::Syntax),
                ToolName::ConsistencyCheck => {
                    let syntax = next.last_syntax.clone().expect("syntax passed on this version");
                    tools
                        .consistency_check(query, &current, &syntax)
                        .map(ToolPayload::Consistency)
                }
            };
            let payload = match payload {
                Ok(p) => p,
                Err(e) => {
                    next.fail(TrajectoryStatus::Aborted, e.to_string());
                    return Ok((next, effect));
                }
            };
            match &payload {
                ToolPayload::Syntax(report) if report.pass => {
                    next.phase = Phase::SyntaxPassed;
                    next.last_syntax = Some(report.clone());
                }
                ToolPayload::Syntax(_) => next.failure_pending = true,
                ToolPayload::Consistency(report) if report.pass => {
                    next.phase = Phase::DoneSuccess;
                    next.status = Some(TrajectoryStatus::Success);
                }
                ToolPayload::Consistency(_) => {
                    next.phase = Phase::AwaitingSyntax;
                    next.failure_pending = true;
                    next.last_syntax = None;
                }
            }
            let mut result = ToolResult {
                tool: invocation.tool,
                payload,
                raw: String::new(),
            };
            result.raw = render_tool_result(&result);
            effect.result = Some(result);
        }
    }
    Ok((next, effect))
}
