//! The revision loop: a model drafts a statement, calls the checks, reads
//! their results and revises until both checks pass or the budget runs out.

mod machine;
mod parse;
mod run;
mod validate;

pub use machine::{
    next_allowed_tools, step, LoopState, Phase, StepEffect, TerminalState, ToolError, ToolExecutor,
};
pub use parse::{
    last_code_block, parse_model_turn, render_payload, render_tool_call, render_tool_result,
    tool_call_span, ModelTurn, ParseError, TurnAction,
};
pub use run::{formalize, sample_seed, CheckTools, Formalizer, REPROMPT};
pub use validate::{validate_trajectory, Compliance};

use crate::types::Trajectory;

/// Canonical text of a trajectory: the query, then each step on its own
/// line. Also returns each step's `[start, end)` char range.
pub fn serialize_with_offsets(t: &Trajectory) -> (String, Vec<(usize, usize)>) {
    let mut text = t.query.text.clone();
    let mut pos = text.chars().count();
    let mut ranges = Vec::with_capacity(t.steps.len());
    for s in &t.steps {
        text.push('\n');
        pos += 1;
        let len = s.text.chars().count();
        ranges.push((pos, pos + len));
        text.push_str(&s.text);
        pos += len;
    }
    (text, ranges)
}

pub fn serialize_trajectory(t: &Trajectory) -> String {
    serialize_with_offsets(t).0
}
