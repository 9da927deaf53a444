//! Synthetic trajectories in the exact wire format, for tests and demos.

use crate::consistency::ConsistencyReport;
use crate::orchestrator::render_tool_result;
use crate::syntax::{SyntaxReport, SyntaxStage};
use crate::types::{
    Diagnostic, FormalStatement, MathQuery, ToolInvocation, ToolName, ToolPayload, ToolResult,
    Trajectory, TrajectoryStatus, TrajectoryStep,
};

pub fn statement_code(query_id: &str, version: usize) -> String {
    format!("import Mathlib\nimport Aesop\n\ntheorem {query_id}_v{version} : {version} + 0 = {version} := by sorry")
}

fn invocation(tool: ToolName, code: &str) -> ToolInvocation {
    let arguments = serde_json::json!({ "lean4_code": code });
    let raw = serde_json::json!({"name": tool.as_str(), "arguments": arguments}).to_string();
    ToolInvocation { tool, arguments, raw }
}

fn turn_text(block: Option<&str>, inv: &ToolInvocation) -> String {
    let mut text = String::from("Checking the statement.\n");
    if let Some(code) = block {
        text.push_str(&format!("```lean4\n{code}\n```\n"));
    }
    text.push_str(&format!("<tool_call>\n{}\n</tool_call>", inv.raw));
    text
}

fn result_step(tool: ToolName, pass: bool) -> TrajectoryStep {
    let payload = match tool {
        ToolName::SyntaxCheck => {
            let diags = if pass {
                vec![]
            } else {
                vec![Diagnostic::error((4, 10), (4, 12), "unexpected token")]
            };
            ToolPayload::Syntax(SyntaxReport::from_diagnostics(diags, SyntaxStage::Batch))
        }
        ToolName::ConsistencyCheck => ToolPayload::Consistency(ConsistencyReport {
            pass,
            explanations: if pass { "matches".into() } else { "bound differs".into() },
            per_judge: vec![],
        }),
    };
    let mut result = ToolResult { tool, payload, raw: String::new() };
    result.raw = render_tool_result(&result);
    TrajectoryStep::tool_result(result)
}

/// How version `v` of a synthetic run fails before the final one passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Syntax,
    Consistency,
}

/// A compliant run whose first `failures.len()` versions fail as listed and
/// whose last version passes both checks.
pub fn success_trajectory(query_id: &str, sample_index: usize, failures: &[Failure]) -> Trajectory {
    let mut steps = Vec::new();
    let mut statements = Vec::new();
    for (v, outcome) in failures.iter().map(Some).chain([None]).enumerate() {
        let code = statement_code(query_id, v);
        statements.push(FormalStatement::new(code.clone()).expect("non-empty"));
        let syn = invocation(ToolName::SyntaxCheck, &code);
        steps.push(TrajectoryStep::model_turn(turn_text(Some(&code), &syn), Some(syn), Some(v)));
        let syntax_pass = outcome != Some(&Failure::Syntax);
        steps.push(result_step(ToolName::SyntaxCheck, syntax_pass));
        if !syntax_pass {
            continue;
        }
        let con = invocation(ToolName::ConsistencyCheck, &code);
        steps.push(TrajectoryStep::model_turn(turn_text(None, &con), Some(con), Some(v)));
        steps.push(result_step(ToolName::ConsistencyCheck, outcome.is_none()));
    }
    let last = statements.len() - 1;
    let final_text = format!("**Final Statement**\n```lean4\n{}\n```", statements[last].code);
    steps.push(TrajectoryStep::model_turn(final_text, None, Some(last)));
    Trajectory {
        query: MathQuery::new(query_id, format!("Problem {query_id}."), "synthetic").expect("valid"),
        sample_index,
        steps,
        revision_count: last,
        statements,
        status: TrajectoryStatus::Success,
    }
}

/// Success after `revisions` syntax failures.
pub fn success_with(query_id: &str, sample_index: usize, revisions: usize) -> Trajectory {
    success_trajectory(query_id, sample_index, &vec![Failure::Syntax; revisions])
}
