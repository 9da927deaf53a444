//! Random model and tools for driving the revision loop, plus a rule
//! checker written against the raw trajectory rather than the validator.

use std::sync::{Arc, Mutex};

use autoformal::backends::{BackendError, ChatClient, ChatMessage, ChatParams};
use autoformal::consistency::ConsistencyReport;
use autoformal::orchestrator::{formalize, ToolError, ToolExecutor};
use autoformal::syntax::{SyntaxReport, SyntaxStage};
use autoformal::types::{
    Diagnostic, FormalStatement, MathQuery, RunConfig, StepKind, ToolName, Trajectory,
    TrajectoryStatus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CODES: [&str; 3] = [
    "import Mathlib\nimport Aesop\n\ntheorem a : True := by sorry",
    "import Mathlib\nimport Aesop\n\ntheorem b : 1 = 1 := by sorry",
    "import Mathlib\nimport Aesop\n\ntheorem c (x : ℕ) : x = x := by sorry",
];

fn call(tool: &str, code: &str) -> String {
    let payload = serde_json::json!({"name": tool, "arguments": {"lean4_code": code}});
    format!("<tool_call>\n{payload}\n</tool_call>")
}

/// Mostly follows the protocol, reading the last tool result, and
/// otherwise picks a move uniformly from a menu of well- and ill-formed ones.
pub struct RandomModel {
    rng: Mutex<ChaCha8Rng>,
    last_code: Mutex<&'static str>,
}

impl RandomModel {
    pub fn new(seed: u64) -> Self {
        Self { rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)), last_code: Mutex::new(CODES[0]) }
    }
}

impl ChatClient for RandomModel {
    fn chat(&self, messages: &[ChatMessage], _: &ChatParams) -> Result<String, BackendError> {
        let mut rng = self.rng.lock().unwrap();
        let mut last = self.last_code.lock().unwrap();
        let feedback = messages.last().map(|m| m.content.as_str()).unwrap_or_default();
        let passed = feedback.contains("\"pass\": true");
        let on_track = rng.gen_bool(0.85);
        let code = CODES[rng.gen_range(0..CODES.len())];
        let text = if on_track && passed && feedback.contains("Function: syntax_check") {
            call("consistency_check", &last)
        } else if on_track && passed {
            format!("**Final Statement**\n```lean4\n{}\n```", *last)
        } else if on_track {
            *last = code;
            format!("Trying this.\n```lean4\n{code}\n```\n{}", call("syntax_check", code))
        } else {
            let tool = if rng.gen_bool(0.5) { "syntax_check" } else { "consistency_check" };
            match rng.gen_range(0..7) {
                0..=1 => format!("Trying this.\n```lean4\n{code}\n```\n{}", call(tool, code)),
                2 => call(tool, code),
                3 => format!("**Final Statement**\n```lean4\n{code}\n```"),
                4 => "Thinking it over.".to_string(),
                5 => "<tool_call>\n{\"name\": \"syntax_check\"\n</tool_call>".to_string(),
                _ => call("prove_it", code),
            }
        };
        Ok(text)
    }
}

/// Tools whose verdicts are coin flips.
pub struct RandomTools(Mutex<ChaCha8Rng>);

impl RandomTools {
    pub fn new(seed: u64) -> Self {
        Self(Mutex::new(ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15)))
    }
}

impl ToolExecutor for RandomTools {
    fn syntax_check(&self, _: &FormalStatement) -> Result<SyntaxReport, ToolError> {
        let pass = self.0.lock().unwrap().gen_bool(0.6);
        let diags = if pass { vec![] } else { vec![Diagnostic::error((1, 0), (1, 1), "bad")] };
        Ok(SyntaxReport::from_diagnostics(diags, SyntaxStage::Batch))
    }

    fn consistency_check(
        &self,
        _: &MathQuery,
        _: &FormalStatement,
        _: &SyntaxReport,
    ) -> Result<ConsistencyReport, ToolError> {
        let pass = self.0.lock().unwrap().gen_bool(0.5);
        Ok(ConsistencyReport { pass, explanations: String::new(), per_judge: vec![] })
    }
}

pub fn run_sequence(seed: u64, max_revisions: usize) -> Trajectory {
    let config = RunConfig { max_revisions, ..RunConfig::default() };
    let query = MathQuery::new(format!("r{seed}"), "Random problem.", "prop").unwrap();
    formalize(&query, Arc::new(RandomModel::new(seed)), Arc::new(RandomTools::new(seed)), &config)
}

/// Checks the three loop rules on executed tool traffic:
/// consistency only right after a syntax pass on the same code, no syntax
/// re-run on code that already passed, and revisions within budget.
pub fn check_rules(t: &Trajectory, budget: usize) -> Result<(), String> {
    let mut passed_code: Option<String> = None;
    let mut succeeded = false;
    let mut pending: Option<(ToolName, String)> = None;
    for (i, s) in t.steps.iter().enumerate() {
        match s.kind {
            StepKind::ModelTurn => {
                pending = s.invocation.as_ref().map(|inv| {
                    (inv.tool, inv.lean4_code().unwrap_or_default().to_string())
                });
            }
            StepKind::ToolResult => {
                let result = s.result.as_ref().ok_or(format!("step {i}: tool step without result"))?;
                let (tool, code) = pending.take().ok_or(format!("step {i}: result without a call"))?;
                if tool != result.tool {
                    return Err(format!("step {i}: result for {} answers {tool}", result.tool));
                }
                if succeeded {
                    return Err(format!("step {i}: tool ran after success"));
                }
                if !t.statements.iter().any(|st| st.code == code) {
                    return Err(format!("step {i}: checked code is not a recorded version"));
                }
                match tool {
                    ToolName::SyntaxCheck => {
                        if passed_code.as_deref() == Some(code.as_str()) {
                            return Err(format!("step {i}: syntax re-run on passed code"));
                        }
                        passed_code = result.passed().then_some(code);
                    }
                    ToolName::ConsistencyCheck => {
                        if passed_code.as_deref() != Some(code.as_str()) {
                            return Err(format!("step {i}: consistency without a syntax pass"));
                        }
                        succeeded = result.passed();
                        passed_code = None;
                    }
                }
            }
        }
    }
    if t.revision_count > budget {
        return Err(format!("{} revisions over budget {budget}", t.revision_count));
    }
    if t.statements.len() > budget + 1 {
        return Err(format!("{} versions recorded", t.statements.len()));
    }
    if succeeded != (t.status == TrajectoryStatus::Success) && t.status != TrajectoryStatus::FailedRule {
        return Err(format!("status {:?} disagrees with tool outcomes", t.status));
    }
    if t.status == TrajectoryStatus::Success && !succeeded {
        return Err("success without a passing consistency check".into());
    }
    Ok(())
}
