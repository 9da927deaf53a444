//! The ladies' club session replayed against the simulated compiler and a
//! scripted two-judge panel.

use std::sync::Arc;

use autoformal::backends::script::ScriptedChat;
use autoformal::backends::simulated::SimulatedLean;
use autoformal::consistency::{Judge, JudgePanel};
use autoformal::orchestrator::{formalize, validate_trajectory, CheckTools};
use autoformal::syntax::SyntaxChecker;
use autoformal::types::{MathQuery, RunConfig, ToolName, Trajectory, TrajectoryStatus};
use serde::Deserialize;

#[derive(Deserialize)]
pub struct CaseStudy {
    pub problem: String,
    pub statements: Vec<String>,
    pub turns: Vec<String>,
    pub judge_reply: String,
    /// Pretty-printed syntax payloads for the failing and passing checks.
    pub expected_outputs: Vec<String>,
}

pub fn load() -> CaseStudy {
    serde_json::from_str(include_str!("../fixtures/case_study.json")).unwrap()
}

pub struct Replay {
    pub trajectory: Trajectory,
    pub model: Arc<ScriptedChat>,
    pub judge: Arc<ScriptedChat>,
}

pub fn replay(case: &CaseStudy) -> Replay {
    let config = RunConfig::default();
    let model = Arc::new(case.turns.iter().fold(ScriptedChat::new(), |s, t| s.then(t.clone())));
    let judge_a = Arc::new(ScriptedChat::new().then(case.judge_reply.clone()));
    let judge_b = Arc::new(ScriptedChat::new().then(case.judge_reply.clone()));
    let tools = CheckTools {
        syntax: SyntaxChecker::new(Arc::new(SimulatedLean::new()), &config).with_nonce("case"),
        panel: JudgePanel::new(vec![
            Judge::new("judge-a", judge_a.clone()),
            Judge::new("judge-b", judge_b),
        ]),
    };
    let query = MathQuery::new("ladies-club", case.problem.clone(), "case-study").unwrap();
    let trajectory = formalize(&query, model.clone(), Arc::new(tools), &config);
    Replay { trajectory, model, judge: judge_a }
}

pub fn syntax_result_text(payload: &str) -> String {
    format!("<tool_result>\nFunction: syntax_check\nOutput: {payload}\n</tool_result>")
}

/// Every golden property at once, for the acceptance report.
pub fn check_golden() -> Result<(), String> {
    let case = load();
    let r = replay(&case);
    let t = &r.trajectory;
    if t.status != TrajectoryStatus::Success || t.revision_count != 1 {
        return Err(format!("status {:?} after {} revisions", t.status, t.revision_count));
    }
    let seq: Vec<(ToolName, bool)> = t.tool_results().map(|x| (x.tool, x.passed())).collect();
    let want = [(ToolName::SyntaxCheck, false), (ToolName::SyntaxCheck, true), (ToolName::ConsistencyCheck, true)];
    if seq != want {
        return Err(format!("tool sequence {seq:?}"));
    }
    for (res, payload) in t.tool_results().zip(&case.expected_outputs) {
        if res.raw != syntax_result_text(payload) {
            return Err(format!("payload mismatch:\n{}", res.raw));
        }
    }
    if !validate_trajectory(t).is_compliant() {
        return Err("trajectory is not compliant".into());
    }
    Ok(())
}
