use serde::{Deserialize, Serialize};

use crate::types::{count_revisions, StepKind, ToolName, Trajectory, TrajectoryStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ruling", rename_all = "snake_case")]
pub enum Compliance {
    Compliant,
    Violation { reason: String },
}

impl Compliance {
    pub fn is_compliant(&self) -> bool {
        matches!(self, Compliance::Compliant)
    }
}

fn violation(reason: impl Into<String>) -> Compliance {
    Compliance::Violation {
        reason: reason.into(),
    }
}

/// Replays the executed tool sequence against the invocation rules and
/// checks that the status label and revision count agree with it.
pub fn validate_trajectory(t: &Trajectory) -> Compliance {
    let mut versions = 0usize;
    let mut current: Option<usize> = None;
    let mut syntax_passed = false;
    let mut failed = false;
    let mut success = false;
    let mut pending: Option<(ToolName, Option<usize>)> = None;
    let mut post_success_turn = false;

    for (i, s) in t.steps.iter().enumerate() {
        match s.kind {
            StepKind::ModelTurn => {
                if pending.is_some() {
                    return violation(format!("step {i}: model turn follows an unanswered tool call"));
                }
                if success {
                    if s.invocation.is_some() {
                        return violation(format!("step {i}: tool called after both checks passed"));
                    }
                    if post_success_turn {
                        return violation(format!("step {i}: more than one closing turn"));
                    }
                    post_success_turn = true;
                    continue;
                }
                if let Some(v) = s.statement_version {
                    if v == versions {
                        versions += 1;
                        current = Some(v);
                        syntax_passed = false;
                        failed = false;
                    } else if Some(v) != current {
                        return violation(format!("step {i}: refers to version {v} out of order"));
                    }
                }
                if let Some(inv) = &s.invocation {
                    pending = Some((inv.tool, s.statement_version));
                }
            }
            StepKind::ToolResult => {
                let Some((tool, version)) = pending.take() else {
                    return violation(format!("step {i}: tool result without a call"));
                };
                let Some(result) = &s.result else {
                    return violation(format!("step {i}: tool result step carries no result"));
                };
                if result.tool != tool || result.payload.tool() != tool {
                    return violation(format!("step {i}: result does not answer the {tool} call"));
                }
                if version.is_none() || version != current {
                    return violation(format!("step {i}: check ran on a stale or unknown version"));
                }
                let v = version.unwrap();
                if let Some(code) = t.steps[..i]
                    .iter()
                    .rev()
                    .find_map(|p| p.invocation.as_ref())
                    .and_then(|inv| inv.lean4_code())
                {
                    if !t.statements.get(v).is_some_and(|st| st.same_code(code)) {
                        return violation(format!("step {i}: checked code differs from version {v}"));
                    }
                }
                if failed {
                    return violation(format!("step {i}: re-check of unrevised version {v}"));
                }
                match tool {
                    ToolName::SyntaxCheck => {
                        if syntax_passed {
                            return violation(format!("step {i}: syntax re-run after it passed"));
                        }
                        syntax_passed = result.passed();
                    }
                    ToolName::ConsistencyCheck => {
                        if !syntax_passed {
                            return violation(format!(
                                "step {i}: consistency check before syntax passed on version {v}"
                            ));
                        }
                        success = result.passed();
                    }
                }
                failed = !result.passed();
            }
        }
    }

    if pending.is_some() && t.status == TrajectoryStatus::Success {
        return violation("success label on a run ending in an unanswered call");
    }
    match (success, t.status) {
        (true, TrajectoryStatus::Success) => {}
        (true, TrajectoryStatus::FailedRule) => {
            let drifted = t
                .steps
                .last()
                .is_some_and(|s| post_success_turn && s.statement_version.is_none());
            if !drifted {
                return violation("run stopped after both checks passed without a success label");
            }
        }
        (true, status) => {
            return violation(format!("both checks passed but status is {status:?}"));
        }
        (false, TrajectoryStatus::Success) => {
            return violation("success label without a passing consistency check");
        }
        (false, _) => {}
    }
    if t.statements.len() != versions {
        return violation(format!(
            "{} statements recorded but {versions} versions introduced",
            t.statements.len()
        ));
    }
    let counted = count_revisions(t).unwrap_or(0);
    if t.revision_count != counted {
        return violation(format!(
            "revision_count {} disagrees with {counted} recorded revisions",
            t.revision_count
        ));
    }
    Compliance::Compliant
}
