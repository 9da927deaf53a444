use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::estimators::pearson;
use super::{EvalError, SampleOutcome};
use crate::types::{StepKind, ToolName, ToolPayload, Trajectory};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolUsageStats {
    pub trajectories: usize,
    pub avg_tool_calls: f64,
    pub syntax_calls: usize,
    pub consistency_calls: usize,
    pub syntax_success_rate: Option<f64>,
    pub consistency_success_rate: Option<f64>,
    /// Revision index at which a consistency check ran → its pass rate.
    pub consistency_success_by_attempt: BTreeMap<usize, f64>,
}

pub fn tool_usage_stats(trajectories: &[Trajectory]) -> ToolUsageStats {
    if trajectories.is_empty() {
        return ToolUsageStats::default();
    }
    let mut calls = 0usize;
    let (mut syn, mut syn_ok, mut con, mut con_ok) = (0usize, 0usize, 0usize, 0usize);
    let mut by_attempt: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for t in trajectories {
        calls += t.invocation_count();
        let mut version = 0;
        for s in &t.steps {
            match s.kind {
                StepKind::ModelTurn => version = s.statement_version.unwrap_or(version),
                StepKind::ToolResult => {
                    let Some(r) = &s.result else { continue };
                    match (&r.payload, r.tool) {
                        (ToolPayload::Syntax(rep), ToolName::SyntaxCheck) => {
                            syn += 1;
                            syn_ok += usize::from(rep.pass);
                        }
                        (ToolPayload::Consistency(rep), ToolName::ConsistencyCheck) => {
                            con += 1;
                            con_ok += usize::from(rep.pass);
                            let slot = by_attempt.entry(version).or_default();
                            slot.0 += 1;
                            slot.1 += usize::from(rep.pass);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    let rate = |ok: usize, n: usize| (n > 0).then(|| ok as f64 / n as f64);
    ToolUsageStats {
        trajectories: trajectories.len(),
        avg_tool_calls: calls as f64 / trajectories.len() as f64,
        syntax_calls: syn,
        consistency_calls: con,
        syntax_success_rate: rate(syn_ok, syn),
        consistency_success_rate: rate(con_ok, con),
        consistency_success_by_attempt: by_attempt
            .into_iter()
            .map(|(k, (n, ok))| (k, ok as f64 / n as f64))
            .collect(),
    }
}

/// One outcome per trajectory. Syntax passes when the last syntax report
/// did; consistency passes when the run succeeded.
pub fn outcomes_from_trajectories(trajectories: &[Trajectory], benchmark: &str) -> Vec<SampleOutcome> {
    trajectories
        .iter()
        .map(|t| {
            let syntax_pass = t
                .tool_results()
                .filter(|r| r.tool == ToolName::SyntaxCheck)
                .last()
                .is_some_and(|r| r.passed());
            SampleOutcome {
                benchmark: benchmark.to_string(),
                query_id: t.query.id.clone(),
                sample_index: t.sample_index,
                syntax_pass,
                consistency_pass: t.is_success() && syntax_pass,
                tool_calls: t.invocation_count(),
                revisions: t.revision_count,
            }
        })
        .collect()
}

/// Three annotator judgements for one statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanLabel {
    pub query_id: String,
    pub labels: Vec<bool>,
}

impl HumanLabel {
    pub fn majority(&self) -> bool {
        2 * self.labels.iter().filter(|&&l| l).count() > self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub items: usize,
    pub agreement_rate: f64,
    pub human_positive_rate: f64,
    pub tool_positive_rate: f64,
    /// `None` when either side has no variance.
    pub pearson: Option<f64>,
}

/// Compares majority human labels with tool verdicts on the shared ids.
pub fn human_agreement(labels: &[HumanLabel], tool: &BTreeMap<String, bool>) -> Result<Agreement, EvalError> {
    let pairs: Vec<(f64, f64)> = labels
        .iter()
        .filter_map(|l| tool.get(&l.query_id).map(|&v| (f64::from(u8::from(l.majority())), f64::from(u8::from(v)))))
        .collect();
    if pairs.is_empty() {
        return Err(EvalError::DegenerateInput("no labelled item has a tool verdict".into()));
    }
    let n = pairs.len() as f64;
    let (h, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    Ok(Agreement {
        items: pairs.len(),
        agreement_rate: pairs.iter().filter(|(a, b)| a == b).count() as f64 / n,
        human_positive_rate: h.iter().sum::<f64>() / n,
        tool_positive_rate: t.iter().sum::<f64>() / n,
        pearson: pearson(&h, &t).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{success_trajectory, success_with, Failure};
    use crate::types::TrajectoryStatus;

    #[test]
    fn average_calls() {
        // 0 revisions: 2 calls; 2 syntax failures: 4 calls.
        let ts = vec![success_with("a", 0, 0), success_with("b", 0, 2)];
        let s = tool_usage_stats(&ts);
        assert_eq!(s.avg_tool_calls, 3.0);
        assert_eq!(s.consistency_success_rate, Some(1.0));
        assert_eq!(s.syntax_success_rate, Some(2.0 / 4.0));
        assert_eq!(tool_usage_stats(&[]), ToolUsageStats::default());
    }

    #[test]
    fn by_attempt_counts() {
        // a: consistency fails at 0, passes at 1.
        // b: syntax fails at 0, consistency passes at 1.
        // c: passes at 0.
        let ts = vec![
            success_trajectory("a", 0, &[Failure::Consistency]),
            success_trajectory("b", 0, &[Failure::Syntax]),
            success_trajectory("c", 0, &[]),
        ];
        let s = tool_usage_stats(&ts);
        let expected: BTreeMap<usize, f64> = [(0, 0.5), (1, 1.0)].into();
        assert_eq!(s.consistency_success_by_attempt, expected);
        assert_eq!(s.consistency_calls, 4);
        assert_eq!(s.consistency_success_rate, Some(0.75));
    }

    #[test]
    fn outcomes_respect_gating() {
        let mut failed = success_trajectory("a", 1, &[Failure::Syntax]);
        failed.steps.truncate(2);
        failed.statements.truncate(1);
        failed.revision_count = 0;
        failed.status = TrajectoryStatus::FailedBudget;
        let os = outcomes_from_trajectories(&[success_with("a", 0, 1), failed], "bench");
        assert_eq!((os[0].syntax_pass, os[0].consistency_pass), (true, true));
        assert_eq!((os[1].syntax_pass, os[1].consistency_pass), (false, false));
        assert!(os.iter().all(|o| o.check().is_ok()));
        assert_eq!(os[0].revisions, 1);
    }

    #[test]
    fn majority_and_agreement() {
        let labels = vec![
            HumanLabel { query_id: "a".into(), labels: vec![true, true, false] },
            HumanLabel { query_id: "b".into(), labels: vec![false, false, true] },
            HumanLabel { query_id: "c".into(), labels: vec![true, true, true] },
        ];
        let tool: BTreeMap<String, bool> =
            [("a".to_string(), true), ("b".to_string(), true), ("c".to_string(), true)].into();
        let a = human_agreement(&labels, &tool).unwrap();
        assert_eq!(a.items, 3);
        assert!((a.agreement_rate - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.pearson, None);
        assert!(human_agreement(&labels, &BTreeMap::new()).is_err());
    }
}
