//! Labelled consistency sets judged by two table-driven judges, scored
//! individually and as a unanimous panel.

use std::collections::HashMap;
use std::sync::Arc;

use autoformal::backends::{BackendError, ChatClient, ChatMessage, ChatParams};
use autoformal::consistency::{Judge, JudgePanel};
use autoformal::eval::{confusion_metrics, ConfusionCounts};
use autoformal::syntax::{SyntaxReport, SyntaxStage};
use autoformal::types::{FormalStatement, MathQuery};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Answers from a table keyed by the item tag found in the prompt.
/// `None` entries produce an unparseable reply.
struct TableJudge(HashMap<String, Option<bool>>);

impl ChatClient for TableJudge {
    fn chat(&self, messages: &[ChatMessage], _: &ChatParams) -> Result<String, BackendError> {
        let prompt = &messages.last().unwrap().content;
        let tag = prompt
            .split_whitespace()
            .find(|w| w.starts_with("ITEM-"))
            .map(|w| w.trim_end_matches('.'))
            .ok_or_else(|| BackendError::Transport("no item tag".into()))?;
        Ok(match self.0.get(tag).copied().flatten() {
            Some(true) => r#"{"reasons": "matches", "is_assistant_correct": "Correct"}"#.into(),
            Some(false) => r#"{"reasons": "differs", "is_assistant_correct": "Incorrect"}"#.into(),
            None => "I cannot decide.".into(),
        })
    }
}

fn tally(c: &mut ConfusionCounts, truth: bool, predicted: bool) {
    match (truth, predicted) {
        (true, true) => c.tp += 1,
        (false, true) => c.fp += 1,
        (false, false) => c.tn += 1,
        (true, false) => c.fn_ += 1,
    }
}

/// False positive rates `(judge_a, judge_b, panel)` on one random set.
pub fn fpr_set(seed: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(8..40);
    let acc_a = rng.gen_range(0.5..0.95);
    let acc_b = rng.gen_range(0.5..0.95);
    let mut truth = Vec::with_capacity(n);
    let (mut table_a, mut table_b) = (HashMap::new(), HashMap::new());
    for i in 0..n {
        // At least one negative so every rate is defined.
        let label = i > 0 && rng.gen_bool(0.5);
        truth.push(label);
        let verdict = |acc: f64, rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.05) {
                None
            } else if rng.gen_bool(acc) {
                Some(label)
            } else {
                Some(!label)
            }
        };
        table_a.insert(format!("ITEM-{i}"), verdict(acc_a, &mut rng));
        table_b.insert(format!("ITEM-{i}"), verdict(acc_b, &mut rng));
    }
    let panel = JudgePanel::new(vec![
        Judge::new("a", Arc::new(TableJudge(table_a))),
        Judge::new("b", Arc::new(TableJudge(table_b))),
    ]);
    let syntax = SyntaxReport::from_diagnostics(vec![], SyntaxStage::Batch);
    let statement =
        FormalStatement::new("import Mathlib\nimport Aesop\n\ntheorem t : True := by sorry").unwrap();
    let (mut a, mut b, mut both) = Default::default();
    for (i, &label) in truth.iter().enumerate() {
        let query = MathQuery::new(format!("q{i}"), format!("Problem ITEM-{i}."), "fpr").unwrap();
        let report = panel.check(&query, &statement, &syntax).unwrap();
        let consistent = |j: usize| report.per_judge[j].ruling == autoformal::consistency::Ruling::Consistent;
        tally(&mut a, label, consistent(0));
        tally(&mut b, label, consistent(1));
        tally(&mut both, label, report.pass);
    }
    let fpr = |c: ConfusionCounts| confusion_metrics(c).fpr.expect("set has negatives");
    (fpr(a), fpr(b), fpr(both))
}
