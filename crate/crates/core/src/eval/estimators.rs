use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, SampleOutcome};

/// Preference-loss temperature used for the shipped training recipe.
pub const DPO_BETA: f64 = 0.1;
/// Weight of the NLL term added to the preference loss.
pub const NLL_ALPHA: f64 = 0.3;

/// Unbiased pass@k: probability that a size-`k` subset of `n` samples, `c`
/// of which pass, contains at least one pass.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64, EvalError> {
    if c > n || k == 0 || k > n {
        return Err(EvalError::DomainError(format!(
            "need 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}"
        )));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let all_fail: f64 = (0..k).map(|i| (n - c - i) as f64 / (n - i) as f64).product();
    Ok(1.0 - all_fail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub benchmark: String,
    pub k: usize,
    /// Mean syntax pass@k.
    pub sc: f64,
    /// Mean consistency pass@k.
    pub cc: f64,
    pub queries: usize,
    pub samples_per_query: usize,
}

/// Per benchmark and per `k`, the query-averaged syntax and consistency
/// pass@k. Rows are ordered by benchmark name, then by `k_values` order.
pub fn aggregate_rates(outcomes: &[SampleOutcome], k_values: &[usize]) -> Result<Vec<RateRow>, EvalError> {
    let mut per_bench: BTreeMap<&str, BTreeMap<&str, (usize, usize, usize)>> = BTreeMap::new();
    for o in outcomes {
        o.check()?;
        let entry = per_bench
            .entry(o.benchmark.as_str())
            .or_default()
            .entry(o.query_id.as_str())
            .or_default();
        entry.0 += 1;
        entry.1 += usize::from(o.syntax_pass);
        entry.2 += usize::from(o.consistency_pass);
    }
    let mut rows = Vec::new();
    for (bench, queries) in per_bench {
        let n = queries.values().next().map_or(0, |q| q.0);
        if let Some((id, q)) = queries.iter().find(|(_, q)| q.0 != n) {
            return Err(EvalError::RaggedSamples {
                benchmark: bench.to_string(),
                query_id: id.to_string(),
                expected: n,
                found: q.0,
            });
        }
        for &k in k_values {
            let mut sc = 0.0;
            let mut cc = 0.0;
            for &(_, cs, cc_count) in queries.values() {
                sc += pass_at_k(n, cs, k)?;
                cc += pass_at_k(n, cc_count, k)?;
            }
            let m = queries.len() as f64;
            rows.push(RateRow {
                benchmark: bench.to_string(),
                k,
                sc: sc / m,
                cc: cc / m,
                queries: queries.len(),
                samples_per_query: n,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Each metric is `None` when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fnr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
}

impl ConfusionMetrics {
    pub fn get(&self, name: &str) -> Result<f64, EvalError> {
        let value = match name {
            "precision" => self.precision,
            "recall" => self.recall,
            "fnr" => self.fnr,
            "tnr" => self.tnr,
            "fpr" => self.fpr,
            _ => None,
        };
        value.ok_or_else(|| EvalError::UndefinedMetric(name.to_string()))
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion_metrics(c: ConfusionCounts) -> ConfusionMetrics {
    let recall = ratio(c.tp, c.tp + c.fn_);
    let tnr = ratio(c.tn, c.tn + c.fp);
    ConfusionMetrics {
        precision: ratio(c.tp, c.tp + c.fp),
        recall,
        fnr: ratio(c.fn_, c.tp + c.fn_),
        tnr,
        fpr: ratio(c.fp, c.tn + c.fp),
    }
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::DegenerateInput(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(EvalError::DegenerateInput("fewer than two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `-ln σ(β·(chosen − rejected)) − α·chosen_policy_logp`.
///
/// # Panics
/// When `beta <= 0` or `alpha < 0`.
pub fn dpo_nll_loss(
    chosen_logratio: f64,
    rejected_logratio: f64,
    chosen_policy_logp: f64,
    beta: f64,
    alpha: f64,
) -> f64 {
    assert!(beta > 0.0, "beta must be positive");
    assert!(alpha >= 0.0, "alpha must be non-negative");
    softplus(-beta * (chosen_logratio - rejected_logratio)) - alpha * chosen_policy_logp
}
