//! Trajectory selection for cold start, expert iteration and DPO.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::orchestrator::validate_trajectory;
use crate::types::{MathQuery, Trajectory};

pub const DEFAULT_UPSAMPLE_FACTOR: usize = 2;
pub const DEFAULT_EI_MAX_REVISIONS: usize = 8;
pub const DEFAULT_DPO_MIN_GAP: usize = 3;

fn usable(t: &Trajectory) -> bool {
    t.is_success() && validate_trajectory(t).is_compliant()
}

/// Repeats every trajectory with two or more revisions `factor` times,
/// keeping copies adjacent and input order stable.
pub fn upsample_cold_start(trajectories: &[Trajectory], factor: usize) -> Result<Vec<Trajectory>, PipelineError> {
    if factor == 0 {
        return Err(PipelineError::InvalidFactor);
    }
    Ok(trajectories
        .iter()
        .flat_map(|t| {
            let copies = if t.revision_count >= 2 { factor } else { 1 };
            std::iter::repeat_n(t, copies).cloned()
        })
        .collect())
}

/// Seeded uniform sample of `round(fraction * n)` queries, in input order.
pub fn sample_cold_start_queries(queries: &[MathQuery], fraction: f64, seed: u64) -> Vec<MathQuery> {
    let n = queries.len();
    let k = ((fraction.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| queries[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertIterationSplit {
    pub kept: Vec<Trajectory>,
    /// Queries without any kept trajectory, in first-appearance order.
    pub retry_pool: Vec<String>,
}

/// Keeps compliant successes with fewer than `max_revisions` revisions.
pub fn filter_expert_iteration(trajectories: &[Trajectory], max_revisions: usize) -> ExpertIterationSplit {
    let kept: Vec<Trajectory> = trajectories
        .iter()
        .filter(|t| usable(t) && t.revision_count < max_revisions)
        .cloned()
        .collect();
    let kept_ids: BTreeSet<&str> = kept.iter().map(|t| t.query.id.as_str()).collect();
    let mut seen = BTreeSet::new();
    let retry_pool = trajectories
        .iter()
        .map(|t| t.query.id.as_str())
        .filter(|id| !kept_ids.contains(id) && seen.insert(*id))
        .map(str::to_string)
        .collect();
    ExpertIterationSplit { kept, retry_pool }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoPair {
    pub query_id: String,
    pub chosen: Trajectory,
    pub rejected: Trajectory,
    pub attempt_gap: usize,
}

pub fn group_by_query(trajectories: &[Trajectory]) -> BTreeMap<String, Vec<Trajectory>> {
    let mut groups: BTreeMap<String, Vec<Trajectory>> = BTreeMap::new();
    for t in trajectories {
        groups.entry(t.query.id.clone()).or_default().push(t.clone());
    }
    groups
}

/// One pair per query: the fewest-revision success against the
/// most-revision success, when their gap is at least `min_gap`.
pub fn mine_dpo_pairs(groups: &BTreeMap<String, Vec<Trajectory>>, min_gap: usize) -> Vec<DpoPair> {
    let mut pairs = Vec::new();
    for (query_id, group) in groups {
        let pool: Vec<&Trajectory> = group.iter().filter(|t| usable(t)).collect();
        let (Some(chosen), Some(rejected)) = (
            pool.iter().min_by_key(|t| (t.revision_count, t.sample_index)),
            pool.iter().max_by_key(|t| (t.revision_count, std::cmp::Reverse(t.sample_index))),
        ) else {
            continue;
        };
        let gap = rejected.revision_count - chosen.revision_count;
        if gap >= min_gap.max(1) {
            pairs.push(DpoPair {
                query_id: query_id.clone(),
                chosen: (*chosen).clone(),
                rejected: (*rejected).clone(),
                attempt_gap: gap,
            });
        }
    }
    pairs
}
