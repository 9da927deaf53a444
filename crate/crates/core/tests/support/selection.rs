//! Synthetic trajectory pools and independent checks of the selection
//! and masking stages.

use std::collections::{BTreeMap, BTreeSet};

use autoformal::fixtures::{success_trajectory, Failure};
use autoformal::pipeline::{
    annotate_loss_masks, filter_expert_iteration, group_by_query, mine_dpo_pairs, MaskMode,
    DEFAULT_DPO_MIN_GAP, DEFAULT_EI_MAX_REVISIONS,
};
use autoformal::types::{Trajectory, TrajectoryStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` trajectories over `n / 8` queries with 0..=11 revisions each; about
/// one in six is marked as a failed run.
pub fn pool(seed: u64, n: usize) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let queries = (n / 8).max(1);
    (0..n)
        .map(|i| {
            let revisions = rng.gen_range(0..=11);
            let failures: Vec<Failure> = (0..revisions)
                .map(|_| if rng.gen_bool(0.5) { Failure::Syntax } else { Failure::Consistency })
                .collect();
            let mut t = success_trajectory(&format!("q{}", i % queries), i / queries, &failures);
            if rng.gen_ratio(1, 6) {
                t.status = TrajectoryStatus::FailedBudget;
            }
            t
        })
        .collect()
}

fn covered(spans: &[autoformal::pipeline::MaskSpan]) -> BTreeSet<usize> {
    spans.iter().flat_map(|s| s.start..s.end).collect()
}

pub fn check_selection(ts: &[Trajectory]) -> Result<(), String> {
    let split = filter_expert_iteration(ts, DEFAULT_EI_MAX_REVISIONS);
    for t in ts {
        let want = t.is_success() && t.revision_count < DEFAULT_EI_MAX_REVISIONS;
        let got = split.kept.contains(t);
        if want != got {
            return Err(format!("{}#{} ({} revisions): kept={got}", t.query.id, t.sample_index, t.revision_count));
        }
    }
    let kept_ids: BTreeSet<&str> = split.kept.iter().map(|t| t.query.id.as_str()).collect();
    for id in &split.retry_pool {
        if kept_ids.contains(id.as_str()) {
            return Err(format!("{id} is both kept and queued for retry"));
        }
    }

    let groups = group_by_query(ts);
    let pairs = mine_dpo_pairs(&groups, DEFAULT_DPO_MIN_GAP);
    let mut expected = BTreeMap::new();
    for (id, group) in &groups {
        let revs: Vec<usize> = group.iter().filter(|t| t.is_success()).map(|t| t.revision_count).collect();
        if let (Some(lo), Some(hi)) = (revs.iter().min(), revs.iter().max()) {
            if hi - lo >= DEFAULT_DPO_MIN_GAP {
                expected.insert(id.clone(), (*lo, *hi));
            }
        }
    }
    let got: BTreeMap<String, (usize, usize)> = pairs
        .iter()
        .map(|p| (p.query_id.clone(), (p.chosen.revision_count, p.rejected.revision_count)))
        .collect();
    if got != expected {
        return Err(format!("pairs {got:?}, expected {expected:?}"));
    }
    if let Some(p) = pairs.iter().find(|p| p.attempt_gap < DEFAULT_DPO_MIN_GAP) {
        return Err(format!("{}: gap {} below threshold", p.query_id, p.attempt_gap));
    }

    for t in ts {
        let sft = annotate_loss_masks(t, MaskMode::Sft).map_err(|e| e.to_string())?;
        let dpo = annotate_loss_masks(t, MaskMode::Dpo).map_err(|e| e.to_string())?;
        if !covered(&sft).is_subset(&covered(&dpo)) {
            return Err(format!("{}#{}: dpo mask misses sft-masked chars", t.query.id, t.sample_index));
        }
    }
    Ok(())
}
