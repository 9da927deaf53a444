use std::path::PathBuf;

use autoformal::pipeline::{
    dpo_records, filter_expert_iteration, group_by_query, masked_record, mine_dpo_pairs,
    upsample_cold_start, DpoPair, MaskMode, MaskedRecord, RecordRole, DEFAULT_DPO_MIN_GAP,
    DEFAULT_EI_MAX_REVISIONS, DEFAULT_UPSAMPLE_FACTOR,
};
use autoformal::types::Trajectory;
use clap::{Args, ValueEnum};

use super::{Ctx, Tally};
use crate::UsageError;

#[derive(Debug, Args)]
pub struct UpsampleArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Copies of each trajectory with two or more revisions.
    #[arg(long, default_value_t = DEFAULT_UPSAMPLE_FACTOR)]
    pub factor: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn upsample(ctx: &mut Ctx, args: &UpsampleArgs) -> anyhow::Result<Tally> {
    let ts: Vec<Trajectory> = ctx.read_jsonl(&args.trajectories)?;
    let out = upsample_cold_start(&ts, args.factor).map_err(|e| UsageError(e.to_string()))?;
    ctx.write_jsonl(&args.out, &out)?;
    Ok(Tally::new(ts.len(), 0))
}

#[derive(Debug, Args)]
pub struct FilterEiArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Keep successes with strictly fewer revisions than this.
    #[arg(long, default_value_t = DEFAULT_EI_MAX_REVISIONS)]
    pub max_revisions: usize,
    /// Kept trajectories.
    #[arg(long)]
    pub out: PathBuf,
    /// Query ids to resample, one JSON string per line.
    #[arg(long)]
    pub retry_out: Option<PathBuf>,
}

pub fn filter_ei(ctx: &mut Ctx, args: &FilterEiArgs) -> anyhow::Result<Tally> {
    let ts: Vec<Trajectory> = ctx.read_jsonl(&args.trajectories)?;
    let split = filter_expert_iteration(&ts, args.max_revisions);
    tracing::info!(input = ts.len(), kept = split.kept.len(), retry = split.retry_pool.len(), "expert-iteration filter");
    ctx.write_jsonl(&args.out, &split.kept)?;
    if let Some(path) = &args.retry_out {
        ctx.write_jsonl(path, &split.retry_pool)?;
    }
    Ok(Tally::new(ts.len(), 0))
}

#[derive(Debug, Args)]
pub struct MineDpoArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Minimum revision gap between rejected and chosen.
    #[arg(long, default_value_t = DEFAULT_DPO_MIN_GAP)]
    pub min_gap: usize,
    /// Preference pairs.
    #[arg(long)]
    pub out: PathBuf,
    /// Masked chosen/rejected records ready for training.
    #[arg(long)]
    pub records_out: Option<PathBuf>,
}

pub fn mine_dpo(ctx: &mut Ctx, args: &MineDpoArgs) -> anyhow::Result<Tally> {
    let ts: Vec<Trajectory> = ctx.read_jsonl(&args.trajectories)?;
    let pairs = mine_dpo_pairs(&group_by_query(&ts), args.min_gap);
    tracing::info!(input = ts.len(), pairs = pairs.len(), "preference pairs mined");
    ctx.write_jsonl(&args.out, &pairs)?;
    let mut failures = 0;
    if let Some(path) = &args.records_out {
        let records = pair_records(&pairs, &mut failures);
        ctx.write_jsonl(path, &records)?;
    }
    Ok(Tally::new(ts.len(), failures))
}

fn pair_records(pairs: &[DpoPair], failures: &mut usize) -> Vec<MaskedRecord> {
    let mut out = Vec::new();
    for pair in pairs {
        match dpo_records(pair) {
            Ok(rs) => out.extend(rs),
            Err(e) => {
                tracing::warn!(query_id = %pair.query_id, error = %e, "pair skipped");
                *failures += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Sft,
    Dpo,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Trajectories to mask one by one.
    #[arg(long, conflicts_with = "pairs", required_unless_present = "pairs")]
    pub trajectories: Option<PathBuf>,
    /// Preference pairs from mine-dpo; always masked in dpo mode.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Sft)]
    pub mode: Mode,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn mask(ctx: &mut Ctx, args: &MaskArgs) -> anyhow::Result<Tally> {
    let mut failures = 0;
    let (items, records) = if let Some(path) = &args.pairs {
        let pairs: Vec<DpoPair> = ctx.read_jsonl(path)?;
        (pairs.len(), pair_records(&pairs, &mut failures))
    } else {
        let path = args.trajectories.as_ref().expect("clap enforces one input");
        let ts: Vec<Trajectory> = ctx.read_jsonl(path)?;
        let mode = match args.mode {
            Mode::Sft => MaskMode::Sft,
            Mode::Dpo => MaskMode::Dpo,
        };
        let mut records = Vec::with_capacity(ts.len());
        for t in &ts {
            match masked_record(t, RecordRole::Sft, mode) {
                Ok(r) => records.push(r),
                Err(e) => {
                    tracing::warn!(query_id = %t.query.id, sample_index = t.sample_index, error = %e, "trajectory skipped");
                    failures += 1;
                }
            }
        }
        (ts.len(), records)
    };
    ctx.write_jsonl(&args.out, &records)?;
    Ok(Tally::new(items, failures))
}
