use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use autoformal::eval::{
    aggregate_rates, decontaminate, dedup_queries, outcomes_from_trajectories, tool_usage_stats,
    RateRow, SampleOutcome, ToolUsageStats,
};
use autoformal::types::{MathQuery, Trajectory};
use clap::Args;

use super::{Ctx, Tally};
use crate::backend_spec::BackendSpec;
use crate::config::Settings;
use crate::UsageError;

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn dedup(ctx: &mut Ctx, args: &DedupArgs) -> anyhow::Result<Tally> {
    let qs: Vec<MathQuery> = ctx.read_jsonl(&args.queries)?;
    let kept = dedup_queries(&qs);
    tracing::info!(input = qs.len(), kept = kept.len(), "deduplicated");
    ctx.write_jsonl(&args.out, &kept)?;
    Ok(Tally::new(qs.len(), 0))
}

#[derive(Debug, Args)]
pub struct DecontaminateArgs {
    /// Training queries.
    #[arg(long)]
    pub train: PathBuf,
    /// Benchmark queries.
    #[arg(long)]
    pub bench: PathBuf,
    /// Training items above this cosine similarity are removed.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Embedding backend: simulated[:dim] or an embeddings URL.
    #[arg(long)]
    pub embedder: Option<String>,
    /// Kept training queries.
    #[arg(long)]
    pub out: PathBuf,
    /// Removed items with their nearest benchmark id.
    #[arg(long)]
    pub removed_out: Option<PathBuf>,
}

impl DecontaminateArgs {
    pub fn apply(&self, s: &mut Settings) {
        if let Some(t) = self.threshold {
            s.run.decontamination_threshold = t;
        }
        if let Some(e) = &self.embedder {
            s.backends.embedder = BackendSpec::Named(e.clone());
        }
    }
}

pub fn decontaminate_cmd(ctx: &mut Ctx, args: &DecontaminateArgs) -> anyhow::Result<Tally> {
    let train: Vec<MathQuery> = ctx.read_jsonl(&args.train)?;
    let bench: Vec<MathQuery> = ctx.read_jsonl(&args.bench)?;
    let provider = ctx.settings.backends.embedder.embedder(ctx.settings.backends.embed_batch_size)?;
    let result = decontaminate(&train, &bench, provider.as_ref(), ctx.settings.run.decontamination_threshold)?;
    tracing::info!(kept = result.kept.len(), removed = result.removed.len(), "decontaminated");
    ctx.write_jsonl(&args.out, &result.kept)?;
    if let Some(path) = &args.removed_out {
        ctx.write_jsonl(path, &result.removed)?;
    }
    Ok(Tally::new(train.len(), 0))
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Sample outcomes, one JSON object per line.
    #[arg(long, conflicts_with = "trajectories", required_unless_present = "trajectories")]
    pub outcomes: Option<PathBuf>,
    /// Trajectories, reduced to one outcome each.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// Benchmark name for outcomes derived from trajectories.
    #[arg(long, default_value = "default")]
    pub benchmark: String,
    /// Comma-separated k values.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub k: Vec<usize>,
    /// Rate table as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rate table as aligned text.
    #[arg(long)]
    pub text_out: Option<PathBuf>,
}

pub fn render_rates(rows: &[RateRow]) -> String {
    let width = rows.iter().map(|r| r.benchmark.len()).max().unwrap_or(0).max("benchmark".len());
    let mut s = format!("{:<width$}  {:>4}  {:>8}  {:>8}  {:>7}  {:>7}\n", "benchmark", "k", "SC", "CC", "queries", "samples");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>4}  {:>7.2}%  {:>7.2}%  {:>7}  {:>7}",
            r.benchmark,
            r.k,
            100.0 * r.sc,
            100.0 * r.cc,
            r.queries,
            r.samples_per_query
        );
    }
    s
}

pub fn eval(ctx: &mut Ctx, args: &EvalArgs) -> anyhow::Result<Tally> {
    let outcomes: Vec<SampleOutcome> = match (&args.outcomes, &args.trajectories) {
        (Some(path), _) => ctx.read_jsonl(path)?,
        (None, Some(path)) => {
            let ts: Vec<Trajectory> = ctx.read_jsonl(path)?;
            outcomes_from_trajectories(&ts, &args.benchmark)
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let rows = aggregate_rates(&outcomes, &args.k).map_err(|e| UsageError(e.to_string()))?;
    let text = render_rates(&rows);
    print!("{text}");
    if let Some(path) = &args.out {
        ctx.write_json(path, &rows)?;
    }
    if let Some(path) = &args.text_out {
        ctx.rec.output(path, text.as_bytes())?;
    }
    Ok(Tally::new(outcomes.len(), 0))
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn render_stats(s: &ToolUsageStats) -> String {
    let pct = |r: Option<f64>| r.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
    let mut out = String::new();
    let _ = writeln!(out, "trajectories             {}", s.trajectories);
    let _ = writeln!(out, "avg tool calls           {:.3}", s.avg_tool_calls);
    let _ = writeln!(out, "syntax calls             {}", s.syntax_calls);
    let _ = writeln!(out, "consistency calls        {}", s.consistency_calls);
    let _ = writeln!(out, "syntax success           {}", pct(s.syntax_success_rate));
    let _ = writeln!(out, "consistency success      {}", pct(s.consistency_success_rate));
    for (attempt, rate) in &s.consistency_success_by_attempt {
        let _ = writeln!(out, "  at revision {attempt:<10} {}", pct(Some(*rate)));
    }
    out
}

pub fn stats(ctx: &mut Ctx, args: &StatsArgs) -> anyhow::Result<Tally> {
    let ts: Vec<Trajectory> = ctx.read_jsonl(&args.trajectories)?;
    let s = tool_usage_stats(&ts);
    print!("{}", render_stats(&s));
    if let Some(path) = &args.out {
        ctx.write_json(path, &s)?;
    }
    let by_status: BTreeMap<String, usize> = ts.iter().fold(BTreeMap::new(), |mut m, t| {
        *m.entry(format!("{:?}", t.status)).or_default() += 1;
        m
    });
    tracing::info!(?by_status, "trajectory statuses");
    Ok(Tally::new(ts.len(), 0))
}
