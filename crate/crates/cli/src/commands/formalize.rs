use std::path::PathBuf;
use std::sync::Arc;

use autoformal::orchestrator::{CheckTools, Formalizer};
use autoformal::types::{MathQuery, Trajectory};
use clap::Args;

use super::{Ctx, Tally};
use crate::backend_spec::{parse_list, BackendSpec};
use crate::config::Settings;
use crate::UsageError;

#[derive(Debug, Args)]
pub struct FormalizeArgs {
    /// Queries, one JSON object per line: {"id", "text", "source"}.
    #[arg(long)]
    pub queries: PathBuf,
    /// Samples per query.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Exclusive revision bound: a run may revise at most K-1 times.
    #[arg(long, value_name = "K")]
    pub max_revisions: Option<usize>,
    /// Formalizer backend: simulated[:seed] or a chat-completions URL.
    #[arg(long)]
    pub model: Option<String>,
    /// Compiler backend: simulated or a verification-server URL.
    #[arg(long)]
    pub lean: Option<String>,
    /// Comma-separated judge backends: simulated[:accept_bp] or URLs.
    #[arg(long)]
    pub judges: Option<String>,
    /// Trajectory output file.
    #[arg(long)]
    pub out: PathBuf,
}

impl FormalizeArgs {
    pub fn apply(&self, s: &mut Settings) {
        if let Some(n) = self.samples {
            s.run.samples_per_query = n;
        }
        if let Some(t) = self.temperature {
            s.run.temperature = t;
        }
        if let Some(k) = self.max_revisions {
            s.run.max_revisions = k;
        }
        if let Some(m) = &self.model {
            s.backends.model = BackendSpec::Named(m.clone());
        }
        if let Some(l) = &self.lean {
            s.backends.lean = BackendSpec::Named(l.clone());
        }
        if let Some(j) = &self.judges {
            s.backends.judges = parse_list(j);
        }
    }
}

pub fn run(ctx: &mut Ctx, args: &FormalizeArgs) -> anyhow::Result<Tally> {
    let queries: Vec<MathQuery> = ctx.read_jsonl(&args.queries)?;
    for q in &queries {
        q.check().map_err(|e| UsageError(format!("{}: {e}", args.queries.display())))?;
    }
    let tools = CheckTools {
        syntax: ctx.syntax_checker()?,
        panel: ctx.judge_panel()?,
    };
    let model = ctx.settings.backends.model.chat_model(ctx.settings.seed)?;
    let formalizer = Formalizer::new(model, Arc::new(tools), ctx.settings.run.clone())
        .with_seed(ctx.settings.seed)
        .with_workers(ctx.workers())
        .with_counters(ctx.counters.clone());
    let trajectories: Vec<Trajectory> = formalizer.run_many(&queries);
    let failed = trajectories.iter().filter(|t| !t.is_success()).count();
    tracing::info!(
        queries = queries.len(),
        trajectories = trajectories.len(),
        succeeded = trajectories.len() - failed,
        "formalization finished"
    );
    ctx.write_jsonl(&args.out, &trajectories)?;
    Ok(Tally::new(trajectories.len(), failed))
}
