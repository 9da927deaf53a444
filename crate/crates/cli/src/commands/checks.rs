use std::path::PathBuf;

use autoformal::consistency::ConsistencyReport;
use autoformal::orchestrator::{validate_trajectory, Compliance};
use autoformal::par::parallel_map;
use autoformal::syntax::precheck::{precheck, PrecheckResult};
use autoformal::syntax::SyntaxReport;
use autoformal::types::{FormalStatement, MathQuery, Trajectory};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::{Ctx, Tally};
use crate::backend_spec::{parse_list, BackendSpec};
use crate::config::Settings;

/// One statement to check: `{"id", "code", "required_imports"?}`.
#[derive(Debug, Deserialize)]
pub struct StatementRecord {
    pub id: String,
    #[serde(flatten)]
    pub statement: FormalStatement,
}

#[derive(Debug, Args)]
pub struct StatementArgs {
    /// Statements, one JSON object per line: {"id", "code"}.
    #[arg(long)]
    pub statements: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Compiler backend: simulated or a verification-server URL.
    #[arg(long)]
    pub lean: Option<String>,
}

impl StatementArgs {
    pub fn apply(&self, s: &mut Settings) {
        if let Some(l) = &self.lean {
            s.backends.lean = BackendSpec::Named(l.clone());
        }
    }
}

#[derive(Serialize)]
struct PrecheckRecord<'a> {
    id: &'a str,
    #[serde(flatten)]
    result: PrecheckResult,
}

pub fn precheck_cmd(ctx: &mut Ctx, args: &StatementArgs) -> anyhow::Result<Tally> {
    let records: Vec<StatementRecord> = ctx.read_jsonl(&args.statements)?;
    let out: Vec<PrecheckRecord> = records
        .iter()
        .map(|r| PrecheckRecord { id: &r.id, result: precheck(&r.statement) })
        .collect();
    let failed = out.iter().filter(|r| !r.result.pass).count();
    ctx.write_jsonl(&args.out, &out)?;
    Ok(Tally::new(out.len(), failed))
}

#[derive(Serialize)]
struct SyntaxRecord<'a> {
    id: &'a str,
    report: SyntaxReport,
}

pub fn syntax_check(ctx: &mut Ctx, args: &StatementArgs) -> anyhow::Result<Tally> {
    let records: Vec<StatementRecord> = ctx.read_jsonl(&args.statements)?;
    let statements: Vec<FormalStatement> = records.iter().map(|r| r.statement.clone()).collect();
    let reports = ctx.syntax_checker()?.check(&statements);
    let out: Vec<SyntaxRecord> = records
        .iter()
        .zip(reports)
        .map(|(r, report)| SyntaxRecord { id: &r.id, report })
        .collect();
    let failed = out.iter().filter(|r| !r.report.pass).count();
    ctx.write_jsonl(&args.out, &out)?;
    Ok(Tally::new(out.len(), failed))
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    /// Pairs, one JSON object per line: {"query": {...}, "statement": {"code"}}.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Compiler backend used for the syntax gate.
    #[arg(long)]
    pub lean: Option<String>,
    /// Comma-separated judge backends: simulated[:accept_bp] or URLs.
    #[arg(long)]
    pub judges: Option<String>,
}

impl ConsistencyArgs {
    pub fn apply(&self, s: &mut Settings) {
        if let Some(l) = &self.lean {
            s.backends.lean = BackendSpec::Named(l.clone());
        }
        if let Some(j) = &self.judges {
            s.backends.judges = parse_list(j);
        }
    }
}

#[derive(Deserialize)]
struct PairRecord {
    query: MathQuery,
    statement: FormalStatement,
}

#[derive(Serialize)]
struct ConsistencyRecord<'a> {
    query_id: &'a str,
    syntax_pass: bool,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<ConsistencyReport>,
}

/// Syntax-gates every statement, then asks the panel about the survivors.
pub fn consistency_check(ctx: &mut Ctx, args: &ConsistencyArgs) -> anyhow::Result<Tally> {
    let pairs: Vec<PairRecord> = ctx.read_jsonl(&args.pairs)?;
    let statements: Vec<FormalStatement> = pairs.iter().map(|p| p.statement.clone()).collect();
    let syntax = ctx.syntax_checker()?.check(&statements);
    let panel = ctx.judge_panel()?;
    let jobs: Vec<(&PairRecord, &SyntaxReport)> = pairs.iter().zip(&syntax).collect();
    let reports = parallel_map(&jobs, ctx.workers(), |_, (p, s)| {
        s.pass.then(|| panel.check(&p.query, &p.statement, s)).transpose()
    });
    let mut out = Vec::with_capacity(pairs.len());
    for ((p, s), report) in jobs.iter().zip(reports) {
        let report = report?;
        out.push(ConsistencyRecord {
            query_id: &p.query.id,
            syntax_pass: s.pass,
            pass: report.as_ref().is_some_and(|r| r.pass),
            report,
        });
    }
    let failed = out.iter().filter(|r| !r.pass).count();
    ctx.write_jsonl(&args.out, &out)?;
    Ok(Tally::new(out.len(), failed))
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Optional per-trajectory report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ValidationRecord<'a> {
    query_id: &'a str,
    sample_index: usize,
    #[serde(flatten)]
    compliance: Compliance,
}

pub fn validate(ctx: &mut Ctx, args: &ValidateArgs) -> anyhow::Result<Tally> {
    let ts: Vec<Trajectory> = ctx.read_jsonl(&args.trajectories)?;
    let out: Vec<ValidationRecord> = ts
        .iter()
        .map(|t| ValidationRecord {
            query_id: &t.query.id,
            sample_index: t.sample_index,
            compliance: validate_trajectory(t),
        })
        .collect();
    for r in out.iter().filter(|r| !r.compliance.is_compliant()) {
        if let Compliance::Violation { reason } = &r.compliance {
            tracing::warn!(query_id = r.query_id, sample_index = r.sample_index, %reason, "non-compliant trajectory");
        }
    }
    let failed = out.iter().filter(|r| !r.compliance.is_compliant()).count();
    if let Some(path) = &args.out {
        ctx.write_jsonl(path, &out)?;
    }
    Ok(Tally::new(out.len(), failed))
}
