//! `autoformal`: formalization runs, statement checks, training-data
//! selection and evaluation from the command line.
//!
//! Exit codes: 0 on success, 1 when items failed in strict mode or the run
//! hit a runtime error, 2 on usage or configuration errors.

mod backend_spec;
mod commands;
mod config;
mod io;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use commands::{checks, evaluate, formalize, pipeline, Ctx, Tally};
use config::Settings;

/// Bad flags, configuration or unreadable inputs.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "autoformal", version, about = "Autoformalization with compiler and judge feedback")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Base seed for sampling and simulated backends.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Manifest path (default: `<out>.manifest.json`).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Exit 1 when any item fails.
    #[arg(long, global = true, conflicts_with = "no_strict")]
    strict: bool,
    /// Exit 0 even when items fail.
    #[arg(long, global = true)]
    no_strict: bool,
    /// Log filter, e.g. `info` or `autoformal=debug`.
    #[arg(long, global = true)]
    log_level: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the revision loop over a query file.
    Formalize(formalize::FormalizeArgs),
    /// Static checks only: imports, terminal `by sorry`, brackets.
    Precheck(checks::StatementArgs),
    /// Batched compiler check of a statement file.
    SyntaxCheck(checks::StatementArgs),
    /// Judge-panel check of (query, statement) pairs.
    ConsistencyCheck(checks::ConsistencyArgs),
    /// Check trajectories against the tool-use rules.
    Validate(checks::ValidateArgs),
    /// Repeat multi-revision trajectories for cold-start training.
    Upsample(pipeline::UpsampleArgs),
    /// Keep low-revision successes; list queries to resample.
    FilterEi(pipeline::FilterEiArgs),
    /// Pair fewest- and most-revision successes per query.
    MineDpo(pipeline::MineDpoArgs),
    /// Emit loss-masked training records.
    Mask(pipeline::MaskArgs),
    /// Drop queries whose whitespace-normalized text repeats.
    Dedup(evaluate::DedupArgs),
    /// Remove training queries too close to a benchmark.
    Decontaminate(evaluate::DecontaminateArgs),
    /// Syntax and consistency pass@k tables.
    Eval(evaluate::EvalArgs),
    /// Tool-usage statistics over trajectories.
    Stats(evaluate::StatsArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Formalize(_) => "formalize",
            Command::Precheck(_) => "precheck",
            Command::SyntaxCheck(_) => "syntax-check",
            Command::ConsistencyCheck(_) => "consistency-check",
            Command::Validate(_) => "validate",
            Command::Upsample(_) => "upsample",
            Command::FilterEi(_) => "filter-ei",
            Command::MineDpo(_) => "mine-dpo",
            Command::Mask(_) => "mask",
            Command::Dedup(_) => "dedup",
            Command::Decontaminate(_) => "decontaminate",
            Command::Eval(_) => "eval",
            Command::Stats(_) => "stats",
        }
    }

    /// Partial batches are still useful from formalize, so it is lenient.
    fn strict_by_default(&self) -> bool {
        !matches!(self, Command::Formalize(_))
    }

    fn primary_output(&self) -> Option<&Path> {
        match self {
            Command::Formalize(a) => Some(&a.out),
            Command::Precheck(a) | Command::SyntaxCheck(a) => Some(&a.out),
            Command::ConsistencyCheck(a) => Some(&a.out),
            Command::Validate(a) => a.out.as_deref(),
            Command::Upsample(a) => Some(&a.out),
            Command::FilterEi(a) => Some(&a.out),
            Command::MineDpo(a) => Some(&a.out),
            Command::Mask(a) => Some(&a.out),
            Command::Dedup(a) => Some(&a.out),
            Command::Decontaminate(a) => Some(&a.out),
            Command::Eval(a) => a.out.as_deref().or(a.text_out.as_deref()),
            Command::Stats(a) => a.out.as_deref(),
        }
    }

    fn apply(&self, s: &mut Settings) {
        match self {
            Command::Formalize(a) => a.apply(s),
            Command::SyntaxCheck(a) => a.apply(s),
            Command::ConsistencyCheck(a) => a.apply(s),
            Command::Decontaminate(a) => a.apply(s),
            _ => {}
        }
    }

    fn run(&self, ctx: &mut Ctx) -> anyhow::Result<Tally> {
        match self {
            Command::Formalize(a) => formalize::run(ctx, a),
            Command::Precheck(a) => checks::precheck_cmd(ctx, a),
            Command::SyntaxCheck(a) => checks::syntax_check(ctx, a),
            Command::ConsistencyCheck(a) => checks::consistency_check(ctx, a),
            Command::Validate(a) => checks::validate(ctx, a),
            Command::Upsample(a) => pipeline::upsample(ctx, a),
            Command::FilterEi(a) => pipeline::filter_ei(ctx, a),
            Command::MineDpo(a) => pipeline::mine_dpo(ctx, a),
            Command::Mask(a) => pipeline::mask(ctx, a),
            Command::Dedup(a) => evaluate::dedup(ctx, a),
            Command::Decontaminate(a) => evaluate::decontaminate_cmd(ctx, a),
            Command::Eval(a) => evaluate::eval(ctx, a),
            Command::Stats(a) => evaluate::stats(ctx, a),
        }
    }
}

fn settings_for(cli: &Cli) -> Result<Settings, UsageError> {
    let g = &cli.global;
    let mut s = Settings::load(g.config.as_deref())?;
    if let Some(w) = g.workers {
        s.workers = Some(w);
    }
    if let Some(seed) = g.seed {
        s.seed = seed;
    }
    if g.strict {
        s.strict = Some(true);
    }
    if g.no_strict {
        s.strict = Some(false);
    }
    if let Some(level) = &g.log_level {
        s.log_level = level.clone();
    }
    cli.command.apply(&mut s);
    s.validate()?;
    s.workers = Some(s.worker_count());
    Ok(s)
}

fn init_logging(level: &str) -> Result<(), UsageError> {
    let filter = EnvFilter::try_new(level).map_err(|e| UsageError(format!("log level `{level}`: {e}")))?;
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_current_span(false)
        .init();
    Ok(())
}

fn manifest_path(cli: &Cli) -> PathBuf {
    cli.global.manifest.clone().unwrap_or_else(|| match cli.command.primary_output() {
        Some(out) => {
            let mut name = out.as_os_str().to_owned();
            name.push(".manifest.json");
            PathBuf::from(name)
        }
        None => PathBuf::from("autoformal-manifest.json"),
    })
}

fn execute(cli: &Cli) -> anyhow::Result<i32> {
    let settings = settings_for(cli)?;
    init_logging(&settings.log_level)?;
    let strict = settings.strict.unwrap_or_else(|| cli.command.strict_by_default());
    let snapshot = serde_json::to_value(&settings)?;
    let mut ctx = Ctx::new(settings);
    let tally = cli.command.run(&mut ctx)?;
    let code = i32::from(strict && tally.failures > 0);
    if tally.failures > 0 {
        tracing::warn!(failures = tally.failures, items = tally.items, strict, "items failed");
    }
    let counters = ctx.counters.snapshot();
    let manifest = ctx.rec.finish(cli.command.name(), snapshot, counters, tally.items, tally.failures, code);
    manifest.write(&manifest_path(cli))?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
