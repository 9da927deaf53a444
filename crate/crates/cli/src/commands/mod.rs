//! Subcommand implementations. Each reads its inputs through [`Ctx`] so
//! digests land in the manifest, and reports how many items failed.

pub mod checks;
pub mod evaluate;
pub mod formalize;
pub mod pipeline;

use std::path::Path;
use std::sync::Arc;

use autoformal::consistency::{Judge, JudgePanel};
use autoformal::metrics::RunCounters;
use autoformal::syntax::SyntaxChecker;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::Settings;
use crate::io::{parse_jsonl, read_input, to_jsonl, to_pretty_json};
use crate::manifest::Recorder;

pub struct Ctx {
    pub settings: Settings,
    pub rec: Recorder,
    pub counters: Arc<RunCounters>,
}

/// Item totals for the manifest and exit code.
#[derive(Debug, Default, Clone, Copy)]
pub struct Tally {
    pub items: usize,
    pub failures: usize,
}

impl Tally {
    pub fn new(items: usize, failures: usize) -> Self {
        Self { items, failures }
    }
}

impl Ctx {
    pub fn new(settings: Settings) -> Self {
        Self {
            settings,
            rec: Recorder::default(),
            counters: Arc::new(RunCounters::default()),
        }
    }

    pub fn read_jsonl<T: DeserializeOwned>(&mut self, path: &Path) -> anyhow::Result<Vec<T>> {
        let bytes = read_input(path)?;
        self.rec.input(path, &bytes);
        parse_jsonl(path, &bytes)
    }

    pub fn write_jsonl<T: Serialize>(&mut self, path: &Path, items: &[T]) -> anyhow::Result<()> {
        self.rec.output(path, &to_jsonl(items)?)
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> anyhow::Result<()> {
        self.rec.output(path, &to_pretty_json(value)?)
    }

    pub fn workers(&self) -> usize {
        self.settings.worker_count()
    }

    pub fn syntax_checker(&self) -> anyhow::Result<SyntaxChecker> {
        let lean = self.settings.backends.lean.lean()?;
        Ok(SyntaxChecker::new(lean, &self.settings.run)
            .with_nonce(format!("{:08x}", self.settings.seed as u32))
            .with_workers(self.workers())
            .with_counters(self.counters.clone()))
    }

    pub fn judge_panel(&self) -> anyhow::Result<JudgePanel> {
        let judges = self
            .settings
            .judge_ids()
            .into_iter()
            .zip(&self.settings.backends.judges)
            .map(|(id, spec)| Ok(Judge::new(id.clone(), spec.judge(&id)?)))
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(JudgePanel::new(judges).with_counters(self.counters.clone()))
    }
}
