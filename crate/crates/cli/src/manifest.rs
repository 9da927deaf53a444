//! Per-run manifest: identity, effective configuration, content digests
//! and counters. Written atomically once the command finishes.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::io::{sha256_hex, to_pretty_json, write_atomic};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub run_id: String,
    pub command: String,
    pub started_at_unix_ms: u128,
    pub finished_at_unix_ms: u128,
    pub wall_clock_s: f64,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub counters: BTreeMap<String, u64>,
    pub items: usize,
    pub item_failures: usize,
    pub exit_code: i32,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// Collects digests while a command runs.
pub struct Recorder {
    started: Instant,
    started_at: u128,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Default for Recorder {
    fn default() -> Self {
        Self {
            started: Instant::now(),
            started_at: now_ms(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }
}

impl Recorder {
    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn output(&mut self, path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
        write_atomic(path, bytes)?;
        self.outputs.insert(path.display().to_string(), sha256_hex(bytes));
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        self,
        command: &str,
        config: serde_json::Value,
        counters: BTreeMap<String, u64>,
        items: usize,
        item_failures: usize,
        exit_code: i32,
    ) -> Manifest {
        Manifest {
            run_id: uuid::Uuid::new_v4().to_string(),
            command: command.to_string(),
            started_at_unix_ms: self.started_at,
            finished_at_unix_ms: now_ms(),
            wall_clock_s: self.started.elapsed().as_secs_f64(),
            config,
            inputs: self.inputs,
            outputs: self.outputs,
            counters,
            items,
            item_failures,
            exit_code,
        }
    }
}

impl Manifest {
    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        write_atomic(path, &to_pretty_json(self)?)
    }
}
