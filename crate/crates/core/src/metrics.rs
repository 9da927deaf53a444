//! Run-wide counters surfaced in manifests.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Default)]
pub struct RunCounters {
    pub compiler_calls: AtomicU64,
    pub groups_compiled: AtomicU64,
    pub fallbacks: AtomicU64,
    pub precheck_rejections: AtomicU64,
    pub judge_calls: AtomicU64,
    pub rule_violations: AtomicU64,
}

impl RunCounters {
    pub fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> BTreeMap<String, u64> {
        let read = |c: &AtomicU64| c.load(Ordering::Relaxed);
        BTreeMap::from([
            ("compiler_calls".to_string(), read(&self.compiler_calls)),
            ("groups_compiled".to_string(), read(&self.groups_compiled)),
            ("fallbacks".to_string(), read(&self.fallbacks)),
            ("precheck_rejections".to_string(), read(&self.precheck_rejections)),
            ("judge_calls".to_string(), read(&self.judge_calls)),
            ("rule_violations".to_string(), read(&self.rule_violations)),
        ])
    }
}
