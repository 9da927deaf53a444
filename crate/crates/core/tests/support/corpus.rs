//! The labelled precheck corpus.

use autoformal::syntax::precheck::{precheck, PrecheckFailure};
use autoformal::types::FormalStatement;
use serde::Deserialize;

#[derive(Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub code: String,
    pub expected: Vec<PrecheckFailure>,
}

pub fn load_corpus() -> Vec<CorpusItem> {
    include_str!("../fixtures/precheck_corpus.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Ids whose precheck outcome differs from the label, with what was found.
pub fn corpus_mismatches() -> Vec<(String, Vec<PrecheckFailure>)> {
    load_corpus()
        .into_iter()
        .filter_map(|item| {
            let got = precheck(&FormalStatement::new(item.code).unwrap()).failures;
            (got != item.expected).then_some((item.id, got))
        })
        .collect()
}
