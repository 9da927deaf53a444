//! Selection of near-miss negatives for the consistency benchmark.

use serde::{Deserialize, Serialize};

use super::similarity::normalized_levenshtein;
use super::PipelineError;
use crate::consistency::json_objects;
use crate::prompts;
use crate::syntax::SyntaxReport;
use crate::types::FormalStatement;

/// Which similarities to the positive statement are acceptable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SimilarityBand {
    /// Keep `low <= s < high`.
    Window { low: f64, high: f64 },
    /// Keep `s <= threshold`.
    RejectAbove { threshold: f64 },
}

impl Default for SimilarityBand {
    fn default() -> Self {
        SimilarityBand::Window {
            low: 0.95,
            high: 1.0,
        }
    }
}

impl SimilarityBand {
    pub fn admits(&self, s: f64) -> bool {
        match *self {
            SimilarityBand::Window { low, high } => low <= s && s < high,
            SimilarityBand::RejectAbove { threshold } => s <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCandidate {
    pub positive: FormalStatement,
    pub candidate: FormalStatement,
    pub similarity: f64,
    pub syntax_valid: bool,
    /// Perturbations are built to change meaning, so this is false.
    pub label_consistent: bool,
}

pub fn render_perturbation_prompt(statement: &FormalStatement) -> String {
    prompts::render(prompts::PERTURBATION, &[("formal_statement", statement.code.as_str())])
}

/// `lean_code` fields of the last JSON object carrying `perturbations`.
pub fn parse_perturbation_response(raw: &str) -> Result<Vec<String>, PipelineError> {
    let obj = json_objects(raw)
        .into_iter()
        .rfind(|o| o.get("perturbations").is_some_and(|p| p.is_array()))
        .ok_or_else(|| PipelineError::ResponseFormat("no object with a perturbations array".into()))?;
    Ok(obj["perturbations"]
        .as_array()
        .expect("checked above")
        .iter()
        .filter_map(|p| p.get("lean_code").and_then(|c| c.as_str()))
        .map(str::to_string)
        .collect())
}

/// Keeps syntactically valid, mutually distinct candidates whose similarity
/// to `positive` lies in `band`, most similar first, at most `count`.
pub fn filter_perturbations(
    positive: &FormalStatement,
    candidates: &[FormalStatement],
    syntax_reports: &[SyntaxReport],
    band: SimilarityBand,
    count: usize,
) -> Result<Vec<PerturbationCandidate>, PipelineError> {
    if candidates.len() != syntax_reports.len() {
        return Err(PipelineError::MisalignedReports {
            candidates: candidates.len(),
            reports: syntax_reports.len(),
        });
    }
    let mut kept: Vec<PerturbationCandidate> = Vec::new();
    for (cand, report) in candidates.iter().zip(syntax_reports) {
        if !report.pass || positive.same_code(&cand.code) {
            continue;
        }
        if kept.iter().any(|k| k.candidate.same_code(&cand.code)) {
            continue;
        }
        let similarity = normalized_levenshtein(positive.code.trim(), cand.code.trim());
        if !band.admits(similarity) {
            continue;
        }
        kept.push(PerturbationCandidate {
            positive: positive.clone(),
            candidate: cand.clone(),
            similarity,
            syntax_valid: true,
            label_consistent: false,
        });
    }
    kept.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
    if kept.len() < count {
        return Err(PipelineError::InsufficientCandidates {
            wanted: count,
            found: kept.len(),
        });
    }
    kept.truncate(count);
    Ok(kept)
}
