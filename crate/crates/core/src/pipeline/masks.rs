//! Loss masks as char spans over the canonical trajectory text.

use serde::{Deserialize, Serialize};

use super::select::DpoPair;
use super::PipelineError;
use crate::orchestrator::{serialize_with_offsets, tool_call_span};
use crate::types::{StepKind, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    ToolResult,
    ToolInvocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MaskSpan {
    pub start: usize,
    pub end: usize,
    pub kind: MaskKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    Sft,
    Dpo,
}

fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Tool results are masked in both modes; in DPO mode the tool-call block
/// of every invoking turn is masked too.
pub fn annotate_loss_masks(t: &Trajectory, mode: MaskMode) -> Result<Vec<MaskSpan>, PipelineError> {
    let (_, ranges) = serialize_with_offsets(t);
    let mut spans = Vec::new();
    for (i, (step, &(start, end))) in t.steps.iter().zip(&ranges).enumerate() {
        let mismatch = |reason: &str| PipelineError::SerializationMismatch {
            step: i,
            reason: reason.to_string(),
        };
        match step.kind {
            StepKind::ToolResult => {
                let text = step.text.trim_end();
                if !step.text.starts_with("<tool_result>") || !text.ends_with("</tool_result>") {
                    return Err(mismatch("tool result is not wrapped in <tool_result> tags"));
                }
                if start == end {
                    return Err(mismatch("empty tool result"));
                }
                spans.push(MaskSpan {
                    start,
                    end: start + text.chars().count(),
                    kind: MaskKind::ToolResult,
                });
            }
            StepKind::ModelTurn if mode == MaskMode::Dpo && step.invocation.is_some() => {
                let (b0, b1) = tool_call_span(&step.text)
                    .map_err(|e| mismatch(&e.to_string()))?
                    .ok_or_else(|| mismatch("invoking turn has no tool-call block"))?;
                spans.push(MaskSpan {
                    start: start + char_offset(&step.text, b0),
                    end: start + char_offset(&step.text, b1),
                    kind: MaskKind::ToolInvocation,
                });
            }
            StepKind::ModelTurn => {}
        }
    }
    Ok(spans)
}

/// `text` with every span removed.
pub fn excise(text: &str, spans: &[MaskSpan]) -> String {
    let mut sorted = spans.to_vec();
    sorted.sort();
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::new();
    let mut pos = 0;
    for s in sorted {
        if s.start > pos {
            out.extend(&chars[pos..s.start]);
        }
        pos = pos.max(s.end);
    }
    out.extend(&chars[pos.min(chars.len())..]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordRole {
    Sft,
    Chosen,
    Rejected,
}

/// One line of a masked training file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedRecord {
    pub query_id: String,
    pub role: RecordRole,
    pub serialized_text: String,
    pub mask_spans: Vec<MaskSpan>,
    pub revisions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt_gap: Option<usize>,
}

pub fn masked_record(t: &Trajectory, role: RecordRole, mode: MaskMode) -> Result<MaskedRecord, PipelineError> {
    Ok(MaskedRecord {
        query_id: t.query.id.clone(),
        role,
        serialized_text: serialize_with_offsets(t).0,
        mask_spans: annotate_loss_masks(t, mode)?,
        revisions: t.revision_count,
        attempt_gap: None,
    })
}

/// Chosen and rejected records for a pair, both masked in DPO mode.
pub fn dpo_records(pair: &DpoPair) -> Result<[MaskedRecord; 2], PipelineError> {
    let mut chosen = masked_record(&pair.chosen, RecordRole::Chosen, MaskMode::Dpo)?;
    let mut rejected = masked_record(&pair.rejected, RecordRole::Rejected, MaskMode::Dpo)?;
    chosen.attempt_gap = Some(pair.attempt_gap);
    rejected.attempt_gap = Some(pair.attempt_gap);
    Ok([chosen, rejected])
}
