//! Training-data operations over trajectories: cold-start upsampling,
//! expert-iteration filtering, loss masks, DPO pairs, and benchmark
//! perturbation selection.

mod masks;
mod perturb;
mod select;
mod similarity;

pub use masks::{
    annotate_loss_masks, dpo_records, excise, masked_record, MaskKind, MaskMode, MaskSpan,
    MaskedRecord, RecordRole,
};
pub use perturb::{
    filter_perturbations, parse_perturbation_response, render_perturbation_prompt,
    PerturbationCandidate, SimilarityBand,
};
pub use select::{
    filter_expert_iteration, group_by_query, mine_dpo_pairs, sample_cold_start_queries,
    upsample_cold_start, DpoPair, ExpertIterationSplit, DEFAULT_DPO_MIN_GAP,
    DEFAULT_EI_MAX_REVISIONS, DEFAULT_UPSAMPLE_FACTOR,
};
pub use similarity::{levenshtein, normalized_levenshtein};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error("only {found} of {wanted} perturbations survived filtering")]
    InsufficientCandidates { wanted: usize, found: usize },
    #[error("{candidates} candidates but {reports} syntax reports")]
    MisalignedReports { candidates: usize, reports: usize },
    #[error("upsampling factor must be positive")]
    InvalidFactor,
    #[error("step {step}: {reason}")]
    SerializationMismatch { step: usize, reason: String },
    #[error("unexpected response format: {0}")]
    ResponseFormat(String),
}
