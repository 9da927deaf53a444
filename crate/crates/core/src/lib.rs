//! Tool-feedback autoformalization.
//!
//! A model drafts a Lean 4 statement for a natural-language problem, checks
//! it with a batched compiler tool and a judge-panel consistency tool, and
//! revises until both pass or the budget runs out. Around that loop sit the
//! training-data operations and the evaluation estimators.

pub mod backends;
pub mod consistency;
pub mod eval;
#[doc(hidden)]
pub mod fixtures;
pub mod metrics;
pub mod orchestrator;
pub mod par;
pub mod pipeline;
pub mod prompts;
pub mod syntax;
pub mod types;
