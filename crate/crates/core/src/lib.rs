//! Schema-driven slot-filling prompts for generative information extraction.
//!
//! The pipeline compiles one cloze-style prompt per information type
//! (entity type, event type, or candidate relation), hands the prompt texts
//! to a generation [`backend`], parses the generated slot answers back,
//! grounds them in the source text and scores the result.

pub mod backend;
pub mod codec;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod grounding;
pub mod pipeline;
pub mod prompt;
pub mod schema;
pub mod synth;

pub use codec::{aggregate, decide_relation, encode_target, parse_output, SamplePredictions};
pub use data::Sample;
pub use eval::{FamilyScore, ScoreReportOf};
pub use prompt::{Prompt, PromptCompiler};
pub use schema::{load_schema, validate_schema, SchemaBundle};

/// Score report in `f64`, as written to disk.
pub type ScoreReport = ScoreReportOf<f64>;
/// Score report in `f32`.
pub type ScoreReportF32 = ScoreReportOf<f32>;
/// Score report with exact rational precision, recall and F1.
pub type ExactScoreReport = ScoreReportOf<num_rational::Ratio<u64>>;
