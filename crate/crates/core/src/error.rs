use std::path::PathBuf;

use thiserror::Error;

use crate::schema::ValidationReport;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: offsets [{start}, {end}) slice to {actual:?}, record says {expected:?}")]
    OffsetMismatch {
        line: usize,
        start: usize,
        end: usize,
        expected: String,
        actual: String,
    },
    #[error("line {line}: unknown tag {tag:?}")]
    UnknownTag { line: usize, tag: String },
    #[error("fraction {0} is outside (0, 1]")]
    FractionOutOfRange(f64),
    #[error("top_n = {top_n} exceeds the {distinct} distinct event types")]
    TopNTooLarge { top_n: usize, distinct: usize },
    #[error("k must be at least 1")]
    ZeroShots,
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("stem {stem:?} must contain exactly one {{SLOT}} placeholder, found {found}")]
    Placeholder { stem: String, found: usize },
    #[error("role {role:?} of event type {event_type:?} has no fragment_id (required in composable mode)")]
    MissingFragment { event_type: String, role: String },
    #[error("fragment {0:?} is not in the fragment library")]
    UnknownFragment(String),
    #[error("unknown entity type {0:?}")]
    UnknownEntityType(String),
    #[error("unknown event type {0:?}")]
    UnknownEventType(String),
    #[error("prompt needs {needed} tokens, budget is {budget}")]
    OverBudget { needed: usize, budget: usize },
    #[error("mask surface pattern {0:?} must contain exactly one {{i}}")]
    MaskPattern(String),
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("gold answer {answer:?} contains the separator '|'")]
    SeparatorInAnswer { answer: String },
    #[error("gold sample {sample:?} has no relation pair #{pair}")]
    MissingPair { sample: String, pair: usize },
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("empty generation request")]
    EmptyRequest,
    #[error("transport failure talking to {url}: {message}")]
    Transport { url: String, message: String },
    #[error("backend rejected request with status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("prompt {index} exceeds the backend length budget")]
    LengthOverflow { index: usize },
    #[error("oracle has no gold sample {0:?}")]
    UnknownSample(String),
    #[error("oracle has no target for prompt text {0:?}")]
    UnknownPrompt(String),
    #[error("oracle prompt text is shared by samples with different targets: {0:?}")]
    ConflictingPrompt(String),
    #[error("backend returned {got} outputs for {expected} prompts")]
    CountMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
}
