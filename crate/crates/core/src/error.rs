use thiserror::Error;

use crate::editops::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown task `{name}`; valid tasks are: {valid}")]
    UnknownTask { name: String, valid: String },

    #[error("duplicate tag `{0}` in tag set")]
    DuplicateTag(String),

    #[error("duplicate surface `{0}` in vocabulary")]
    DuplicateSurface(String),

    #[error("unknown tag `{0}`")]
    UnknownTag(String),

    #[error("source sequence must contain at least one token")]
    EmptySource,

    #[error("invalid edit sequence: first violation at op {index}: {violation}")]
    InvalidEdits { index: usize, violation: Violation },

    #[error("annotation count mismatch: {changed} changed regions but {given} tags given")]
    AnnotationMismatch { changed: usize, given: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("input of length {len} exceeds max_positions {max}")]
    Overlength { len: usize, max: usize },

    #[error("invalid model config: {0}")]
    Config(String),

    #[error("operation requires model mode `{expected}` but model is `{actual}`")]
    ModeMismatch { expected: &'static str, actual: &'static str },

    #[error("span end {span} out of range for source of length {len}")]
    SpanOutOfRange { span: usize, len: usize },

    #[error("non-finite loss at training step {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    #[error("invalid decode parameters: {0}")]
    DecodeParams(String),

    #[error("no finished hypothesis within {max_steps} sub-steps (best partial: {best_partial})")]
    MaxStepsExceeded { max_steps: usize, best_partial: String },

    #[error("oracle constraint: {0}")]
    Constraint(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty reference set for sentence {0}")]
    EmptyReferences(usize),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
