//! Span-based edit-operation sequence transduction.
//!
//! Parallel text is converted into compact `(tag, span end, replacement)`
//! edit sequences, which a split-decoder neural model learns to predict
//! one triple at a time. The crate covers the edit algebra, the model and
//! its training loop, beam decoding with shortcuts, refinement and oracle
//! constraints, evaluation metrics, and a CLI.

pub mod autograd;
pub mod cli;
pub mod decoder;
pub mod edit;
pub mod editops;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod tags;
pub mod tokenize;
pub mod vocab;

pub use edit::{EditOp, EditSequence, Replacement};
pub use editops::{
    align, apply_edits, corpus_stats, extract_edits, span_groups, validate, AlignKind, AlignmentOp,
    CorpusStats, SpanGroup, ValidationReport, Violation,
};
pub use error::{Error, Result};
pub use tags::{builtin_tagset, TagId, TagSet};
pub use tokenize::{tokenize, TokenizeMode};
pub use vocab::{SourceSequence, TargetSequence, Token, TokenId, Vocabulary};
