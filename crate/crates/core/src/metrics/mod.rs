//! Sentence error rate, exact match, SARI, and span/tag P/R/F scores.

mod report;
mod sari;
mod spans;

pub use report::{render_table, Metric, MetricReport};
pub use sari::{corpus_sari, sari};
pub use spans::{corpus_span_prf, corpus_tagging_prf, span_prf, tagging_prf, SpanMatchReport};

use crate::error::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(())
}

/// Fraction of positions where the hypothesis differs from the reference.
pub fn sentence_error_rate<T: PartialEq>(hyps: &[T], refs: &[T]) -> Result<f64> {
    check_lengths(hyps.len(), refs.len())?;
    let errors = hyps.iter().zip(refs).filter(|(h, r)| h != r).count();
    Ok(errors as f64 / hyps.len() as f64)
}

/// `1 − sentence_error_rate`.
pub fn exact_match<T: PartialEq>(hyps: &[T], refs: &[T]) -> Result<f64> {
    Ok(1.0 - sentence_error_rate(hyps, refs)?)
}
