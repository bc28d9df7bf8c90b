use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use crate::edit::EditSequence;
use crate::editops::{span_groups, SpanGroup};
use crate::error::{Error, Result};
use crate::tags::TagId;
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpanMatchReport {
    pub true_positives: usize,
    pub hyp_count: usize,
    pub gold_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub beta: f64,
}

impl SpanMatchReport {
    /// Applies the conventions for empty sides: P = 1 when both sides are
    /// empty and 0 when only the hypothesis is; R symmetrically.
    pub fn from_counts(true_positives: usize, hyp_count: usize, gold_count: usize, beta: f64) -> Self {
        let side = |own: usize, other: usize| {
            if own > 0 {
                true_positives as f64 / own as f64
            } else if other == 0 {
                1.0
            } else {
                0.0
            }
        };
        let precision = side(hyp_count, gold_count);
        let recall = side(gold_count, hyp_count);
        let b2 = beta * beta;
        let denom = b2 * precision + recall;
        let f_beta = if denom > 0.0 {
            (1.0 + b2) * precision * recall / denom
        } else {
            0.0
        };
        SpanMatchReport {
            true_positives,
            hyp_count,
            gold_count,
            precision,
            recall,
            f_beta,
            beta,
        }
    }

    /// Pools the counts of two reports.
    pub fn merge(&self, other: &SpanMatchReport) -> Self {
        SpanMatchReport::from_counts(
            self.true_positives + other.true_positives,
            self.hyp_count + other.hyp_count,
            self.gold_count + other.gold_count,
            self.beta,
        )
    }
}

fn multiset_overlap<K: Eq + Hash>(hyp: impl Iterator<Item = K>, gold: impl Iterator<Item = K>) -> usize {
    let mut counts: HashMap<K, usize> = HashMap::new();
    for k in gold {
        *counts.entry(k).or_default() += 1;
    }
    let mut tp = 0;
    for k in hyp {
        if let Some(c) = counts.get_mut(&k) {
            if *c > 0 {
                *c -= 1;
                tp += 1;
            }
        }
    }
    tp
}

fn check_sources(hyp: &EditSequence, gold: &EditSequence) -> Result<()> {
    if hyp.source_len != gold.source_len {
        return Err(Error::LengthMismatch(hyp.source_len, gold.source_len));
    }
    Ok(())
}

/// A hypothesis group matches a gold group when source span and emitted
/// tokens agree; tags are ignored.
pub fn span_prf(hyp: &EditSequence, gold: &EditSequence, beta: f64) -> Result<SpanMatchReport> {
    check_sources(hyp, gold)?;
    let (h, g) = (span_groups(hyp), span_groups(gold));
    let key = |s: &SpanGroup| -> (usize, usize, Vec<TokenId>) { (s.start, s.end, s.tokens.clone()) };
    let tp = multiset_overlap(h.iter().map(key), g.iter().map(key));
    Ok(SpanMatchReport::from_counts(tp, h.len(), g.len(), beta))
}

/// Shared extent of two source intervals; zero-width groups count as
/// overlapping anything they touch.
fn overlap(a: &SpanGroup, b: &SpanGroup) -> Option<usize> {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    let zero_width = a.start == a.end || b.start == b.end;
    (lo < hi || (zero_width && lo <= hi)).then(|| hi.saturating_sub(lo))
}

/// A hypothesis group matches a gold group when source span and tag agree.
/// With `project_spans`, each hypothesis group first takes the span of
/// the gold group it overlaps most (the first one on ties).
pub fn tagging_prf(hyp: &EditSequence, gold: &EditSequence, beta: f64, project_spans: bool) -> Result<SpanMatchReport> {
    check_sources(hyp, gold)?;
    let (h, g) = (span_groups(hyp), span_groups(gold));
    let keys: Vec<(usize, usize, TagId)> = h
        .iter()
        .map(|s| {
            let target = project_spans
                .then(|| {
                    g.iter()
                        .filter_map(|t| overlap(s, t).map(|o| (o, t)))
                        .fold(None::<(usize, &SpanGroup)>, |best, (o, t)| match best {
                            Some((bo, _)) if bo >= o => best,
                            _ => Some((o, t)),
                        })
                        .map(|(_, t)| t)
                })
                .flatten()
                .unwrap_or(s);
            (target.start, target.end, s.tag)
        })
        .collect();
    let tp = multiset_overlap(keys.into_iter(), g.iter().map(|s| (s.start, s.end, s.tag)));
    Ok(SpanMatchReport::from_counts(tp, h.len(), g.len(), beta))
}

fn corpus<F>(hyps: &[EditSequence], golds: &[EditSequence], beta: f64, f: F) -> Result<SpanMatchReport>
where
    F: Fn(&EditSequence, &EditSequence) -> Result<SpanMatchReport>,
{
    super::check_lengths(hyps.len(), golds.len())?;
    let mut total = SpanMatchReport::from_counts(0, 0, 0, beta);
    for (h, g) in hyps.iter().zip(golds) {
        total = total.merge(&f(h, g)?);
    }
    Ok(total)
}

/// [`span_prf`] with counts pooled over a corpus.
pub fn corpus_span_prf(hyps: &[EditSequence], golds: &[EditSequence], beta: f64) -> Result<SpanMatchReport> {
    corpus(hyps, golds, beta, |h, g| span_prf(h, g, beta))
}

/// [`tagging_prf`] with counts pooled over a corpus.
pub fn corpus_tagging_prf(
    hyps: &[EditSequence],
    golds: &[EditSequence],
    beta: f64,
    project_spans: bool,
) -> Result<SpanMatchReport> {
    corpus(hyps, golds, beta, |h, g| tagging_prf(h, g, beta, project_spans))
}
