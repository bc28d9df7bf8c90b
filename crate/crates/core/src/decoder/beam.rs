use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autograd::Mat;
use crate::edit::{EditOp, EditSequence, Replacement};
use crate::error::{Error, Result};
use crate::model::{class_replacement, EditModel, EncodedSource, ModelMode, StepFeedback};
use crate::tags::TagId;
use crate::vocab::{SourceSequence, TokenId};

use super::params::{length_penalty, DecodeParams};

/// Forces tags and/or span ends to follow a reference sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OracleConstraint {
    pub tags: Option<Vec<TagId>>,
    pub spans: Option<Vec<usize>>,
    /// Also allow the previously consumed reference label again.
    pub allow_repeat: bool,
}

impl OracleConstraint {
    /// Takes the constrained features from a gold edit sequence.
    pub fn from_edits(gold: &EditSequence, tags: bool, spans: bool, allow_repeat: bool) -> Self {
        OracleConstraint {
            tags: tags.then(|| gold.tags()),
            spans: spans.then(|| gold.spans()),
            allow_repeat,
        }
    }

    fn validate(&self) -> Result<()> {
        let present = |v: Option<usize>| v.is_some_and(|n| n > 0);
        if !present(self.tags.as_ref().map(Vec::len)) && !present(self.spans.as_ref().map(Vec::len)) {
            return Err(Error::Constraint("need a non-empty tag or span reference".into()));
        }
        Ok(())
    }
}

/// Candidate labels at a reference pointer: the next one (advancing), and
/// the previous one again when repeats are allowed.
fn reference_choices<T: Copy + PartialEq>(reference: &[T], ptr: usize, allow_repeat: bool) -> Vec<(T, usize)> {
    let mut out = Vec::with_capacity(2);
    if let Some(&next) = reference.get(ptr) {
        out.push((next, ptr + 1));
    }
    if allow_repeat && ptr > 0 {
        let prev = reference[ptr - 1];
        if out.iter().all(|&(v, _)| v != prev) {
            out.push((prev, ptr));
        }
    }
    out
}

/// A finished edit sequence with its score.
#[derive(Debug, Clone, PartialEq)]
pub struct EditHypothesis {
    pub edits: EditSequence,
    /// Ranking score: `raw_score`, length-normalized when α > 0.
    pub score: f64,
    /// λ-weighted sum of sub-step log-probabilities.
    pub raw_score: f64,
    /// Model sub-step evaluations along this hypothesis' path.
    pub substeps: usize,
}

/// Hypotheses in descending score order.
#[derive(Debug, Clone, PartialEq)]
pub struct NBest {
    pub hypotheses: Vec<EditHypothesis>,
    /// Model sub-step evaluations across the whole search.
    pub evaluations: usize,
}

impl NBest {
    pub fn best(&self) -> &EditHypothesis {
        &self.hypotheses[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Tag,
    Span(TagId),
    Replacement(TagId, usize),
}

#[derive(Debug, Clone)]
struct Partial {
    ops: Vec<EditOp>,
    score: f64,
    phase: Phase,
    a_out: Option<Rc<Mat>>,
    substeps: usize,
    tag_ptr: usize,
    span_ptr: usize,
    done: bool,
}

impl Partial {
    fn prev_span(&self) -> usize {
        self.ops.last().map_or(0, |o| o.span_end)
    }

    fn h(&self) -> &[f64] {
        let a = self.a_out.as_ref().expect("decoder A state");
        a.row(a.rows - 1)
    }

    fn push(&self, op: EditOp, score: f64) -> Partial {
        let mut ops = self.ops.clone();
        ops.push(op);
        Partial {
            ops,
            score,
            phase: Phase::Tag,
            a_out: None,
            done: op.tag == TagId::EOS,
            ..self.clone()
        }
    }

    fn with_phase(&self, phase: Phase, score: f64) -> Partial {
        Partial {
            phase,
            score,
            ..self.clone()
        }
    }
}

/// Indices of `scores` restricted to `allowed`, best first, ties by index.
fn ranked(scores: &[f64], allowed: impl Iterator<Item = usize>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = allowed.collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.truncate(k);
    idx
}

struct Search<'a> {
    model: &'a EditModel,
    enc: EncodedSource,
    source_len: usize,
    params: &'a DecodeParams,
    constraint: Option<&'a OracleConstraint>,
    evaluations: usize,
}

impl Search<'_> {
    fn span_range(&self, tag: TagId, prev: usize) -> std::ops::RangeInclusive<usize> {
        if tag == TagId::EOS {
            self.source_len..=self.source_len
        } else if tag == TagId::SELF {
            prev + 1..=self.source_len
        } else {
            prev.max(1)..=self.source_len
        }
    }

    fn expand(&mut self, hyp: &Partial) -> Result<Vec<Partial>> {
        let p = self.params;
        let mut out = Vec::new();
        match hyp.phase {
            Phase::Tag => {
                let mut history = vec![StepFeedback::start()];
                history.extend(hyp.ops.iter().map(StepFeedback::from_op));
                let a = Rc::new(self.model.decoder_a_outputs(&self.enc, &history)?);
                self.evaluations += 1;
                let mut base = hyp.clone();
                base.a_out = Some(a);
                base.substeps += 1;
                let lp = self.model.tag_log_probs(base.h())?;
                let prev = hyp.prev_span();
                let choices: Vec<(TagId, usize)> = match self.constraint.and_then(|c| c.tags.as_ref()) {
                    Some(reference) => {
                        reference_choices(reference, hyp.tag_ptr, self.constraint.is_some_and(|c| c.allow_repeat))
                    }
                    None => (0..lp.len()).map(|t| (TagId(t as u16), 0)).collect(),
                };
                for (tag, ptr) in choices {
                    if tag.index() >= lp.len() || (tag == TagId::SELF && prev >= self.source_len) {
                        continue;
                    }
                    let score = base.score + p.lambda_t * lp[tag.index()];
                    let mut child = if tag == TagId::EOS && p.shortcuts_enabled {
                        match self.forced_span(&base, self.source_len) {
                            Some(span_ptr) => {
                                let mut c = base.push(EditOp::eos(self.source_len), score);
                                c.span_ptr = span_ptr;
                                c
                            }
                            None => continue,
                        }
                    } else {
                        base.with_phase(Phase::Span(tag), score)
                    };
                    if self.constraint.is_some_and(|c| c.tags.is_some()) {
                        child.tag_ptr = ptr;
                    }
                    out.push(child);
                }
            }
            Phase::Span(tag) => {
                let lp = self.model.span_log_probs(hyp.h(), tag, &self.enc)?;
                self.evaluations += 1;
                let range = self.span_range(tag, hyp.prev_span());
                let candidates: Vec<(usize, usize)> = match self.constraint.and_then(|c| c.spans.as_ref()) {
                    Some(reference) => reference_choices(reference, hyp.span_ptr, self.constraint.is_some_and(|c| c.allow_repeat))
                        .into_iter()
                        .filter(|(s, _)| range.contains(s))
                        .collect(),
                    None => ranked(&lp, range.map(|s| s - 1), 2 * p.beam_size)
                        .into_iter()
                        .map(|k| (k + 1, hyp.span_ptr))
                        .collect(),
                };
                for (span, ptr) in candidates {
                    let score = hyp.score + p.lambda_p * lp[span - 1];
                    let mut child = if tag == TagId::SELF && p.shortcuts_enabled {
                        hyp.push(EditOp::keep(span), score)
                    } else {
                        hyp.with_phase(Phase::Replacement(tag, span), score)
                    };
                    child.substeps += 1;
                    child.span_ptr = ptr;
                    out.push(child);
                }
            }
            Phase::Replacement(tag, span) => {
                let a = hyp.a_out.as_ref().expect("decoder A state");
                let lp = self.model.replacement_log_probs(tag, span, &self.enc, a)?;
                self.evaluations += 1;
                let classes: Vec<usize> = if tag == TagId::SELF {
                    vec![0]
                } else if tag == TagId::EOS {
                    vec![TokenId::EOS.index()]
                } else {
                    let allowed = (1..lp.len()).filter(|&c| c != TokenId::EOS.index());
                    ranked(&lp, allowed, p.beam_size)
                };
                for class in classes {
                    let score = hyp.score + p.lambda_r * lp[class];
                    let op = EditOp {
                        tag,
                        span_end: span,
                        replacement: class_replacement(class),
                    };
                    let mut child = hyp.push(op, score);
                    child.substeps += 1;
                    out.push(child);
                }
            }
        }
        Ok(out)
    }

    /// Span-pointer update when the EOS shortcut fixes the span to `span`;
    /// `None` when a span constraint forbids it.
    fn forced_span(&self, hyp: &Partial, span: usize) -> Option<usize> {
        match self.constraint.and_then(|c| c.spans.as_ref()) {
            None => Some(hyp.span_ptr),
            Some(reference) => reference_choices(reference, hyp.span_ptr, self.constraint.is_some_and(|c| c.allow_repeat))
                .into_iter()
                .find(|&(s, _)| s == span)
                .map(|(_, ptr)| ptr),
        }
    }

    fn finish(&self, hyp: Partial) -> EditHypothesis {
        let n = hyp.ops.len();
        EditHypothesis {
            edits: EditSequence::new(hyp.ops, self.source_len),
            score: self.params.normalize(hyp.score, n),
            raw_score: hyp.score,
            substeps: hyp.substeps,
        }
    }

    fn run(mut self) -> Result<NBest> {
        let p = self.params;
        let budget = p.step_budget(self.source_len)?;
        let mut beam = vec![Partial {
            ops: Vec::new(),
            score: 0.0,
            phase: Phase::Tag,
            a_out: None,
            substeps: 0,
            tag_ptr: 0,
            span_ptr: 0,
            done: false,
        }];
        let mut finished: Vec<EditHypothesis> = Vec::new();
        let mut steps = 0usize;
        while !beam.is_empty() {
            steps += 1;
            if steps > budget {
                if finished.is_empty() {
                    let best = &beam[0];
                    return Err(Error::MaxStepsExceeded {
                        max_steps: budget,
                        best_partial: format!("{:?}", best.ops),
                    });
                }
                break;
            }
            let mut pool = Vec::new();
            for hyp in &beam {
                pool.extend(self.expand(hyp)?);
            }
            pool.sort_by(|a, b| b.score.total_cmp(&a.score));
            pool.truncate(p.beam_size);
            beam.clear();
            for hyp in pool {
                if hyp.done {
                    finished.push(self.finish(hyp));
                } else {
                    beam.push(hyp);
                }
            }
            finished.sort_by(|a, b| b.score.total_cmp(&a.score));
            finished.truncate(p.beam_size);
            if finished.len() == p.beam_size {
                let worst = finished[finished.len() - 1].score;
                let best_open = beam.first().map_or(f64::NEG_INFINITY, |h| {
                    if p.length_norm_alpha == 0.0 {
                        h.score
                    } else {
                        h.score / length_penalty(budget, p.length_norm_alpha)
                    }
                });
                if best_open <= worst {
                    break;
                }
            }
        }
        if finished.is_empty() {
            return Err(match self.constraint {
                Some(_) => Error::Constraint("reference exhausted before EOS".into()),
                None => Error::MaxStepsExceeded {
                    max_steps: budget,
                    best_partial: "[]".into(),
                },
            });
        }
        Ok(NBest {
            hypotheses: finished,
            evaluations: self.evaluations,
        })
    }
}

fn search(
    model: &EditModel,
    src: &SourceSequence,
    params: &DecodeParams,
    constraint: Option<&OracleConstraint>,
) -> Result<NBest> {
    if model.mode() != ModelMode::Edit {
        return Err(Error::ModeMismatch {
            expected: ModelMode::Edit.as_str(),
            actual: model.mode().as_str(),
        });
    }
    params.validate()?;
    let enc = model.encode(src)?;
    Search {
        model,
        enc,
        source_len: src.len(),
        params,
        constraint,
        evaluations: 0,
    }
    .run()
}

/// Beam search with pruning after every tag, span and replacement
/// sub-step. Candidates that finish compete for beam slots at the step
/// they finish and then leave the beam.
pub fn beam_decode(model: &EditModel, src: &SourceSequence, params: &DecodeParams) -> Result<NBest> {
    search(model, src, params, None)
}

/// Beam search restricted to reference tags and/or span ends.
pub fn constrained_decode(
    model: &EditModel,
    src: &SourceSequence,
    params: &DecodeParams,
    constraint: &OracleConstraint,
) -> Result<NBest> {
    constraint.validate()?;
    search(model, src, params, Some(constraint))
}

/// Step-wise argmax decoding, written independently of the beam search.
pub fn greedy_decode(model: &EditModel, src: &SourceSequence, params: &DecodeParams) -> Result<EditHypothesis> {
    params.validate()?;
    let enc = model.encode(src)?;
    let len = src.len();
    let budget = params.step_budget(len)?;
    let argmax = |lp: &[f64], allowed: &mut dyn Iterator<Item = usize>| {
        let mut best: Option<usize> = None;
        for i in allowed {
            if best.is_none_or(|b| lp[i] > lp[b]) {
                best = Some(i);
            }
        }
        best
    };
    let mut ops: Vec<EditOp> = Vec::new();
    let mut history = vec![StepFeedback::start()];
    let (mut score, mut substeps) = (0.0, 0usize);
    loop {
        if substeps >= budget {
            return Err(Error::MaxStepsExceeded {
                max_steps: budget,
                best_partial: format!("{ops:?}"),
            });
        }
        let prev = ops.last().map_or(0, |o| o.span_end);
        let a = model.decoder_a_outputs(&enc, &history)?;
        let h = a.row(a.rows - 1);
        let lp = model.tag_log_probs(h)?;
        substeps += 1;
        let tag = argmax(&lp, &mut (0..lp.len()).filter(|&t| t != 0 || prev < len)).expect("EOS is always allowed");
        let tag = TagId(tag as u16);
        score += params.lambda_t * lp[tag.index()];
        if tag == TagId::EOS && params.shortcuts_enabled {
            ops.push(EditOp::eos(len));
            break;
        }
        let lp = model.span_log_probs(h, tag, &enc)?;
        substeps += 1;
        let span = if tag == TagId::EOS {
            len
        } else {
            let lo = if tag == TagId::SELF { prev + 1 } else { prev.max(1) };
            argmax(&lp, &mut (lo - 1..len)).expect("non-empty span range") + 1
        };
        score += params.lambda_p * lp[span - 1];
        let replacement = if tag == TagId::SELF && params.shortcuts_enabled {
            Replacement::Keep
        } else {
            let lp = model.replacement_log_probs(tag, span, &enc, &a)?;
            substeps += 1;
            let class = if tag == TagId::SELF {
                0
            } else if tag == TagId::EOS {
                TokenId::EOS.index()
            } else {
                argmax(&lp, &mut (1..lp.len()).filter(|&c| c != TokenId::EOS.index())).expect("vocabulary")
            };
            score += params.lambda_r * lp[class];
            class_replacement(class)
        };
        let op = EditOp {
            tag,
            span_end: span,
            replacement,
        };
        ops.push(op);
        if tag == TagId::EOS {
            break;
        }
        history.push(StepFeedback::from_op(&op));
    }
    let n = ops.len();
    Ok(EditHypothesis {
        edits: EditSequence::new(ops, len),
        score: params.normalize(score, n),
        raw_score: score,
        substeps,
    })
}
