use crate::error::{Error, Result};
use crate::model::{EditModel, ModelMode};
use crate::vocab::{SourceSequence, TargetSequence, TokenId};

use super::params::{length_penalty, DecodeParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TokenHypothesis {
    pub tokens: TargetSequence,
    pub score: f64,
    pub raw_score: f64,
    /// Next-token evaluations along this path, end marker included.
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenNBest {
    pub hypotheses: Vec<TokenHypothesis>,
    pub evaluations: usize,
}

impl TokenNBest {
    pub fn best(&self) -> &TokenHypothesis {
        &self.hypotheses[0]
    }
}

fn emittable(class: usize) -> bool {
    class == TokenId::EOS.index() || class >= TokenId::UNK.index()
}

fn require_full(model: &EditModel) -> Result<()> {
    if model.mode() != ModelMode::FullSequence {
        return Err(Error::ModeMismatch {
            expected: ModelMode::FullSequence.as_str(),
            actual: model.mode().as_str(),
        });
    }
    Ok(())
}

/// Token-level beam search for the full-sequence baseline. The length
/// used for normalization counts the end marker.
pub fn full_sequence_decode(model: &EditModel, src: &SourceSequence, params: &DecodeParams) -> Result<TokenNBest> {
    require_full(model)?;
    params.validate()?;
    let budget = params.step_budget(src.len())?.min(model.config().max_positions - 1);
    let enc = model.encode(src)?;
    let mut beam: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    let mut finished: Vec<TokenHypothesis> = Vec::new();
    let mut evaluations = 0usize;
    let mut steps = 0usize;
    while !beam.is_empty() {
        steps += 1;
        if steps > budget {
            if finished.is_empty() {
                return Err(Error::MaxStepsExceeded {
                    max_steps: budget,
                    best_partial: format!("{:?}", beam[0].0),
                });
            }
            break;
        }
        let mut pool: Vec<(Vec<TokenId>, f64, bool)> = Vec::new();
        for (prefix, score) in &beam {
            let lp = model.full_sequence_log_probs(&enc, prefix)?;
            evaluations += 1;
            let mut idx: Vec<usize> = (0..lp.len()).filter(|&c| emittable(c)).collect();
            idx.sort_by(|&a, &b| lp[b].total_cmp(&lp[a]));
            idx.truncate(params.beam_size);
            for c in idx {
                let s = score + lp[c];
                if c == TokenId::EOS.index() {
                    pool.push((prefix.clone(), s, true));
                } else {
                    let mut next = prefix.clone();
                    next.push(TokenId(c as u32));
                    pool.push((next, s, false));
                }
            }
        }
        pool.sort_by(|a, b| b.1.total_cmp(&a.1));
        pool.truncate(params.beam_size);
        beam.clear();
        for (tokens, s, done) in pool {
            if done {
                let n = tokens.len() + 1;
                finished.push(TokenHypothesis {
                    tokens: TargetSequence::new(tokens),
                    score: params.normalize(s, n),
                    raw_score: s,
                    substeps: n,
                });
            } else {
                beam.push((tokens, s));
            }
        }
        finished.sort_by(|a, b| b.score.total_cmp(&a.score));
        finished.truncate(params.beam_size);
        if finished.len() == params.beam_size {
            let worst = finished[finished.len() - 1].score;
            let best_open = beam.first().map_or(f64::NEG_INFINITY, |(_, s)| {
                if params.length_norm_alpha == 0.0 {
                    *s
                } else {
                    s / length_penalty(budget, params.length_norm_alpha)
                }
            });
            if best_open <= worst {
                break;
            }
        }
    }
    Ok(TokenNBest {
        hypotheses: finished,
        evaluations,
    })
}

/// Step-wise argmax decoding for the full-sequence baseline.
pub fn full_sequence_greedy(model: &EditModel, src: &SourceSequence, params: &DecodeParams) -> Result<TokenHypothesis> {
    require_full(model)?;
    params.validate()?;
    let budget = params.step_budget(src.len())?.min(model.config().max_positions - 1);
    let enc = model.encode(src)?;
    let mut tokens = Vec::new();
    let mut score = 0.0;
    loop {
        if tokens.len() >= budget {
            return Err(Error::MaxStepsExceeded {
                max_steps: budget,
                best_partial: format!("{tokens:?}"),
            });
        }
        let lp = model.full_sequence_log_probs(&enc, &tokens)?;
        let mut best: Option<usize> = None;
        for c in (0..lp.len()).filter(|&c| emittable(c)) {
            if best.is_none_or(|b| lp[c] > lp[b]) {
                best = Some(c);
            }
        }
        let c = best.expect("EOS is always emittable");
        score += lp[c];
        if c == TokenId::EOS.index() {
            break;
        }
        tokens.push(TokenId(c as u32));
    }
    let n = tokens.len() + 1;
    Ok(TokenHypothesis {
        tokens: TargetSequence::new(tokens),
        score: params.normalize(score, n),
        raw_score: score,
        substeps: n,
    })
}
