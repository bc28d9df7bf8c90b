use crate::edit::EditSequence;
use crate::editops::apply_edits;
use crate::error::{Error, Result};
use crate::model::EditModel;
use crate::vocab::{SourceSequence, TargetSequence, TokenId};

use super::beam::beam_decode;
use super::params::DecodeParams;

/// An output text after one or more passes, with the edits of each pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedHypothesis {
    pub target: TargetSequence,
    /// Sum of the per-pass beam scores, identity penalties included.
    pub score: f64,
    pub passes: Vec<EditSequence>,
}

/// Repeated beam search where every n-best output of one pass is decoded
/// again as the source of the next.
///
/// One pass returns the beam search n-best list unchanged. With two or
/// more passes, a candidate whose text equals its pass input
/// has `ln(identity_penalty)` added to its score at every pass. Candidates
/// are deduplicated by text, keeping the best score. A candidate from an
/// earlier pass whose re-decoding exceeds the step budget is carried
/// forward unchanged.
pub fn iterative_refine(model: &EditModel, src: &SourceSequence, params: &DecodeParams) -> Result<Vec<RefinedHypothesis>> {
    params.validate()?;
    if params.refinement_passes == 1 {
        let target = |h: &super::beam::EditHypothesis| apply_edits(src, &h.edits);
        return beam_decode(model, src, params)?
            .hypotheses
            .into_iter()
            .map(|h| {
                Ok(RefinedHypothesis {
                    target: target(&h)?,
                    score: h.score,
                    passes: vec![h.edits],
                })
            })
            .collect();
    }
    let penalty = params.identity_penalty.ln();
    let mut inputs = vec![RefinedHypothesis {
        target: TargetSequence::new(src.tokens().to_vec()),
        score: 0.0,
        passes: Vec::new(),
    }];
    for _ in 0..params.refinement_passes {
        let mut pool: Vec<RefinedHypothesis> = Vec::new();
        for input in &inputs {
            if input.target.is_empty() {
                merge(&mut pool, input.clone());
                continue;
            }
            let pass_src = SourceSequence::new(input.target.tokens().to_vec())?;
            let nbest = match beam_decode(model, &pass_src, params) {
                Ok(n) => n,
                Err(Error::MaxStepsExceeded { .. }) if !input.passes.is_empty() => {
                    merge(&mut pool, input.clone());
                    continue;
                }
                Err(e) => return Err(e),
            };
            for hyp in nbest.hypotheses {
                let target = apply_edits(&pass_src, &hyp.edits)?;
                let mut score = input.score + hyp.score;
                if target.tokens() == input.target.tokens() {
                    score += penalty;
                }
                let mut passes = input.passes.clone();
                passes.push(hyp.edits);
                merge(&mut pool, RefinedHypothesis { target, score, passes });
            }
        }
        pool.sort_by(|a, b| b.score.total_cmp(&a.score));
        pool.truncate(params.beam_size);
        inputs = pool;
    }
    Ok(inputs)
}

fn merge(pool: &mut Vec<RefinedHypothesis>, candidate: RefinedHypothesis) {
    match pool.iter_mut().find(|h| h.target == candidate.target) {
        Some(existing) if candidate.score > existing.score => *existing = candidate,
        Some(_) => {}
        None => pool.push(candidate),
    }
}

/// Output text of the best hypothesis.
pub(crate) fn best_text(hyps: &[RefinedHypothesis]) -> Vec<TokenId> {
    hyps.first().map(|h| h.target.tokens().to_vec()).unwrap_or_default()
}
