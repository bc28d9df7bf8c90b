use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::EditModel;
use crate::vocab::{SourceSequence, TargetSequence};

use super::params::DecodeParams;
use super::refine::{best_text, iterative_refine};

/// Per-feature weight values searched by [`tune_lambdas`].
pub const LAMBDA_GRID: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaChoice {
    pub lambda_t: f64,
    pub lambda_p: f64,
    pub lambda_r: f64,
    pub objective: f64,
}

/// Exhaustive search over `LAMBDA_GRID³` on a development set. `objective`
/// maps (hypotheses, references) to a score where higher is better; the
/// first grid point reaching the maximum wins.
pub fn tune_lambdas<F>(
    model: &EditModel,
    dev: &[(SourceSequence, TargetSequence)],
    base: &DecodeParams,
    objective: F,
) -> Result<LambdaChoice>
where
    F: Fn(&[TargetSequence], &[TargetSequence]) -> f64,
{
    if dev.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let refs: Vec<TargetSequence> = dev.iter().map(|(_, t)| t.clone()).collect();
    let mut best: Option<LambdaChoice> = None;
    for &lambda_t in &LAMBDA_GRID {
        for &lambda_p in &LAMBDA_GRID {
            for &lambda_r in &LAMBDA_GRID {
                let params = DecodeParams {
                    lambda_t,
                    lambda_p,
                    lambda_r,
                    ..base.clone()
                };
                let mut hyps = Vec::with_capacity(dev.len());
                for (src, _) in dev {
                    hyps.push(TargetSequence::new(best_text(&iterative_refine(model, src, &params)?)));
                }
                let value = objective(&hyps, &refs);
                if best.is_none_or(|b| value > b.objective) {
                    best = Some(LambdaChoice {
                        lambda_t,
                        lambda_p,
                        lambda_r,
                        objective: value,
                    });
                }
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}
