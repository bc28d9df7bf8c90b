//! Beam search over the interleaved tag/span/replacement factorization.

mod beam;
mod fullseq;
mod params;
mod refine;
mod tune;

pub use beam::{beam_decode, constrained_decode, greedy_decode, EditHypothesis, NBest, OracleConstraint};
pub use fullseq::{full_sequence_decode, full_sequence_greedy, TokenHypothesis, TokenNBest};
pub use params::{length_penalty, DecodeParams};
pub use refine::{iterative_refine, RefinedHypothesis};
pub use tune::{tune_lambdas, LambdaChoice, LAMBDA_GRID};

#[cfg(test)]
mod tests;
