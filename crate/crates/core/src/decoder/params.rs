use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decoding knobs. Loaded from JSON by field name; missing fields take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeParams {
    pub beam_size: usize,
    pub lambda_t: f64,
    pub lambda_p: f64,
    pub lambda_r: f64,
    /// Length-normalization exponent; 0 disables.
    pub length_norm_alpha: f64,
    /// Multiplies the probability of the identity output during refinement;
    /// 1 disables.
    pub identity_penalty: f64,
    pub refinement_passes: usize,
    pub shortcuts_enabled: bool,
    /// Cap on beam sub-steps; `None` picks `3 * (2I + 8)` for a source of
    /// length `I`.
    pub max_steps: Option<usize>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            beam_size: 4,
            lambda_t: 1.0,
            lambda_p: 1.0,
            lambda_r: 1.0,
            length_norm_alpha: 0.0,
            identity_penalty: 1.0,
            refinement_passes: 1,
            shortcuts_enabled: false,
            max_steps: None,
        }
    }
}

impl DecodeParams {
    pub fn greedy() -> Self {
        DecodeParams {
            beam_size: 1,
            ..DecodeParams::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::DecodeParams(msg));
        if self.beam_size == 0 {
            return fail("beam_size must be at least 1".into());
        }
        if self.refinement_passes == 0 {
            return fail("refinement_passes must be at least 1".into());
        }
        for (name, v) in [
            ("lambda_t", self.lambda_t),
            ("lambda_p", self.lambda_p),
            ("lambda_r", self.lambda_r),
            ("length_norm_alpha", self.length_norm_alpha),
            ("identity_penalty", self.identity_penalty),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    /// Sub-step budget for a source of length `source_len`.
    pub fn step_budget(&self, source_len: usize) -> Result<usize> {
        let floor = 3 * (source_len + 2);
        match self.max_steps {
            Some(m) if m < floor => Err(Error::DecodeParams(format!(
                "max_steps {m} below 3*(I+2) = {floor} for a source of length {source_len}"
            ))),
            Some(m) => Ok(m),
            None => Ok(3 * (2 * source_len + 8)),
        }
    }

    pub(crate) fn normalize(&self, score: f64, len: usize) -> f64 {
        if self.length_norm_alpha == 0.0 {
            score
        } else {
            score / length_penalty(len, self.length_norm_alpha)
        }
    }
}

/// `((5 + n) / 6)^alpha`.
pub fn length_penalty(n: usize, alpha: f64) -> f64 {
    ((5.0 + n as f64) / 6.0).powf(alpha)
}
