use serde::Serialize;

use crate::error::Result;

use super::edit_model::EditModel;
use super::Example;

/// Agreement between backprop and central differences for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub name: String,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`, 0 when both vanish.
    pub relative_error: f64,
}

/// Compares the gradient of the training loss against central finite
/// differences with step `eps`, one entry per named parameter.
pub fn gradient_check(model: &EditModel, example: &Example, eps: f64) -> Result<Vec<GradCheck>> {
    let (_, grads) = model.loss_and_grads(example)?;
    let mut probe = model.clone();
    let ids: Vec<_> = model.params().ids().collect();
    let mut out = Vec::with_capacity(ids.len());
    for (k, id) in ids.into_iter().enumerate() {
        let len = model.params().get(id).data.len();
        let mut numeric = vec![0.0; len];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let orig = probe.params().get(id).data[i];
            probe.params_mut().get_mut(id).data[i] = orig + eps;
            let up = probe.example_loss(example)?;
            probe.params_mut().get_mut(id).data[i] = orig - eps;
            let down = probe.example_loss(example)?;
            probe.params_mut().get_mut(id).data[i] = orig;
            *slot = (up - down) / (2.0 * eps);
        }
        let analytic = grads[k]
            .as_ref()
            .map(|m| m.data.clone())
            .unwrap_or_else(|| vec![0.0; len]);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
        let (an, nn) = (norm(&analytic), norm(&numeric));
        let denom = an.max(nn);
        out.push(GradCheck {
            name: model.params().name(id).to_string(),
            analytic_norm: an,
            numeric_norm: nn,
            relative_error: if denom == 0.0 { 0.0 } else { norm(&diff) / denom },
        });
    }
    Ok(out)
}
