use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::Mat;
use crate::error::{Error, Result};

use super::edit_model::{EditModel, LossBreakdown};
use super::Example;

/// Adam with a fixed learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.98,
            epsilon: 1e-9,
            batch_size: 8,
            clip_norm: Some(1.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Batch-mean loss before each update.
    pub curve: Vec<LossBreakdown>,
}

impl TrainReport {
    pub fn initial(&self) -> Option<f64> {
        self.curve.first().map(|l| l.total)
    }

    pub fn last(&self) -> Option<f64> {
        self.curve.last().map(|l| l.total)
    }

    /// One `step,tag_ce,span_ce,replacement_ce,total` row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,tag_ce,span_ce,replacement_ce,total\n");
        for (i, l) in self.curve.iter().enumerate() {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?}\n",
                i + 1,
                l.tag_ce,
                l.span_ce,
                l.replacement_ce,
                l.total
            ));
        }
        out
    }
}

/// Runs `config.steps` Adam updates on minibatches drawn with replacement.
///
/// Gradients are summed in batch order, so a fixed seed reproduces the loss
/// curve bit for bit.
pub fn train(model: &mut EditModel, corpus: &[Example], config: &TrainConfig) -> Result<TrainReport> {
    run(model, corpus, config, 0, &mut |_| false)
}

/// [`train`] that calls `stop` every `every` steps and ends early once it
/// returns true. The optimizer and sampling state match an uninterrupted
/// run up to that point.
pub fn train_until<F>(model: &mut EditModel, corpus: &[Example], config: &TrainConfig, every: usize, mut stop: F) -> Result<TrainReport>
where
    F: FnMut(&EditModel) -> bool,
{
    run(model, corpus, config, every, &mut stop)
}

fn run(
    model: &mut EditModel,
    corpus: &[Example],
    config: &TrainConfig,
    every: usize,
    stop: &mut dyn FnMut(&EditModel) -> bool,
) -> Result<TrainReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut m = model.params().zeros_like();
    let mut v = model.params().zeros_like();
    let mut report = TrainReport::default();
    let ids: Vec<_> = model.params().ids().collect();

    for step in 1..=config.steps {
        let mut grads = model.params().zeros_like();
        let mut mean = LossBreakdown::default();
        let scale = 1.0 / config.batch_size as f64;
        for _ in 0..config.batch_size {
            let example = &corpus[rng.gen_range(0..corpus.len())];
            let (loss, g) = model.loss_and_grads(example)?;
            mean.tag_ce += loss.tag_ce * scale;
            mean.span_ce += loss.span_ce * scale;
            mean.replacement_ce += loss.replacement_ce * scale;
            mean.total += loss.total * scale;
            for (acc, g) in grads.iter_mut().zip(g) {
                if let Some(g) = g {
                    for (a, b) in acc.data.iter_mut().zip(&g.data) {
                        *a += b * scale;
                    }
                }
            }
        }
        if !mean.total.is_finite() {
            return Err(Error::NonFinite {
                step,
                detail: format!("loss is {}", mean.total),
            });
        }
        let norm = global_norm(&grads);
        if !norm.is_finite() {
            return Err(Error::NonFinite {
                step,
                detail: format!("gradient norm is {norm}"),
            });
        }
        let clip = match config.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        let t = step as i32;
        let bias1 = 1.0 - config.beta1.powi(t);
        let bias2 = 1.0 - config.beta2.powi(t);
        let params = model.params_mut();
        for (k, &id) in ids.iter().enumerate() {
            let p = params.get_mut(id);
            let (mk, vk, gk) = (&mut m[k].data, &mut v[k].data, &grads[k].data);
            for i in 0..p.data.len() {
                let g = gk[i] * clip;
                mk[i] = config.beta1 * mk[i] + (1.0 - config.beta1) * g;
                vk[i] = config.beta2 * vk[i] + (1.0 - config.beta2) * g * g;
                let mhat = mk[i] / bias1;
                let vhat = vk[i] / bias2;
                p.data[i] -= config.learning_rate * mhat / (vhat.sqrt() + config.epsilon);
            }
        }
        if !params.all_finite() {
            let name = params
                .iter()
                .find(|(_, _, m)| !m.is_finite())
                .map(|(_, n, _)| n.to_string())
                .unwrap_or_default();
            return Err(Error::NonFinite {
                step,
                detail: format!("parameter `{name}` became non-finite"),
            });
        }
        report.curve.push(mean);
        if every > 0 && step % every == 0 && stop(model) {
            break;
        }
    }
    Ok(report)
}

fn global_norm(grads: &[Mat]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}
