//! Clipped-surrogate PPO for single-step episodes.
//!
//! Every decision's return is the episode's terminal reward, so the
//! advantage is `reward - old_value` and no discounting is involved.

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::softmax::{entropy, masked_softmax};
use super::tensor::Parameters;
use crate::error::NumericError;
use crate::game::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip: f64,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Rescale the full gradient to at most this L2 norm.
    pub max_grad_norm: Option<f64>,
    /// Standardize advantages within each head before the update.
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip: 0.2,
            epochs: 4,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: None,
            normalize_advantages: true,
        }
    }
}

/// One buffered decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Model-defined head id; losses are averaged within each head.
    pub head: usize,
    pub context: usize,
    pub mask: Mask,
    pub action: usize,
    pub old_log_prob: f64,
    pub old_value: f64,
    pub reward: f64,
}

/// Output of an [`ActorCritic`] forward pass over a batch.
pub struct Evaluation<T> {
    pub logits: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub tape: T,
}

/// A policy/value model trainable by [`ppo_update`].
pub trait ActorCritic {
    type Params: Parameters + Clone;
    type Tape;

    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;

    /// Logits and value estimate for each transition, under the current
    /// parameters.
    fn forward(&self, batch: &[Transition]) -> Result<Evaluation<Self::Tape>, NumericError>;

    /// Parameter gradient of `Σ_t dlogits_t · logits_t + dvalues_t · value_t`.
    fn backward(
        &self,
        batch: &[Transition],
        eval: &Evaluation<Self::Tape>,
        dlogits: &[Vec<f64>],
        dvalues: &[f64],
    ) -> Self::Params;
}

/// `min(ρA, clip(ρ, 1-ε, 1+ε)A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    (ratio * advantage).min(clipped * advantage)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio was clipped.
    pub clip_fraction: f64,
}

/// Runs `config.epochs` full-batch epochs of clipped PPO, one Adam step per
/// epoch, and returns the losses measured at the start of each epoch.
pub fn ppo_update<M: ActorCritic>(
    model: &mut M,
    batch: &[Transition],
    config: &PpoConfig,
    optimizer: &mut AdamState,
) -> Result<Vec<EpochLoss>, NumericError> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let heads = batch.iter().map(|t| t.head).max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; heads];
    for t in batch {
        counts[t.head] += 1;
    }

    let mut advantages: Vec<f64> = batch.iter().map(|t| t.reward - t.old_value).collect();
    if config.normalize_advantages {
        let mut sum = vec![0.0; heads];
        let mut sq = vec![0.0; heads];
        for (t, a) in batch.iter().zip(&advantages) {
            sum[t.head] += a;
            sq[t.head] += a * a;
        }
        for (t, a) in batch.iter().zip(advantages.iter_mut()) {
            let n = counts[t.head] as f64;
            let mean = sum[t.head] / n;
            let std = (sq[t.head] / n - mean * mean).max(0.0).sqrt();
            *a = (*a - mean) / (std + 1e-8);
        }
    }

    let mut stats = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let eval = model.forward(batch)?;
        let mut loss = EpochLoss::default();
        let mut clipped = 0usize;
        let mut dlogits = Vec::with_capacity(batch.len());
        let mut dvalues = Vec::with_capacity(batch.len());

        for (i, t) in batch.iter().enumerate() {
            let scale = 1.0 / counts[t.head] as f64;
            let probs = masked_softmax(&eval.logits[i], t.mask);
            let log_prob = probs[t.action].ln();
            let ratio = (log_prob - t.old_log_prob).exp();
            let advantage = advantages[i];
            let unclipped = ratio * advantage;
            let objective = clipped_objective(ratio, advantage, config.clip);
            loss.policy -= objective * scale;

            // d(-objective)/d(log_prob); zero where the clipped branch binds.
            let g_logp = if unclipped <= objective {
                -ratio * advantage * scale
            } else {
                clipped += 1;
                0.0
            };
            let h = entropy(&probs);
            loss.entropy += h * scale;
            let mut d = vec![0.0; probs.len()];
            for j in t.mask.allowed() {
                let onehot = if j == t.action { 1.0 } else { 0.0 };
                d[j] = g_logp * (onehot - probs[j]);
                if config.entropy_coef != 0.0 && probs[j] > 0.0 {
                    // -c * dH/dz_j = c * p_j (ln p_j + H)
                    d[j] += config.entropy_coef * scale * probs[j] * (probs[j].ln() + h);
                }
            }
            dlogits.push(d);

            let err = eval.values[i] - t.reward;
            loss.value += config.value_coef * err * err * scale;
            dvalues.push(2.0 * config.value_coef * err * scale);
        }
        loss.clip_fraction = clipped as f64 / batch.len() as f64;
        let total = loss.policy + loss.value - config.entropy_coef * loss.entropy;
        if !total.is_finite() {
            return Err(NumericError::NonFiniteLoss { epoch });
        }

        let mut grads = model.backward(batch, &eval, &dlogits, &dvalues);
        if let Some(max_norm) = config.max_grad_norm {
            let norm = grads
                .tensors()
                .iter()
                .map(|t| t.squared_norm())
                .sum::<f64>()
                .sqrt();
            if norm > max_norm {
                let s = max_norm / norm;
                for t in grads.tensors_mut() {
                    t.data_mut().iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        optimizer.apply(model.params_mut().tensors_mut(), grads.tensors())?;
        stats.push(loss);
    }
    Ok(stats)
}
