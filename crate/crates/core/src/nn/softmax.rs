use rand::Rng;

use crate::error::{Result, SimError};
use crate::game::Mask;

/// Softmax over the allowed entries; masked entries get exactly zero.
pub fn masked_softmax(logits: &[f64], mask: Mask) -> Vec<f64> {
    let max = mask
        .allowed()
        .map(|i| logits[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; logits.len()];
    let mut total = 0.0;
    for i in mask.allowed() {
        let e = (logits[i] - max).exp();
        probs[i] = e;
        total += e;
    }
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Log-probabilities over the allowed entries; masked entries are `-inf`.
pub fn masked_log_softmax(logits: &[f64], mask: Mask) -> Vec<f64> {
    let max = mask
        .allowed()
        .map(|i| logits[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let log_total = mask
        .allowed()
        .map(|i| (logits[i] - max).exp())
        .sum::<f64>()
        .ln();
    (0..logits.len())
        .map(|i| {
            if mask.allows(i) {
                logits[i] - max - log_total
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Draws an index from the masked softmax and returns it with its
/// log-probability.
pub fn masked_softmax_sample<R: Rng + ?Sized>(
    logits: &[f64],
    mask: Mask,
    rng: &mut R,
) -> Result<(usize, f64)> {
    if mask.count_allowed() == 0 {
        return Err(SimError::Sampling("every entry is masked".into()));
    }
    let probs = masked_softmax(logits, mask);
    let log_probs = masked_log_softmax(logits, mask);
    let mut target = rng.random::<f64>();
    let mut chosen = None;
    for i in mask.allowed() {
        chosen = Some(i);
        if target < probs[i] {
            break;
        }
        target -= probs[i];
    }
    let index = chosen.expect("at least one allowed entry");
    Ok((index, log_probs[index]))
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}
