use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::NumericError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam with one pair of moment tensors per parameter
/// tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|t| Tensor::zeros(t.shape())).collect();
        AdamState {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.first, &self.second)
    }

    pub fn apply(&mut self, params: Vec<&mut Tensor>, grads: Vec<&Tensor>) -> Result<(), NumericError> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(NumericError::Shape {
                expected: vec![self.first.len()],
                actual: vec![params.len(), grads.len()],
            });
        }
        for ((p, g), m) in params.iter().zip(&grads).zip(&self.first) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(NumericError::Shape {
                    expected: m.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            let (pd, gd) = (p.data_mut(), g.data());
            let (md, vd) = (m.data_mut(), v.data_mut());
            for i in 0..pd.len() {
                let gi = gd[i];
                md[i] = beta1 * md[i] + (1.0 - beta1) * gi;
                vd[i] = beta2 * vd[i] + (1.0 - beta2) * gi * gi;
                let m_hat = md[i] / c1;
                let v_hat = vd[i] / c2;
                pd[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(&[1], vec![v]).unwrap()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = scalar(0.0);
        let g = scalar(1.0);
        let mut adam = AdamState::new(AdamConfig::default(), &[&w]);
        adam.apply(vec![&mut w], vec![&g]).unwrap();
        // m_hat = v_hat = 1
        assert!((w.data()[0] + 0.002 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut w = scalar(0.25);
        let g = scalar(0.0);
        let mut adam = AdamState::new(AdamConfig::default(), &[&w]);
        adam.apply(vec![&mut w], vec![&g]).unwrap();
        assert_eq!(w.data()[0], 0.25);
    }

    #[test]
    fn two_steps_follow_recurrence() {
        let cfg = AdamConfig::default();
        let mut w = scalar(0.0);
        let g = scalar(1.0);
        let mut adam = AdamState::new(cfg, &[&w]);
        adam.apply(vec![&mut w], vec![&g]).unwrap();
        adam.apply(vec![&mut w], vec![&g]).unwrap();

        let (mut x, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            m = 0.9 * m + 0.1;
            v = 0.999 * v + 0.001;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.002 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((w.data()[0] - x).abs() < 1e-10);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut w = scalar(0.0);
        let g = Tensor::zeros(&[2]);
        let mut adam = AdamState::new(AdamConfig::default(), &[&w]);
        assert!(adam.apply(vec![&mut w], vec![&g]).is_err());
        assert_eq!(adam.step, 0);
    }
}
