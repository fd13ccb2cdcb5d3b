use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, Parameters, Tensor};
use crate::error::NumericError;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Affine map `y = W x + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let data = (0..input * output)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Linear {
            weight: Tensor::from_vec(&[output, input], data).expect("shape"),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn input_width(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_width(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let (rows, out) = (x.rows(), self.output_width());
        let mut y = Tensor::zeros(&[rows, out]);
        let bias = self.bias.data();
        for r in 0..rows {
            let xr = x.row(r);
            let yr = y.row_mut(r);
            for (o, yo) in yr.iter_mut().enumerate() {
                *yo = bias[o] + dot(self.weight.row(o), xr);
            }
        }
        y
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward(&self, x: &Tensor, dy: &Tensor, grads: &mut Linear) -> Tensor {
        let rows = x.rows();
        let mut dx = Tensor::zeros(&[rows, self.input_width()]);
        for r in 0..rows {
            let xr = x.row(r);
            let dyr = dy.row(r);
            let dxr = dx.row_mut(r);
            for (o, &g) in dyr.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                axpy(g, self.weight.row(o), dxr);
                axpy(g, xr, grads.weight.row_mut(o));
                grads.bias.data_mut()[o] += g;
            }
        }
        dx
    }
}

impl Parameters for Linear {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Per-row normalization with learned gain and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gain: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Tensor,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(width: usize) -> Self {
        LayerNorm {
            gain: Tensor::filled(&[width], 1.0),
            bias: Tensor::zeros(&[width]),
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LayerNormCache) {
        let (rows, width) = (x.rows(), x.cols());
        let mut y = Tensor::zeros(&[rows, width]);
        let mut normalized = Tensor::zeros(&[rows, width]);
        let mut inv_std = Vec::with_capacity(rows);
        let (gain, bias) = (self.gain.data(), self.bias.data());
        for r in 0..rows {
            let xr = x.row(r);
            let mean = xr.iter().sum::<f64>() / width as f64;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(s);
            let nr = normalized.row_mut(r);
            for (ni, &xi) in nr.iter_mut().zip(xr) {
                *ni = (xi - mean) * s;
            }
            let nr = normalized.row(r);
            for (i, yi) in y.row_mut(r).iter_mut().enumerate() {
                *yi = gain[i] * nr[i] + bias[i];
            }
        }
        (y, LayerNormCache { normalized, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, dy: &Tensor, grads: &mut LayerNorm) -> Tensor {
        let (rows, width) = (dy.rows(), dy.cols());
        let mut dx = Tensor::zeros(&[rows, width]);
        let gain = self.gain.data();
        let mut dnorm = vec![0.0; width];
        for r in 0..rows {
            let nr = cache.normalized.row(r);
            let dyr = dy.row(r);
            {
                let gg = grads.gain.data_mut();
                for i in 0..width {
                    gg[i] += dyr[i] * nr[i];
                }
            }
            axpy(1.0, dyr, grads.bias.data_mut());
            for i in 0..width {
                dnorm[i] = dyr[i] * gain[i];
            }
            let mean_d = dnorm.iter().sum::<f64>() / width as f64;
            let mean_dn = dot(&dnorm, nr) / width as f64;
            let s = cache.inv_std[r];
            for (i, dxi) in dx.row_mut(r).iter_mut().enumerate() {
                *dxi = s * (dnorm[i] - mean_d - nr[i] * mean_dn);
            }
        }
        dx
    }
}

impl Parameters for LayerNorm {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.gain, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.gain, &mut self.bias]
    }
}

/// Stack of `Linear -> LayerNorm -> tanh` stages with an optional plain
/// linear head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpBlock {
    pub stages: Vec<(Linear, LayerNorm)>,
    pub head: Option<Linear>,
}

/// Intermediates recorded by [`MlpBlock::forward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `inputs[s]` feeds stage `s`; the last entry feeds the head.
    inputs: Vec<Tensor>,
    norms: Vec<LayerNormCache>,
}

impl MlpBlock {
    /// `depth` hidden stages of `width`, plus a head to `head_out` outputs
    /// when given. A zero head starts every output at exactly zero.
    pub fn new<R: Rng + ?Sized>(
        width: usize,
        depth: usize,
        head_out: Option<usize>,
        zero_head: bool,
        rng: &mut R,
    ) -> Self {
        let stages = (0..depth)
            .map(|_| (Linear::new(width, width, rng), LayerNorm::new(width)))
            .collect();
        let head = head_out.map(|out| {
            if zero_head {
                Linear::zeros(width, out)
            } else {
                Linear::new(width, out, rng)
            }
        });
        MlpBlock { stages, head }
    }

    pub fn output_width(&self) -> usize {
        match &self.head {
            Some(h) => h.output_width(),
            None => self.stages.last().map_or(0, |(l, _)| l.output_width()),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, MlpCache), NumericError> {
        let mut inputs = Vec::with_capacity(self.stages.len() + 1);
        let mut norms = Vec::with_capacity(self.stages.len());
        let mut h = x.clone();
        for (stage, (linear, norm)) in self.stages.iter().enumerate() {
            let z = linear.forward(&h);
            let (mut y, cache) = norm.forward(&z);
            y.data_mut().iter_mut().for_each(|v| *v = v.tanh());
            if !y.is_finite() {
                return Err(NumericError::NonFinite { module: "mlp", stage });
            }
            inputs.push(h);
            norms.push(cache);
            h = y;
        }
        let out = match &self.head {
            Some(head) => {
                let out = head.forward(&h);
                if !out.is_finite() {
                    return Err(NumericError::NonFinite {
                        module: "mlp head",
                        stage: self.stages.len(),
                    });
                }
                inputs.push(h);
                out
            }
            None => {
                inputs.push(h.clone());
                h
            }
        };
        Ok((out, MlpCache { inputs, norms }))
    }

    /// Backpropagates `dout` through the block recorded in `cache`,
    /// accumulating into `grads`, and returns the input gradient.
    pub fn backward(&self, cache: &MlpCache, dout: &Tensor, grads: &mut MlpBlock) -> Tensor {
        let depth = self.stages.len();
        let mut d = match (&self.head, &mut grads.head) {
            (Some(head), Some(gh)) => head.backward(&cache.inputs[depth], dout, gh),
            _ => dout.clone(),
        };
        for s in (0..depth).rev() {
            // Output of stage s is the input of stage s + 1.
            let y = &cache.inputs[s + 1];
            for (di, yi) in d.data_mut().iter_mut().zip(y.data()) {
                *di *= 1.0 - yi * yi;
            }
            let (linear, norm) = &self.stages[s];
            let (glinear, gnorm) = &mut grads.stages[s];
            let dz = norm.backward(&cache.norms[s], &d, gnorm);
            d = linear.backward(&cache.inputs[s], &dz, glinear);
        }
        d
    }
}

impl Parameters for MlpBlock {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for (l, n) in &self.stages {
            out.extend(l.tensors());
            out.extend(n.tensors());
        }
        if let Some(h) = &self.head {
            out.extend(h.tensors());
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for (l, n) in &mut self.stages {
            out.extend(l.tensors_mut());
            out.extend(n.tensors_mut());
        }
        if let Some(h) = &mut self.head {
            out.extend(h.tensors_mut());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn zero_block_maps_to_zero() {
        let mut rng = stream(1, Stream::Init);
        let mut block = MlpBlock::new(16, 5, Some(3), false, &mut rng);
        for t in block.tensors_mut() {
            t.fill(0.0);
        }
        let x = Tensor::filled(&[2, 16], 0.7);
        let (y, _) = block.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn layer_norm_of_constant_row_is_bias() {
        let ln = LayerNorm::new(8);
        let (y, _) = ln.forward(&Tensor::filled(&[1, 8], 3.0));
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_weight_gradient_is_input() {
        // L = w . x  =>  dL/dw = x
        let lin = Linear {
            weight: Tensor::from_vec(&[1, 3], vec![0.3, -0.2, 0.5]).unwrap(),
            bias: Tensor::zeros(&[1]),
        };
        let x = Tensor::from_vec(&[1, 3], vec![1.0, 2.0, -4.0]).unwrap();
        let mut g = lin.zeroed();
        let dx = lin.backward(&x, &Tensor::filled(&[1, 1], 1.0), &mut g);
        assert_eq!(g.weight.data(), x.data());
        assert_eq!(g.bias.data(), &[1.0]);
        assert_eq!(dx.data(), lin.weight.data());
    }

    #[test]
    fn non_finite_input_reports_stage() {
        let mut rng = stream(1, Stream::Init);
        let block = MlpBlock::new(4, 2, None, false, &mut rng);
        let x = Tensor::filled(&[1, 4], f64::NAN);
        let err = block.forward(&x).unwrap_err();
        assert_eq!(err, NumericError::NonFinite { module: "mlp", stage: 0 });
    }
}
