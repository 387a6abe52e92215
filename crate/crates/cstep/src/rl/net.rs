//! Small dense networks with tanh hidden layers, analytic backprop, and an
//! Adam optimizer over the flat parameter vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LayerShape {
    w_offset: usize,
    b_offset: usize,
    in_dim: usize,
    out_dim: usize,
}

/// Fully connected network. Parameters live in one flat vector, layer-major
/// (weights row-major, then biases), which keeps optimizer state, gradient
/// checks, and snapshot serialization simple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    sizes: Vec<usize>,
    shapes: Vec<LayerShape>,
    params: Vec<f64>,
}

impl DenseNet {
    /// Xavier-uniform initialization; the final layer is scaled by
    /// `final_scale` (small for policy means, 1.0 for value heads).
    pub fn new<R: Rng>(sizes: &[usize], final_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let shapes = Self::shapes_for(sizes);
        let count = Self::param_count_for(sizes);
        let mut params = vec![0.0; count];
        let n_layers = sizes.len() - 1;
        for (li, s) in shapes.iter().enumerate() {
            let limit = (6.0 / (s.in_dim + s.out_dim) as f64).sqrt();
            let scale = if li + 1 == n_layers { final_scale } else { 1.0 };
            for w in &mut params[s.w_offset..s.w_offset + s.in_dim * s.out_dim] {
                *w = scale * rng.gen_range(-limit..=limit);
            }
        }
        DenseNet { sizes: sizes.to_vec(), shapes, params }
    }

    /// Rebuild a network from its layer sizes and flat parameter vector.
    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        if sizes.len() < 2 || params.len() != Self::param_count_for(sizes) {
            return None;
        }
        Some(DenseNet { sizes: sizes.to_vec(), shapes: Self::shapes_for(sizes), params })
    }

    fn shapes_for(sizes: &[usize]) -> Vec<LayerShape> {
        let mut shapes = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (in_dim, out_dim) = (w[0], w[1]);
            shapes.push(LayerShape { w_offset: offset, b_offset: offset + in_dim * out_dim, in_dim, out_dim });
            offset += in_dim * out_dim + out_dim;
        }
        shapes
    }

    pub fn param_count_for(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.input_dim());
        let n_layers = self.shapes.len();
        let mut act = input.to_vec();
        for (li, s) in self.shapes.iter().enumerate() {
            act = self.layer_forward(s, &act, li + 1 < n_layers);
        }
        act
    }

    /// Forward pass keeping every post-activation vector for backprop.
    /// `acts[0]` is the input; `acts[k + 1]` is the output of layer `k`.
    pub fn forward_cached(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.shapes.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_vec());
        for (li, s) in self.shapes.iter().enumerate() {
            let out = self.layer_forward(s, acts.last().unwrap(), li + 1 < n_layers);
            acts.push(out);
        }
        acts
    }

    fn layer_forward(&self, s: &LayerShape, input: &[f64], hidden: bool) -> Vec<f64> {
        let mut out = Vec::with_capacity(s.out_dim);
        for o in 0..s.out_dim {
            let row = &self.params[s.w_offset + o * s.in_dim..s.w_offset + (o + 1) * s.in_dim];
            let mut z = self.params[s.b_offset + o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            out.push(if hidden { z.tanh() } else { z });
        }
        out
    }

    /// Accumulate parameter gradients for d(loss)/d(output) into `grads`
    /// (same layout as `params`), given cached activations.
    pub fn backward(&self, acts: &[Vec<f64>], dl_dout: &[f64], grads: &mut [f64]) {
        debug_assert_eq!(grads.len(), self.params.len());
        let mut delta = dl_dout.to_vec();
        for (k, s) in self.shapes.iter().enumerate().rev() {
            let input = &acts[k];
            for o in 0..s.out_dim {
                let d = delta[o];
                let grow = &mut grads[s.w_offset + o * s.in_dim..s.w_offset + (o + 1) * s.in_dim];
                for (g, x) in grow.iter_mut().zip(input) {
                    *g += d * x;
                }
                grads[s.b_offset + o] += d;
            }
            if k > 0 {
                let mut prev = vec![0.0; s.in_dim];
                for o in 0..s.out_dim {
                    let d = delta[o];
                    let row =
                        &self.params[s.w_offset + o * s.in_dim..s.w_offset + (o + 1) * s.in_dim];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                // Through the tanh of the previous layer's output.
                for (p, a) in prev.iter_mut().zip(&acts[k]) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }
}

/// Adam state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Adam { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
