//! Diagonal Gaussian policy with tanh squashing onto the control box.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemSpec;
use crate::rl::net::DenseNet;
use crate::vec2::Vec2;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7; // 0.5 * ln(2π)

/// Stochastic policy: a dense network outputs the Gaussian mean in raw
/// (pre-squash) space, a learned global log-std sets exploration, and
/// actions are squashed into the control box by a scaled tanh. Log
/// probabilities carry the tanh change-of-variables correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean_net: DenseNet,
    pub log_std: Vec<f64>,
    pub action_center: Vec<f64>,
    pub action_scale: Vec<f64>,
}

/// One action draw with everything needed to recompute its density.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    pub raw: Vec<f64>,
    pub action: Vec2,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub log_prob: f64,
}

impl GaussianPolicy {
    pub fn new<R: Rng>(obs_dim: usize, hidden: &[usize], spec: &SystemSpec, rng: &mut R) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2);
        let mut center = Vec::with_capacity(2);
        let mut scale = Vec::with_capacity(2);
        for [lo, hi] in spec.control_bounds {
            center.push((hi + lo) / 2.0);
            scale.push((hi - lo) / 2.0);
        }
        GaussianPolicy {
            mean_net: DenseNet::new(&sizes, 0.01, rng),
            log_std: vec![0.0; 2],
            action_center: center,
            action_scale: scale,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn squash(&self, raw: &[f64]) -> Vec2 {
        Vec2::new(
            self.action_center[0] + self.action_scale[0] * raw[0].tanh(),
            self.action_center[1] + self.action_scale[1] * raw[1].tanh(),
        )
    }

    pub fn sample<R: Rng>(&self, obs: &[f64], rng: &mut R) -> PolicySample {
        let mean = self.mean_net.forward(obs);
        let std: Vec<f64> = self.log_std.iter().map(|l| l.exp()).collect();
        let raw: Vec<f64> = mean
            .iter()
            .zip(&std)
            .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let log_prob = self.log_prob_raw(&raw, &mean);
        PolicySample { action: self.squash(&raw), raw, mean, std, log_prob }
    }

    /// Mean action squashed into the control box; used for evaluation.
    pub fn deterministic_action(&self, obs: &[f64]) -> Vec2 {
        self.squash(&self.mean_net.forward(obs))
    }

    /// Log-density of a stored raw action under the current mean for the
    /// observation, including the squash correction.
    pub fn log_prob_raw(&self, raw: &[f64], mean: &[f64]) -> f64 {
        let mut lp = 0.0;
        for j in 0..raw.len() {
            let z = (raw[j] - mean[j]) / self.log_std[j].exp();
            lp += -0.5 * z * z - self.log_std[j] - HALF_LN_TAU;
            lp -= self.action_scale[j].ln() + ln_one_minus_tanh_sq(raw[j]);
        }
        lp
    }

    /// Same density evaluated from explicit mean/std (e.g. the values a
    /// rollout buffer stored when the action was taken).
    pub fn log_prob_under(raw: &[f64], mean: &[f64], std: &[f64], scale: &[f64]) -> f64 {
        let mut lp = 0.0;
        for j in 0..raw.len() {
            let z = (raw[j] - mean[j]) / std[j];
            lp += -0.5 * z * z - std[j].ln() - HALF_LN_TAU;
            lp -= scale[j].ln() + ln_one_minus_tanh_sq(raw[j]);
        }
        lp
    }

    /// Entropy of the underlying Gaussian (the squash correction has no
    /// closed form; the base entropy is the standard surrogate).
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|l| l + 0.5 + HALF_LN_TAU).sum()
    }

    pub fn param_count(&self) -> usize {
        self.mean_net.params().len() + self.log_std.len()
    }
}

/// Numerically stable ln(1 - tanh(x)²) = 2(ln 2 - x - softplus(-2x)).
pub fn ln_one_minus_tanh_sq(x: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - x - softplus(-2.0 * x))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}
