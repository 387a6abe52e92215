//! Clipped-surrogate policy optimization: loss, analytic gradients, and the
//! minibatch update loop.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::buffer::RolloutBuffer;
use crate::rl::gae::gae;
use crate::rl::net::{Adam, DenseNet};
use crate::rl::policy::GaussianPolicy;

/// Optimizer hyperparameters. Defaults follow the reference configuration
/// (horizon 2048, batch 64, γ 0.99, λ 0.95, clip 0.2, lr 3e-5, 10 epochs);
/// hidden sizes are desk-scale and configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub horizon: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            horizon: 2048,
            batch_size: 64,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            learning_rate: 3e-5,
            epochs: 10,
            value_coef: 0.5,
            entropy_coef: 0.0,
            policy_hidden: vec![64, 64],
            value_hidden: vec![64, 64],
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must be in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("gae_lambda must be in [0, 1]".into()));
        }
        if !(self.clip_range > 0.0) {
            return Err(Error::Config("clip_range must be positive".into()));
        }
        if self.horizon == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("horizon, batch_size and epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// One minibatch of flattened training data. Advantages must already be
/// normalized.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub observations: Vec<Vec<f64>>,
    pub raw_actions: Vec<Vec<f64>>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Gradients matching the trainable parameter groups.
#[derive(Debug, Clone)]
pub struct PpoGrads {
    pub mean_net: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value_net: Vec<f64>,
}

/// Normalize advantages in place to mean 0 and (sample) std 1.
pub fn normalize_advantages(advantages: &mut [f64]) {
    let n = advantages.len();
    if n < 2 {
        return;
    }
    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt() + 1e-8;
    for a in advantages {
        *a = (*a - mean) / std;
    }
}

/// Clipped-surrogate loss
/// L = -mean(min(ρA, clip(ρ, 1±ε)A)) + c_v·MSE(V, returns) - c_e·H
/// with analytic gradients for the policy mean network, the log-std vector,
/// and the value network.
pub fn policy_loss_and_grads(
    policy: &GaussianPolicy,
    value_net: &DenseNet,
    mb: &Minibatch,
    cfg: &PpoConfig,
) -> Result<(LossTerms, PpoGrads)> {
    let n = mb.observations.len();
    assert!(n > 0, "empty minibatch");
    let inv_n = 1.0 / n as f64;
    let clip_lo = 1.0 - cfg.clip_range;
    let clip_hi = 1.0 + cfg.clip_range;

    let mut grads = PpoGrads {
        mean_net: vec![0.0; policy.mean_net.params().len()],
        log_std: vec![0.0; policy.log_std.len()],
        value_net: vec![0.0; value_net.params().len()],
    };
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;

    for i in 0..n {
        let obs = &mb.observations[i];
        let raw = &mb.raw_actions[i];
        let adv = mb.advantages[i];

        let acts = policy.mean_net.forward_cached(obs);
        let mean = acts.last().unwrap().clone();
        let new_lp = policy.log_prob_raw(raw, &mean);
        let ratio = (new_lp - mb.old_log_probs[i]).exp();
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(clip_lo, clip_hi) * adv;

        // min() selects the pessimistic branch; gradient flows only through
        // the unclipped one (the clipped branch is constant in ρ when
        // active).
        let (surr, dl_dlp) = if unclipped <= clipped {
            (unclipped, -ratio * adv * inv_n)
        } else {
            (clipped, 0.0)
        };
        policy_loss -= surr * inv_n;

        if dl_dlp != 0.0 {
            let mut dl_dmean = vec![0.0; mean.len()];
            for j in 0..mean.len() {
                let sigma = policy.log_std[j].exp();
                let z = (raw[j] - mean[j]) / sigma;
                dl_dmean[j] = dl_dlp * (z / sigma);
                grads.log_std[j] += dl_dlp * (z * z - 1.0);
            }
            policy.mean_net.backward(&acts, &dl_dmean, &mut grads.mean_net);
        }

        let vacts = value_net.forward_cached(obs);
        let v = vacts.last().unwrap()[0];
        let err = v - mb.returns[i];
        value_loss += err * err * inv_n;
        let dl_dv = cfg.value_coef * 2.0 * err * inv_n;
        value_net.backward(&vacts, &[dl_dv], &mut grads.value_net);
    }

    let entropy = policy.entropy();
    for g in &mut grads.log_std {
        // d(-c_e·H)/d(log_std_j) = -c_e
        *g -= cfg.entropy_coef;
    }
    let total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy;

    if !total.is_finite() {
        return Err(Error::Training(format!(
            "non-finite loss: policy {policy_loss}, value {value_loss}, entropy {entropy}, \
             log_std {:?}",
            policy.log_std
        )));
    }
    Ok((LossTerms { policy_loss, value_loss, entropy, total }, grads))
}

/// Optimizer state for one policy/value pair.
pub struct PpoOptimizer {
    pub adam_mean: Adam,
    pub adam_log_std: Adam,
    pub adam_value: Adam,
}

impl PpoOptimizer {
    pub fn new(policy: &GaussianPolicy, value_net: &DenseNet) -> Self {
        PpoOptimizer {
            adam_mean: Adam::new(policy.mean_net.params().len()),
            adam_log_std: Adam::new(policy.log_std.len()),
            adam_value: Adam::new(value_net.params().len()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub mean_policy_loss: f64,
    pub mean_value_loss: f64,
    pub mean_entropy: f64,
    pub minibatches: usize,
}

/// One PPO update over a full rollout: GAE, then `epochs` passes of
/// shuffled minibatches with per-minibatch advantage normalization.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    value_net: &mut DenseNet,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    opt: &mut PpoOptimizer,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    cfg.validate()?;
    let (advantages, returns) = gae(
        &buffer.rewards,
        &buffer.values,
        &buffer.dones,
        buffer.bootstrap_value,
        cfg.gamma,
        cfg.gae_lambda,
    )?;

    let n = buffer.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();

    for _ in 0..cfg.epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(cfg.batch_size) {
            let mut mb = Minibatch {
                observations: chunk.iter().map(|&i| buffer.observations[i].clone()).collect(),
                raw_actions: chunk.iter().map(|&i| buffer.raw_actions[i].clone()).collect(),
                old_log_probs: chunk.iter().map(|&i| buffer.log_probs[i]).collect(),
                advantages: chunk.iter().map(|&i| advantages[i]).collect(),
                returns: chunk.iter().map(|&i| returns[i]).collect(),
            };
            normalize_advantages(&mut mb.advantages);
            let (loss, grads) = policy_loss_and_grads(policy, value_net, &mb, cfg)?;
            opt.adam_mean.step(policy.mean_net.params_mut(), &grads.mean_net, cfg.learning_rate);
            opt.adam_log_std.step(&mut policy.log_std, &grads.log_std, cfg.learning_rate);
            opt.adam_value.step(value_net.params_mut(), &grads.value_net, cfg.learning_rate);
            stats.mean_policy_loss += loss.policy_loss;
            stats.mean_value_loss += loss.value_loss;
            stats.mean_entropy += loss.entropy;
            stats.minibatches += 1;
        }
    }
    if stats.minibatches > 0 {
        let k = stats.minibatches as f64;
        stats.mean_policy_loss /= k;
        stats.mean_value_loss /= k;
        stats.mean_entropy /= k;
    }
    Ok(stats)
}

/// True if every trainable parameter is finite.
pub fn params_finite(policy: &GaussianPolicy, value_net: &DenseNet) -> bool {
    policy.mean_net.params().iter().all(|p| p.is_finite())
        && policy.log_std.iter().all(|p| p.is_finite())
        && value_net.params().iter().all(|p| p.is_finite())
}
