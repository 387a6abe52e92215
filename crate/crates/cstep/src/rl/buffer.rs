//! Rollout storage and collection.

use rand_chacha::ChaCha8Rng;

use crate::envs::NavEnv;
use crate::error::Result;
use crate::rl::net::DenseNet;
use crate::rl::policy::GaussianPolicy;

/// Fixed-capacity on-policy rollout buffer.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub observations: Vec<Vec<f64>>,
    pub raw_actions: Vec<Vec<f64>>,
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value estimate for the state after the last stored step; zero when
    /// that step ended an episode.
    pub bootstrap_value: f64,
    /// Episode fragments the buffer spans (resets performed + the partial
    /// episode it started in).
    pub fragments: usize,
    /// Total rewards of episodes that finished inside this rollout.
    pub finished_episode_rewards: Vec<f64>,
    pub finished_episode_lengths: Vec<usize>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Run the policy for exactly `horizon` steps, resetting the environment
/// whenever an episode ends. Log-probabilities are stored under the acting
/// policy together with the mean/std that produced each action.
pub fn collect_rollout(
    env: &mut NavEnv,
    policy: &GaussianPolicy,
    value_net: &DenseNet,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutBuffer> {
    let mut buf = RolloutBuffer::default();
    let mut obs = if env.is_terminated() {
        buf.fragments += 1;
        env.reset(rng)?.flatten()
    } else {
        env.observe().flatten()
    };
    let mut episode_reward = 0.0;
    let mut episode_len = 0usize;

    for _ in 0..horizon {
        let sample = policy.sample(&obs, rng);
        let value = value_net.forward(&obs)[0];
        let step = env.step(sample.action)?;
        episode_reward += step.reward;
        episode_len += 1;

        buf.observations.push(obs);
        buf.raw_actions.push(sample.raw);
        buf.means.push(sample.mean);
        buf.stds.push(sample.std);
        buf.log_probs.push(sample.log_prob);
        buf.rewards.push(step.reward);
        buf.values.push(value);
        buf.dones.push(step.terminated);

        if step.terminated {
            buf.finished_episode_rewards.push(episode_reward);
            buf.finished_episode_lengths.push(episode_len);
            episode_reward = 0.0;
            episode_len = 0;
            buf.fragments += 1;
            obs = env.reset(rng)?.flatten();
        } else {
            obs = step.observation.flatten();
        }
    }

    buf.bootstrap_value =
        if *buf.dones.last().unwrap_or(&false) { 0.0 } else { value_net.forward(&obs)[0] };
    Ok(buf)
}
