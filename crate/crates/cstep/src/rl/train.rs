//! Collect/update training loop with periodic deterministic evaluation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{EnvConfig, NavEnv, TerminationReason};
use crate::error::Result;
use crate::rl::buffer::collect_rollout;
use crate::rl::net::DenseNet;
use crate::rl::policy::GaussianPolicy;
use crate::rl::ppo::{params_finite, ppo_update, PpoConfig, PpoOptimizer};
use crate::rng::substream;
use crate::snapshot::PolicySnapshot;

/// One stats row, emitted at each periodic evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub steps: usize,
    pub mean_episode_reward: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub mean_episode_len: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub snapshot: PolicySnapshot,
    pub stats: Vec<TrainStats>,
    pub updates: usize,
    /// True when an update produced non-finite parameters; the snapshot is
    /// the last good one.
    pub diverged: bool,
}

/// Train a fresh policy on the environment for `total_steps` environment
/// steps, evaluating the deterministic policy every `eval_every` steps with
/// `eval_episodes` episodes. Everything is keyed off `seed`: identical seeds
/// give identical parameter trajectories and stats.
pub fn train(
    env_config: &EnvConfig,
    ppo_config: &PpoConfig,
    seed: u64,
    total_steps: usize,
    eval_every: usize,
    eval_episodes: usize,
) -> Result<TrainOutcome> {
    env_config.validate()?;
    ppo_config.validate()?;
    if total_steps < ppo_config.horizon {
        return Err(crate::error::Error::Config(format!(
            "total_steps ({total_steps}) must be at least one horizon ({})",
            ppo_config.horizon
        )));
    }

    let obs_dim = env_config.observation_dim();
    let mut policy = GaussianPolicy::new(
        obs_dim,
        &ppo_config.policy_hidden,
        &env_config.system,
        &mut substream(seed, 1),
    );
    let mut value_sizes = vec![obs_dim];
    value_sizes.extend_from_slice(&ppo_config.value_hidden);
    value_sizes.push(1);
    let mut value_net = DenseNet::new(&value_sizes, 1.0, &mut substream(seed, 2));
    let mut opt = PpoOptimizer::new(&policy, &value_net);

    let mut env = NavEnv::new(env_config.clone())?;
    let mut rollout_rng = substream(seed, 3);
    let mut shuffle_rng = substream(seed, 4);

    let mut stats = Vec::new();
    let mut steps_done = 0usize;
    let mut updates = 0usize;
    let mut diverged = false;
    let mut next_eval = eval_every.max(1);
    let mut eval_round = 0u64;

    while steps_done < total_steps {
        let buffer =
            collect_rollout(&mut env, &policy, &value_net, ppo_config.horizon, &mut rollout_rng)?;
        steps_done += buffer.len();

        let backup = (policy.clone(), value_net.clone());
        let update = ppo_update(
            &mut policy,
            &mut value_net,
            &buffer,
            ppo_config,
            &mut opt,
            &mut shuffle_rng,
        )?;
        if !params_finite(&policy, &value_net) {
            log::warn!("non-finite parameters after update {updates}; reverting and stopping");
            policy = backup.0;
            value_net = backup.1;
            diverged = true;
        } else {
            updates += 1;
        }

        let done = steps_done >= total_steps || diverged;
        if steps_done >= next_eval || done {
            let mut row = evaluate_policy(
                env_config,
                &policy,
                eval_episodes,
                substream_seed(seed, eval_round),
            )?;
            eval_round += 1;
            row.steps = steps_done;
            row.policy_loss = update.mean_policy_loss;
            row.value_loss = update.mean_value_loss;
            stats.push(row);
            while next_eval <= steps_done {
                next_eval += eval_every.max(1);
            }
        }
        if diverged {
            break;
        }
    }

    let config_hash = hash_configs(env_config, ppo_config);
    let snapshot = PolicySnapshot::new(policy, value_net, config_hash, seed);
    Ok(TrainOutcome { snapshot, stats, updates, diverged })
}

fn substream_seed(seed: u64, round: u64) -> u64 {
    // Distinct seed family for evaluation episodes, away from the training
    // substreams.
    seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(round + 1))
}

/// Deterministic-policy evaluation: fresh environments, no exploration
/// noise. Rewards are the environment's own (empowered when configured).
pub fn evaluate_policy(
    env_config: &EnvConfig,
    policy: &GaussianPolicy,
    episodes: usize,
    seed: u64,
) -> Result<TrainStats> {
    let mut env = NavEnv::new(env_config.clone())?;
    let mut total_reward = 0.0;
    let mut total_len = 0usize;
    let mut successes = 0usize;
    let mut collisions = 0usize;
    let mut timeouts = 0usize;
    for ep in 0..episodes {
        let mut rng = substream(seed, ep as u64);
        let mut obs = env.reset(&mut rng)?.flatten();
        loop {
            let action = policy.deterministic_action(&obs);
            let step = env.step(action)?;
            total_reward += step.reward;
            total_len += 1;
            if step.terminated {
                match step.termination_reason {
                    TerminationReason::GoalReached => successes += 1,
                    TerminationReason::Collision => collisions += 1,
                    TerminationReason::Timeout => timeouts += 1,
                    TerminationReason::None => unreachable!("terminated without reason"),
                }
                break;
            }
            obs = step.observation.flatten();
        }
    }
    let n = episodes.max(1) as f64;
    Ok(TrainStats {
        steps: 0,
        mean_episode_reward: total_reward / n,
        success_rate: successes as f64 / n,
        collision_rate: collisions as f64 / n,
        timeout_rate: timeouts as f64 / n,
        mean_episode_len: total_len as f64 / n,
        policy_loss: 0.0,
        value_loss: 0.0,
    })
}

/// Hash of the full training configuration, stored in snapshots so an
/// evaluation can tell which setup produced a policy.
pub fn hash_configs(env_config: &EnvConfig, ppo_config: &PpoConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(env_config).expect("env config serializes"));
    hasher.update(serde_json::to_vec(ppo_config).expect("ppo config serializes"));
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
