//! From-scratch clipped-surrogate policy-gradient training: dense networks
//! with analytic backprop, GAE, rollout collection, and the update loop.

pub mod buffer;
pub mod gae;
pub mod net;
pub mod policy;
pub mod ppo;
pub mod train;

pub use buffer::{collect_rollout, RolloutBuffer};
pub use gae::gae;
pub use net::{Adam, DenseNet};
pub use policy::{GaussianPolicy, PolicySample};
pub use ppo::{
    normalize_advantages, policy_loss_and_grads, ppo_update, LossTerms, Minibatch, PpoConfig,
    PpoGrads, PpoOptimizer,
};
pub use train::{evaluate_policy, hash_configs, train, TrainOutcome, TrainStats};
