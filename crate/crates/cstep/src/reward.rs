//! Navigation reward and the multiplicative empowered reward.

use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

/// Reward configuration. The safety coefficient `c` carries units of 1/m²
/// because it multiplies an area inside a logarithm; rescaling the map
/// rescales the `c` needed for the same behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub safety_coefficient: f64,
    pub volume_floor: f64,
    pub goal_position: Vec2,
    pub empowered: bool,
}

impl RewardConfig {
    pub fn plain(goal_position: Vec2) -> Self {
        RewardConfig {
            safety_coefficient: 1.0,
            volume_floor: 1e-4,
            goal_position,
            empowered: false,
        }
    }
}

/// Standard navigation reward exp(-‖p − goal‖₂), in (0, 1].
pub fn nav_reward(p: Vec2, goal: Vec2) -> f64 {
    (-(p - goal).norm()).exp()
}

/// Empowered reward r_d · log(c · max(free_area, ε)). Negative values are
/// kept: the sign encodes whether the free reachable volume exceeds 1/c.
pub fn empowered_reward(r_d: f64, free_area: f64, cfg: &RewardConfig) -> f64 {
    let floored = free_area.max(cfg.volume_floor);
    r_d * (cfg.safety_coefficient * floored).ln()
}
