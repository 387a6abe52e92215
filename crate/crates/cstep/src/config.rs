//! JSON run configuration: a single document with sections
//! {system, map, reward, empowerment, ppo, eval}. Unknown keys are hard
//! errors to guard against silent typos in safety-critical parameters.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{default_horizon, SamplingMode, SystemKind, SystemSpec};
use crate::empowerment::EmpowermentParams;
use crate::envs::{EnvConfig, MapSource};
use crate::error::{Error, Result};
use crate::eval::EvalSettings;
use crate::reward::RewardConfig;
use crate::rl::ppo::PpoConfig;
use crate::vec2::Vec2;
use crate::world::{point_maze_map, CorridorTemplate, LidarConfig, WorldMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: SystemSection,
    pub map: MapSection,
    #[serde(default)]
    pub reward: RewardSection,
    #[serde(default)]
    pub empowerment: EmpowermentSection,
    #[serde(default)]
    pub ppo: PpoSection,
    #[serde(default)]
    pub eval: EvalSection,
}

/// The controlled plant plus its discrete control interface timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub kind: SystemKind,
    #[serde(default = "d_one")]
    pub mass: f64,
    #[serde(default = "d_damping")]
    pub linear_damping: f64,
    #[serde(default = "d_two")]
    pub v_max: f64,
    #[serde(default = "d_two")]
    pub a_max: f64,
    #[serde(default = "d_bounds")]
    pub control_bounds: [[f64; 2]; 2],
    #[serde(default)]
    pub control_norm_bound: Option<f64>,
    #[serde(default = "d_control_dt")]
    pub control_dt: f64,
    #[serde(default = "d_substeps")]
    pub rk4_substeps: usize,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    PointMaze,
    Corridor,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub kind: MapKind,
    /// Agent radius for the built-in maze; corridor templates and fixed
    /// maps carry their own.
    #[serde(default = "d_agent_radius")]
    pub agent_radius: f64,
    #[serde(default)]
    pub lidar: Option<LidarConfig>,
    #[serde(default)]
    pub corridor: Option<CorridorTemplate>,
    #[serde(default)]
    pub fixed: Option<WorldMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub empowered: bool,
    pub safety_coefficient: f64,
    pub volume_floor: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        RewardSection { empowered: false, safety_coefficient: 1.0, volume_floor: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmpowermentSection {
    /// None selects the stopping-time heuristic v_max / a_max.
    pub horizon: Option<f64>,
    pub n_trajectories: usize,
    pub steps_per_trajectory: usize,
    pub sampling_mode: SamplingMode,
    /// None selects twice the expected endpoint spacing.
    pub cluster_eps: Option<f64>,
    pub cluster_min_pts: usize,
    pub mc_samples: usize,
    pub volume_floor: f64,
    /// Recompute every k-th environment step, holding the value between.
    pub stride: usize,
}

impl Default for EmpowermentSection {
    fn default() -> Self {
        let p = EmpowermentParams::default();
        EmpowermentSection {
            horizon: None,
            n_trajectories: p.n_trajectories,
            steps_per_trajectory: p.steps_per_trajectory,
            sampling_mode: p.sampling_mode,
            cluster_eps: None,
            cluster_min_pts: p.cluster_min_pts,
            mc_samples: p.mc_samples,
            volume_floor: p.volume_floor,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoSection {
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
    pub total_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for PpoSection {
    fn default() -> Self {
        let p = PpoConfig::default();
        PpoSection {
            horizon: p.horizon,
            batch_size: p.batch_size,
            gamma: p.gamma,
            gae_lambda: p.gae_lambda,
            clip_range: p.clip_range,
            learning_rate: p.learning_rate,
            epochs: p.epochs,
            value_coef: p.value_coef,
            entropy_coef: p.entropy_coef,
            policy_hidden: p.policy_hidden,
            value_hidden: p.value_hidden,
            total_steps: 150_000,
            eval_every: 10_000,
            eval_episodes: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub episodes: usize,
    pub thresholds: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        let s = EvalSettings::default();
        EvalSection { episodes: s.episodes, thresholds: s.thresholds }
    }
}

/// Training protocol knobs that ride along in the ppo section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainProtocol {
    pub total_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

/// A parsed config with every default and heuristic materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    /// The config document with all optional fields filled; serializing it
    /// and feeding it back reproduces the identical run.
    pub file: ConfigFile,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub protocol: TrainProtocol,
    pub eval: EvalSettings,
}

impl ConfigFile {
    pub fn from_json_str(s: &str) -> Result<ConfigFile> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("{e}")))
    }

    pub fn from_path(path: &std::path::Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validate cross-field constraints and materialize every default.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let system = SystemSpec {
            kind: self.system.kind,
            mass: self.system.mass,
            linear_damping: self.system.linear_damping,
            v_max: self.system.v_max,
            a_max: self.system.a_max,
            control_bounds: self.system.control_bounds,
            control_norm_bound: self.system.control_norm_bound,
        };
        system.validate()?;

        let map_source = match self.map.kind {
            MapKind::PointMaze => {
                if self.map.corridor.is_some() || self.map.fixed.is_some() {
                    return Err(Error::Config(
                        "map.corridor/map.fixed not allowed for kind point_maze".into(),
                    ));
                }
                point_maze_map(self.map.agent_radius)?;
                MapSource::PointMaze { agent_radius: self.map.agent_radius }
            }
            MapKind::Corridor => {
                if self.map.fixed.is_some() {
                    return Err(Error::Config("map.fixed not allowed for kind corridor".into()));
                }
                let template = self.map.corridor.clone().unwrap_or_default();
                template.validate()?;
                MapSource::Corridor(template)
            }
            MapKind::Fixed => {
                if self.map.corridor.is_some() {
                    return Err(Error::Config("map.corridor not allowed for kind fixed".into()));
                }
                let map = self
                    .map
                    .fixed
                    .clone()
                    .ok_or_else(|| Error::Config("map.fixed required for kind fixed".into()))?;
                map.validate()?;
                MapSource::Fixed(map)
            }
        };

        let horizon = match self.empowerment.horizon {
            Some(t) if t > 0.0 => t,
            Some(t) => {
                return Err(Error::Config(format!("empowerment.horizon must be positive, got {t}")))
            }
            None => {
                let t = default_horizon(&system);
                if !(t > 0.0) {
                    return Err(Error::Config(
                        "stopping-time heuristic gave a non-positive horizon; set \
                         empowerment.horizon explicitly"
                            .into(),
                    ));
                }
                t
            }
        };
        let cluster_eps = match self.empowerment.cluster_eps {
            Some(e) => e,
            None => {
                let radius = system.v_max * horizon;
                2.0 * (std::f64::consts::PI * radius * radius
                    / self.empowerment.n_trajectories.max(1) as f64)
                    .sqrt()
            }
        };
        let empowerment = EmpowermentParams {
            horizon,
            n_trajectories: self.empowerment.n_trajectories,
            steps_per_trajectory: self.empowerment.steps_per_trajectory,
            sampling_mode: self.empowerment.sampling_mode,
            cluster_eps,
            cluster_min_pts: self.empowerment.cluster_min_pts,
            mc_samples: self.empowerment.mc_samples,
            volume_floor: self.empowerment.volume_floor,
        };

        let reward = RewardConfig {
            safety_coefficient: self.reward.safety_coefficient,
            volume_floor: self.reward.volume_floor,
            goal_position: map_source.goal_position()?,
            empowered: self.reward.empowered,
        };
        if !(reward.safety_coefficient > 0.0) {
            return Err(Error::Config("reward.safety_coefficient must be positive".into()));
        }
        if !(reward.volume_floor > 0.0) {
            return Err(Error::Config("reward.volume_floor must be positive".into()));
        }

        let env = EnvConfig {
            system,
            map_source,
            reward,
            empowerment: empowerment.clone(),
            empowerment_stride: self.empowerment.stride,
            control_dt: self.system.control_dt,
            rk4_substeps: self.system.rk4_substeps,
            max_steps: self.system.max_steps,
            lidar: self.map.lidar,
        };
        env.validate()?;

        let ppo = PpoConfig {
            horizon: self.ppo.horizon,
            batch_size: self.ppo.batch_size,
            gamma: self.ppo.gamma,
            gae_lambda: self.ppo.gae_lambda,
            clip_range: self.ppo.clip_range,
            learning_rate: self.ppo.learning_rate,
            epochs: self.ppo.epochs,
            value_coef: self.ppo.value_coef,
            entropy_coef: self.ppo.entropy_coef,
            policy_hidden: self.ppo.policy_hidden.clone(),
            value_hidden: self.ppo.value_hidden.clone(),
        };
        ppo.validate()?;
        let protocol = TrainProtocol {
            total_steps: self.ppo.total_steps,
            eval_every: self.ppo.eval_every,
            eval_episodes: self.ppo.eval_episodes,
        };
        if self.eval.episodes == 0 {
            return Err(Error::Config("eval.episodes must be at least 1".into()));
        }
        let eval =
            EvalSettings { episodes: self.eval.episodes, thresholds: self.eval.thresholds.clone() };

        let mut file = self.clone();
        file.empowerment.horizon = Some(horizon);
        file.empowerment.cluster_eps = Some(cluster_eps);
        if self.map.kind == MapKind::Corridor && file.map.corridor.is_none() {
            file.map.corridor = Some(CorridorTemplate::default());
        }

        Ok(ResolvedConfig { file, env, ppo, protocol, eval })
    }
}

/// Hex SHA-256 of the resolved config document.
pub fn config_hash(file: &ConfigFile) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(file).expect("config serializes"));
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse a CLI vector argument "vx,vy". Wrong arity is a dimension error.
pub fn parse_vec2_arg(s: &str) -> Result<Vec2> {
    let parts = parse_floats(s)?;
    if parts.len() != 2 {
        return Err(Error::Dimension(format!("expected 2 components, got {}", parts.len())));
    }
    Ok(Vec2::new(parts[0], parts[1]))
}

/// Parse a CLI state argument "x,y,vx,vy".
pub fn parse_state_arg(s: &str) -> Result<crate::dynamics::SystemState> {
    let parts = parse_floats(s)?;
    if parts.len() != 4 {
        return Err(Error::Dimension(format!("expected 4 components, got {}", parts.len())));
    }
    Ok(crate::dynamics::SystemState::new(
        Vec2::new(parts[0], parts[1]),
        Vec2::new(parts[2], parts[3]),
    ))
}

/// Parse a grid resolution argument "N" or "NXxNY".
pub fn parse_grid_arg(s: &str) -> Result<(usize, usize)> {
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad grid resolution `{t}`")))
    };
    match s.split_once(['x', 'X']) {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => {
            let n = parse(s)?;
            Ok((n, n))
        }
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number `{t}`")))?;
            if !v.is_finite() {
                return Err(Error::Config(format!("non-finite component `{t}`")));
            }
            Ok(v)
        })
        .collect()
}

fn d_one() -> f64 {
    1.0
}
fn d_two() -> f64 {
    2.0
}
fn d_damping() -> f64 {
    0.3
}
fn d_bounds() -> [[f64; 2]; 2] {
    [[-2.0, 2.0], [-2.0, 2.0]]
}
fn d_control_dt() -> f64 {
    0.05
}
fn d_substeps() -> usize {
    5
}
fn d_max_steps() -> usize {
    400
}
fn d_agent_radius() -> f64 {
    0.1
}
