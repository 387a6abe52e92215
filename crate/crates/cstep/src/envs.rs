//! Episodic navigation environments: a fixed two-route point maze and a
//! corridor with a randomized central obstacle.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, ControlInput, PiecewiseControl, SystemSpec, SystemState};
use crate::empowerment::{estimate_empowerment, EmpowermentParams};
use crate::error::{Error, Result};
use crate::reward::{empowered_reward, nav_reward, RewardConfig};
use crate::rng::rng_from_seed;
use crate::vec2::Vec2;
use crate::world::{
    check_trajectory, distance_to_nearest_obstacle, lidar_scan, point_free, point_maze_map,
    randomize_map, CorridorTemplate, LidarConfig, WorldMap,
};

/// Where an environment's map comes from on reset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MapSource {
    /// The same map every episode.
    Fixed(WorldMap),
    /// A fresh draw from the corridor template every episode.
    Corridor(CorridorTemplate),
    /// The built-in two-route maze.
    PointMaze { agent_radius: f64 },
}

impl MapSource {
    pub fn goal_position(&self) -> Result<Vec2> {
        Ok(match self {
            MapSource::Fixed(map) => map.goal_position,
            MapSource::Corridor(t) => t.goal_position,
            MapSource::PointMaze { agent_radius } => point_maze_map(*agent_radius)?.goal_position,
        })
    }
}

/// Full runtime environment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub system: SystemSpec,
    pub map_source: MapSource,
    pub reward: RewardConfig,
    /// Estimator settings, used iff `reward.empowered`.
    pub empowerment: EmpowermentParams,
    /// Recompute the estimate every k-th step, holding the last free area
    /// in between.
    pub empowerment_stride: usize,
    /// Duration of one control step, seconds.
    pub control_dt: f64,
    /// RK4 sub-steps per control step (also the collision sampling rate).
    pub rk4_substeps: usize,
    pub max_steps: usize,
    pub lidar: Option<LidarConfig>,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if !(self.control_dt > 0.0) {
            return Err(Error::Config("control_dt must be positive".into()));
        }
        if self.rk4_substeps == 0 {
            return Err(Error::Config("rk4_substeps must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if self.empowerment_stride == 0 {
            return Err(Error::Config("empowerment_stride must be at least 1".into()));
        }
        if self.reward.empowered {
            self.empowerment.validate()?;
        }
        if let MapSource::Corridor(t) = &self.map_source {
            t.validate()?;
        }
        Ok(())
    }

    pub fn observation_dim(&self) -> usize {
        4 + self.lidar.map_or(0, |l| l.beam_count)
    }

    pub fn action_dim(&self) -> usize {
        2
    }
}

/// What the agent sees: goal offset, own velocity, and lidar ranges when
/// the environment is configured with a sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub goal_delta: Vec2,
    pub velocity: Vec2,
    pub lidar: Option<Vec<f64>>,
}

impl Observation {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = vec![self.goal_delta.x, self.goal_delta.y, self.velocity.x, self.velocity.y];
        if let Some(l) = &self.lidar {
            v.extend_from_slice(l);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    None,
    Collision,
    GoalReached,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub distance_to_obstacle: f64,
    pub empowerment_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub termination_reason: TerminationReason,
    pub info: StepInfo,
}

/// Episodic environment instance. Single-threaded mutable state; create one
/// instance per concurrent episode.
#[derive(Debug, Clone)]
pub struct NavEnv {
    cfg: EnvConfig,
    map: WorldMap,
    state: SystemState,
    steps_taken: usize,
    terminated: bool,
    ready: bool,
    emp_rng: ChaCha8Rng,
    last_free_area: f64,
}

impl NavEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let map = match &cfg.map_source {
            MapSource::Fixed(map) => {
                map.validate()?;
                map.clone()
            }
            // Placeholder draw; reset always redraws the episode map.
            MapSource::Corridor(t) => randomize_map(&mut rng_from_seed(0), t)?,
            MapSource::PointMaze { agent_radius } => point_maze_map(*agent_radius)?,
        };
        Ok(NavEnv {
            cfg,
            map,
            state: SystemState::at_rest(Vec2::ZERO),
            steps_taken: 0,
            terminated: true,
            ready: false,
            emp_rng: rng_from_seed(0),
            last_free_area: 0.0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// The map of the current episode.
    pub fn map(&self) -> &WorldMap {
        &self.map
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// Start a new episode: draw the episode map (corridor maps are
    /// re-randomized), place the agent at rest uniformly in the start
    /// region, and reseed the estimator stream.
    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Observation> {
        self.map = match &self.cfg.map_source {
            MapSource::Fixed(map) => map.clone(),
            MapSource::Corridor(t) => randomize_map(rng, t)?,
            MapSource::PointMaze { agent_radius } => point_maze_map(*agent_radius)?,
        };
        let mut start = self.map.sample_start(rng);
        let mut tries = 0;
        while !point_free(&self.map, start) {
            start = self.map.sample_start(rng);
            tries += 1;
            if tries > 100 {
                return Err(Error::Config("start region has no free placements".into()));
            }
        }
        // Drawn unconditionally so empowered and unempowered environments
        // consume identical reset entropy and see identical episodes.
        let emp_seed = rng.next_u64();
        self.emp_rng = rng_from_seed(emp_seed);
        self.state = SystemState::at_rest(start);
        self.steps_taken = 0;
        self.terminated = false;
        self.ready = true;
        self.last_free_area = 0.0;
        Ok(self.observe())
    }

    pub fn observe(&self) -> Observation {
        Observation {
            goal_delta: self.map.goal_position - self.state.position,
            velocity: self.state.velocity,
            lidar: self
                .cfg
                .lidar
                .as_ref()
                .map(|l| lidar_scan(&self.map, self.state.position, l)),
        }
    }

    /// Advance one control step: clip the action into the admissible set,
    /// integrate for `control_dt`, check the sub-trajectory for collision,
    /// and compute the (optionally empowered) reward at the new state.
    pub fn step(&mut self, action: ControlInput) -> Result<StepResult> {
        if !self.ready || self.terminated {
            return Err(Error::Contract("step on a terminated environment".into()));
        }
        let u = self.cfg.system.clip_control(action);
        let ctrl = PiecewiseControl::constant(u, self.cfg.control_dt)?;
        let traj = integrate(
            &self.cfg.system,
            &self.state,
            &ctrl,
            self.cfg.control_dt,
            self.cfg.rk4_substeps,
        )?;
        let outcome = check_trajectory(&self.map, &traj);
        self.steps_taken += 1;

        let reason;
        if !outcome.free {
            let idx = outcome.first_collision_index.expect("colliding trajectory has an index");
            self.state = traj.states[idx];
            reason = TerminationReason::Collision;
        } else {
            self.state = *traj.final_state();
            let at_goal = self.state.position.distance(self.map.goal_position)
                <= self.map.goal_radius;
            reason = if at_goal {
                TerminationReason::GoalReached
            } else if self.steps_taken >= self.cfg.max_steps {
                TerminationReason::Timeout
            } else {
                TerminationReason::None
            };
        }
        self.terminated = reason != TerminationReason::None;

        let r_d = nav_reward(self.state.position, self.cfg.reward.goal_position);
        let (reward, empowerment_value) = if self.cfg.reward.empowered {
            let free_area = if reason == TerminationReason::Collision {
                // The collision state has no free reachable volume; the
                // floor term applies.
                0.0
            } else if (self.steps_taken - 1) % self.cfg.empowerment_stride == 0 {
                let est = estimate_empowerment(
                    &self.cfg.system,
                    &self.map,
                    &self.state,
                    &self.cfg.empowerment,
                    &mut self.emp_rng,
                )?;
                self.last_free_area = est.free_area;
                est.free_area
            } else {
                self.last_free_area
            };
            if reason != TerminationReason::Collision {
                self.last_free_area = free_area;
            }
            let value = free_area.max(self.cfg.empowerment.volume_floor).ln();
            (empowered_reward(r_d, free_area, &self.cfg.reward), Some(value))
        } else {
            (r_d, None)
        };

        Ok(StepResult {
            observation: self.observe(),
            reward,
            terminated: self.terminated,
            termination_reason: reason,
            info: StepInfo {
                distance_to_obstacle: distance_to_nearest_obstacle(&self.map, self.state.position),
                empowerment_value,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::world::Obstacle;

    fn maze_config(empowered: bool) -> EnvConfig {
        EnvConfig {
            system: SystemSpec::point_mass_2d(),
            map_source: MapSource::PointMaze { agent_radius: 0.1 },
            reward: RewardConfig {
                safety_coefficient: 1.0,
                volume_floor: 1e-4,
                goal_position: point_maze_map(0.1).unwrap().goal_position,
                empowered,
            },
            empowerment: EmpowermentParams {
                n_trajectories: 24,
                steps_per_trajectory: 20,
                mc_samples: 1000,
                ..EmpowermentParams::default()
            },
            empowerment_stride: 1,
            control_dt: 0.05,
            rk4_substeps: 5,
            max_steps: 400,
            lidar: None,
        }
    }

    #[test]
    fn maze_reset_places_agent_in_start_region_at_rest() {
        let mut env = NavEnv::new(maze_config(false)).unwrap();
        let obs = env.reset(&mut substream(3, 0)).unwrap();
        let s = env.state();
        let region = env.map().start_region;
        assert!(s.position.x >= region.min_corner.x && s.position.x <= region.max_corner.x);
        assert!(s.position.y >= region.min_corner.y && s.position.y <= region.max_corner.y);
        assert_eq!(s.velocity, Vec2::ZERO);
        assert_eq!(obs.velocity, Vec2::ZERO);
        assert!(obs.lidar.is_none());
    }

    #[test]
    fn reset_is_seed_deterministic() {
        let mut a = NavEnv::new(maze_config(false)).unwrap();
        let mut b = NavEnv::new(maze_config(false)).unwrap();
        let oa = a.reset(&mut substream(11, 0)).unwrap();
        let ob = b.reset(&mut substream(11, 0)).unwrap();
        assert_eq!(oa, ob);
        assert_eq!(a.state(), b.state());
    }

    fn corridor_config() -> EnvConfig {
        let template = CorridorTemplate::default();
        EnvConfig {
            system: SystemSpec::point_mass_2d(),
            reward: RewardConfig::plain(template.goal_position),
            map_source: MapSource::Corridor(template),
            empowerment: EmpowermentParams::default(),
            empowerment_stride: 1,
            control_dt: 0.05,
            rk4_substeps: 5,
            max_steps: 400,
            lidar: Some(LidarConfig::default()),
        }
    }

    #[test]
    fn corridor_resets_draw_valid_maps() {
        let mut env = NavEnv::new(corridor_config()).unwrap();
        let mut rng = substream(19, 0);
        let template = CorridorTemplate::default();
        for _ in 0..100 {
            env.reset(&mut rng).unwrap();
            let o = &env.map().obstacles[0];
            let gap_top = template.bounds.max_corner.y - o.max_corner.y;
            let gap_bottom = o.min_corner.y - template.bounds.min_corner.y;
            assert!(gap_top.max(gap_bottom) >= template.min_gap - 1e-12);
        }
    }

    #[test]
    fn goal_step_terminates_with_goal_reason() {
        let g = Vec2::new(1.0, 1.0);
        let map = WorldMap {
            bounds: Obstacle::from_extents([-3.0, 3.0], [-3.0, 3.0]),
            obstacles: vec![],
            start_region: Obstacle::from_extents(
                [g.x - 1e-9, g.x + 1e-9],
                [g.y - 1e-9, g.y + 1e-9],
            ),
            goal_position: g,
            goal_radius: 0.25,
            agent_radius: 0.0,
        };
        let mut cfg = maze_config(false);
        cfg.reward.goal_position = g;
        cfg.map_source = MapSource::Fixed(map);
        let mut env = NavEnv::new(cfg).unwrap();
        env.reset(&mut substream(1, 0)).unwrap();
        let r = env.step(Vec2::ZERO).unwrap();
        assert!(r.terminated);
        assert_eq!(r.termination_reason, TerminationReason::GoalReached);
        assert!((r.reward - 1.0).abs() < 1e-6, "r_d component should be ~1, got {}", r.reward);
    }

    #[test]
    fn driving_into_adjacent_wall_collides_within_one_step() {
        let map = WorldMap {
            bounds: Obstacle::from_extents([-3.0, 3.0], [-3.0, 3.0]),
            obstacles: vec![Obstacle::from_extents([0.05, 1.0], [-3.0, 3.0])],
            start_region: Obstacle::from_extents([-0.01, 0.0], [-0.01, 0.01]),
            goal_position: Vec2::new(-2.0, 0.0),
            goal_radius: 0.2,
            agent_radius: 0.0,
        };
        let mut cfg = maze_config(false);
        cfg.reward.goal_position = map.goal_position;
        cfg.map_source = MapSource::Fixed(map);
        cfg.control_dt = 0.3;
        let mut env = NavEnv::new(cfg).unwrap();
        env.reset(&mut substream(2, 0)).unwrap();
        let r = env.step(Vec2::new(2.0, 0.0)).unwrap();
        assert_eq!(r.termination_reason, TerminationReason::Collision);
        assert!(!point_free(env.map(), env.state().position));
    }

    #[test]
    fn unempowered_reward_is_exactly_nav_reward() {
        let mut env = NavEnv::new(maze_config(false)).unwrap();
        env.reset(&mut substream(4, 0)).unwrap();
        let mut rng = substream(4, 1);
        for _ in 0..50 {
            use rand::Rng;
            let a = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let r = env.step(a).unwrap();
            let expect = nav_reward(env.state().position, env.config().reward.goal_position);
            assert_eq!(r.reward, expect);
            assert!(r.info.empowerment_value.is_none());
            if r.terminated {
                break;
            }
        }
    }

    #[test]
    fn stepping_after_termination_is_rejected() {
        let mut env = NavEnv::new(maze_config(false)).unwrap();
        env.reset(&mut substream(6, 0)).unwrap();
        // Drive into the left wall.
        loop {
            let r = env.step(Vec2::new(-2.0, 0.0)).unwrap();
            if r.terminated {
                break;
            }
        }
        assert!(matches!(env.step(Vec2::ZERO), Err(Error::Contract(_))));
    }

    #[test]
    fn episodes_are_bit_deterministic() {
        let run = || {
            let mut env = NavEnv::new(maze_config(true)).unwrap();
            env.reset(&mut substream(8, 0)).unwrap();
            let mut rng = substream(8, 1);
            let mut results = Vec::new();
            for _ in 0..30 {
                use rand::Rng;
                let a = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let r = env.step(a).unwrap();
                let done = r.terminated;
                results.push(r);
                if done {
                    break;
                }
            }
            results
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empowered_and_plain_envs_share_transition_dynamics() {
        let mut plain = NavEnv::new(maze_config(false)).unwrap();
        let mut emp = NavEnv::new(maze_config(true)).unwrap();
        plain.reset(&mut substream(9, 0)).unwrap();
        emp.reset(&mut substream(9, 0)).unwrap();
        assert_eq!(plain.state(), emp.state());
        let mut rng = substream(9, 1);
        for _ in 0..40 {
            use rand::Rng;
            let a = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let rp = plain.step(a).unwrap();
            let re = emp.step(a).unwrap();
            assert_eq!(plain.state(), emp.state());
            assert_eq!(rp.termination_reason, re.termination_reason);
            assert!(re.info.empowerment_value.is_some() || re.terminated);
            if rp.terminated {
                break;
            }
        }
    }

    #[test]
    fn observation_bounds_hold() {
        let mut env = NavEnv::new(corridor_config()).unwrap();
        let mut rng = substream(10, 0);
        let diag = (env.config().system.v_max, 5.0f64.hypot(2.5));
        for _ in 0..5 {
            let mut obs = env.reset(&mut rng).unwrap();
            for _ in 0..60 {
                use rand::Rng;
                let a = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let lidar_max = env.config().lidar.unwrap().max_range;
                for &r in obs.lidar.as_ref().unwrap() {
                    assert!((0.0..=lidar_max).contains(&r));
                }
                assert!(obs.goal_delta.norm() <= diag.1 + 1e-9);
                match env.step(a) {
                    Ok(res) => {
                        obs = res.observation;
                        if res.terminated {
                            break;
                        }
                    }
                    Err(e) => panic!("step failed: {e}"),
                }
            }
        }
    }
}
