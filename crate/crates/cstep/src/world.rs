//! Collision-free configuration space: obstacle maps, trajectory collision
//! checks, lidar sensing, and per-episode map randomization.
//!
//! The collision model is a disk agent of radius `agent_radius` against
//! axis-aligned boxes. Inflated obstacles are closed sets: touching counts
//! as a collision.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::StateTrajectory;
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Axis-aligned box, `min_corner` strictly below `max_corner` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub min_corner: Vec2,
    pub max_corner: Vec2,
}

impl Obstacle {
    pub fn new(min_corner: Vec2, max_corner: Vec2) -> Self {
        Obstacle { min_corner, max_corner }
    }

    pub fn from_extents(x: [f64; 2], y: [f64; 2]) -> Self {
        Obstacle::new(Vec2::new(x[0], y[0]), Vec2::new(x[1], y[1]))
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_corner.x < self.max_corner.x && self.min_corner.y < self.max_corner.y {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "box corners out of order: ({}, {}) vs ({}, {})",
                self.min_corner.x, self.min_corner.y, self.max_corner.x, self.max_corner.y
            )))
        }
    }

    pub fn center(&self) -> Vec2 {
        (self.min_corner + self.max_corner) * 0.5
    }

    /// Closed membership in the box grown by `inflate` on every side.
    pub fn contains_inflated(&self, p: Vec2, inflate: f64) -> bool {
        p.x >= self.min_corner.x - inflate
            && p.x <= self.max_corner.x + inflate
            && p.y >= self.min_corner.y - inflate
            && p.y <= self.max_corner.y + inflate
    }

    /// Signed distance to the box grown by `inflate`: positive outside,
    /// negative inside, zero on the surface.
    pub fn signed_distance_inflated(&self, p: Vec2, inflate: f64) -> f64 {
        let ex = (self.min_corner.x - inflate - p.x).max(p.x - self.max_corner.x - inflate);
        let ey = (self.min_corner.y - inflate - p.y).max(p.y - self.max_corner.y - inflate);
        if ex <= 0.0 && ey <= 0.0 {
            ex.max(ey)
        } else {
            Vec2::new(ex.max(0.0), ey.max(0.0)).norm()
        }
    }

    /// Distance along the ray `origin + t·dir` (dir normalized) to the first
    /// intersection with the box surface, if any, for t >= 0.
    pub fn ray_entry(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let inv = Vec2::new(1.0 / dir.x, 1.0 / dir.y);
        let tx1 = (self.min_corner.x - origin.x) * inv.x;
        let tx2 = (self.max_corner.x - origin.x) * inv.x;
        let ty1 = (self.min_corner.y - origin.y) * inv.y;
        let ty2 = (self.max_corner.y - origin.y) * inv.y;
        let tmin = tx1.min(tx2).max(ty1.min(ty2));
        let tmax = tx1.max(tx2).min(ty1.max(ty2));
        if tmax >= tmin && tmax >= 0.0 {
            Some(tmin.max(0.0))
        } else {
            None
        }
    }

    /// Distance along the ray to the exit through the box surface, assuming
    /// the origin is inside.
    pub fn ray_exit(&self, origin: Vec2, dir: Vec2) -> f64 {
        let inv = Vec2::new(1.0 / dir.x, 1.0 / dir.y);
        let tx1 = (self.min_corner.x - origin.x) * inv.x;
        let tx2 = (self.max_corner.x - origin.x) * inv.x;
        let ty1 = (self.min_corner.y - origin.y) * inv.y;
        let ty2 = (self.max_corner.y - origin.y) * inv.y;
        tx1.max(tx2).min(ty1.max(ty2))
    }
}

/// 2D lidar with `beam_count` beams evenly spaced over 360°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub beam_count: usize,
    pub max_range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig { beam_count: 180, max_range: 5.0 }
    }
}

/// Obstacle map with start region and goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldMap {
    pub bounds: Obstacle,
    pub obstacles: Vec<Obstacle>,
    pub start_region: Obstacle,
    pub goal_position: Vec2,
    pub goal_radius: f64,
    pub agent_radius: f64,
}

impl WorldMap {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        self.start_region.validate()?;
        for o in &self.obstacles {
            o.validate()?;
        }
        if !(self.goal_radius > 0.0) {
            return Err(Error::Config("goal_radius must be positive".into()));
        }
        if self.agent_radius < 0.0 {
            return Err(Error::Config("agent_radius must be non-negative".into()));
        }
        if !point_free(self, self.goal_position) {
            return Err(Error::Config("goal position is not in free space".into()));
        }
        let s = &self.start_region;
        let corners = [
            s.min_corner,
            Vec2::new(s.max_corner.x, s.min_corner.y),
            s.max_corner,
            Vec2::new(s.min_corner.x, s.max_corner.y),
        ];
        for c in corners {
            if !point_free(self, c) {
                return Err(Error::Config(format!(
                    "start region corner ({}, {}) is not in free space",
                    c.x, c.y
                )));
            }
        }
        Ok(())
    }

    /// Uniform draw from the start region.
    pub fn sample_start<R: Rng>(&self, rng: &mut R) -> Vec2 {
        let s = &self.start_region;
        Vec2::new(
            rng.gen_range(s.min_corner.x..=s.max_corner.x),
            rng.gen_range(s.min_corner.y..=s.max_corner.y),
        )
    }
}

/// True iff the disk agent centered at `p` fits strictly inside the outer
/// bounds and does not touch any inflated obstacle.
pub fn point_free(map: &WorldMap, p: Vec2) -> bool {
    let r = map.agent_radius;
    let b = &map.bounds;
    let inside_bounds = p.x > b.min_corner.x + r
        && p.x < b.max_corner.x - r
        && p.y > b.min_corner.y + r
        && p.y < b.max_corner.y - r;
    if !inside_bounds {
        return false;
    }
    !map.obstacles.iter().any(|o| o.contains_inflated(p, r))
}

/// Outcome of sampling a trajectory against the free space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub free: bool,
    pub first_collision_index: Option<usize>,
    /// Final position for free trajectories; the position at the first
    /// colliding sample otherwise.
    pub final_position: Vec2,
}

/// Test every sampled state in order; report the first collision.
pub fn check_trajectory(map: &WorldMap, traj: &StateTrajectory) -> TrajectoryOutcome {
    assert!(!traj.states.is_empty(), "trajectory must be nonempty");
    for (i, s) in traj.states.iter().enumerate() {
        if !point_free(map, s.position) {
            return TrajectoryOutcome {
                free: false,
                first_collision_index: Some(i),
                final_position: s.position,
            };
        }
    }
    TrajectoryOutcome {
        free: true,
        first_collision_index: None,
        final_position: traj.final_state().position,
    }
}

/// Ranges to physical surfaces (obstacles and the outer boundary), beam `i`
/// at angle `2πi / beam_count`, capped at `max_range`.
pub fn lidar_scan(map: &WorldMap, position: Vec2, cfg: &LidarConfig) -> Vec<f64> {
    let n = cfg.beam_count;
    let mut ranges = Vec::with_capacity(n);
    for i in 0..n {
        let angle = std::f64::consts::TAU * i as f64 / n as f64;
        let dir = Vec2::new(angle.cos(), angle.sin());
        let mut range = map.bounds.ray_exit(position, dir);
        for o in &map.obstacles {
            if let Some(t) = o.ray_entry(position, dir) {
                range = range.min(t);
            }
        }
        ranges.push(range.min(cfg.max_range).max(0.0));
    }
    ranges
}

/// Exact Euclidean distance from `p` to the nearest inflated obstacle
/// surface or deflated outer boundary; negative inside an obstacle or
/// outside the boundary.
pub fn distance_to_nearest_obstacle(map: &WorldMap, p: Vec2) -> f64 {
    let r = map.agent_radius;
    let b = &map.bounds;
    let boundary = (p.x - (b.min_corner.x + r))
        .min((b.max_corner.x - r) - p.x)
        .min(p.y - (b.min_corner.y + r))
        .min((b.max_corner.y - r) - p.y);
    map.obstacles
        .iter()
        .map(|o| o.signed_distance_inflated(p, r))
        .fold(boundary, f64::min)
}

/// Corridor map family: a fixed outer corridor with one central obstacle
/// whose lateral extent and offset are randomized per episode subject to a
/// minimum-gap constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorTemplate {
    pub bounds: Obstacle,
    pub start_region: Obstacle,
    pub goal_position: Vec2,
    pub goal_radius: f64,
    pub agent_radius: f64,
    /// Center of the obstacle along the corridor axis (x).
    pub obstacle_x_center: f64,
    /// Obstacle extent along the corridor axis.
    pub obstacle_thickness: f64,
    /// Range of the obstacle's lateral extent (y width).
    pub width_range: [f64; 2],
    /// Range of the obstacle's lateral center position.
    pub offset_range: [f64; 2],
    /// At least one side gap must be at least this wide.
    pub min_gap: f64,
}

impl Default for CorridorTemplate {
    fn default() -> Self {
        // 5 m x 2.5 m corridor, start at the left end, goal at the right.
        CorridorTemplate {
            bounds: Obstacle::from_extents([0.0, 5.0], [0.0, 2.5]),
            start_region: Obstacle::from_extents([0.4, 0.8], [1.0, 1.5]),
            goal_position: Vec2::new(4.5, 1.25),
            goal_radius: 0.3,
            agent_radius: 0.12,
            obstacle_x_center: 2.5,
            obstacle_thickness: 0.3,
            width_range: [1.0, 1.9],
            offset_range: [0.3, 2.2],
            min_gap: 0.6,
        }
    }
}

impl CorridorTemplate {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.width_range[0] > self.width_range[1] || self.width_range[0] <= 0.0 {
            return Err(Error::Config("corridor width_range out of order".into()));
        }
        if self.offset_range[0] > self.offset_range[1] {
            return Err(Error::Config("corridor offset_range out of order".into()));
        }
        if !(self.obstacle_thickness > 0.0) {
            return Err(Error::Config("obstacle_thickness must be positive".into()));
        }
        // Feasibility: the widest gap achievable anywhere in the ranges.
        let h_lo = self.bounds.min_corner.y;
        let h_hi = self.bounds.max_corner.y;
        let w = self.width_range[0];
        let top_best = h_hi - (self.offset_range[0] + w / 2.0);
        let bottom_best = (self.offset_range[1] - w / 2.0) - h_lo;
        if top_best.max(bottom_best) < self.min_gap {
            return Err(Error::InfeasibleTemplate(format!(
                "no placement leaves a gap of {} m",
                self.min_gap
            )));
        }
        Ok(())
    }

    fn map_with_obstacle(&self, width: f64, offset: f64) -> WorldMap {
        let h_lo = self.bounds.min_corner.y;
        let h_hi = self.bounds.max_corner.y;
        let y0 = (offset - width / 2.0).max(h_lo);
        let y1 = (offset + width / 2.0).min(h_hi);
        let x0 = self.obstacle_x_center - self.obstacle_thickness / 2.0;
        let x1 = self.obstacle_x_center + self.obstacle_thickness / 2.0;
        WorldMap {
            bounds: self.bounds,
            obstacles: vec![Obstacle::from_extents([x0, x1], [y0, y1])],
            start_region: self.start_region,
            goal_position: self.goal_position,
            goal_radius: self.goal_radius,
            agent_radius: self.agent_radius,
        }
    }
}

/// Draw a corridor map with the obstacle's width uniform over the template
/// range and its lateral position uniform over the placements that leave at
/// least one side gap of `min_gap`.
pub fn randomize_map<R: Rng>(rng: &mut R, template: &CorridorTemplate) -> Result<WorldMap> {
    template.validate()?;
    let h_lo = template.bounds.min_corner.y;
    let h_hi = template.bounds.max_corner.y;
    for _ in 0..1000 {
        let width = rng.gen_range(template.width_range[0]..=template.width_range[1]);
        let offset = rng.gen_range(template.offset_range[0]..=template.offset_range[1]);
        let gap_top = h_hi - (offset + width / 2.0);
        let gap_bottom = (offset - width / 2.0) - h_lo;
        if gap_top.max(gap_bottom) >= template.min_gap {
            let map = template.map_with_obstacle(width, offset);
            map.validate()?;
            return Ok(map);
        }
    }
    Err(Error::InfeasibleTemplate(
        "rejection sampling failed to satisfy the min_gap constraint".into(),
    ))
}

/// Fixed two-route maze: a central wall with a narrow top gap (2.5 agent
/// diameters) on the short route to the goal and a wide bottom gap (6
/// diameters) on the long route.
pub fn point_maze_map(agent_radius: f64) -> Result<WorldMap> {
    let d = 2.0 * agent_radius;
    let narrow = 2.5 * d;
    let wide = 6.0 * d;
    let bounds = Obstacle::from_extents([0.0, 4.0], [0.0, 3.0]);
    let wall_y0 = bounds.min_corner.y + wide;
    let wall_y1 = bounds.max_corner.y - narrow;
    if wall_y1 - wall_y0 < 4.0 * d {
        return Err(Error::Config("agent too large for the maze layout".into()));
    }
    let wall = Obstacle::from_extents([1.8, 2.2], [wall_y0, wall_y1]);
    let map = WorldMap {
        bounds,
        obstacles: vec![wall],
        start_region: Obstacle::from_extents([0.3, 0.7], [1.3, 1.7]),
        goal_position: Vec2::new(3.4, 2.7),
        goal_radius: 0.25,
        agent_radius,
    };
    map.validate()?;

    // The narrow (top) route must be the shortest one from the start region
    // center to the goal, measured through the gap centers.
    let start = map.start_region.center();
    let narrow_via = Vec2::new(wall.center().x, (wall_y1 + bounds.max_corner.y) / 2.0);
    let wide_via = Vec2::new(wall.center().x, (bounds.min_corner.y + wall_y0) / 2.0);
    let narrow_len = start.distance(narrow_via) + narrow_via.distance(map.goal_position);
    let wide_len = start.distance(wide_via) + wide_via.distance(map.goal_position);
    if narrow_len >= wide_len {
        return Err(Error::Config("maze goal placement: narrow route must be shortest".into()));
    }
    Ok(map)
}

/// Y midline of the maze wall, used to classify which route a crossing took.
pub fn maze_wall(map: &WorldMap) -> Option<&Obstacle> {
    map.obstacles.first()
}
