//! Sampling-based estimator of space-time empowerment: the log-volume of
//! the collision-free reachable set over a finite horizon, approximated by
//! forward-simulating sampled control trajectories.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, sample_control, SamplingMode, SystemSpec, SystemState};
use crate::error::{Error, Result};
use crate::geometry::{cluster_hulls, convex_hull, polygon_area, ConvexPolygon};
use crate::rng::substream;
use crate::vec2::Vec2;
use crate::world::{check_trajectory, point_free, WorldMap};

/// Estimator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpowermentParams {
    /// Horizon T in seconds.
    pub horizon: f64,
    /// Number of sampled control trajectories N.
    pub n_trajectories: usize,
    /// Integration steps per trajectory (trajectory has steps + 1 points).
    pub steps_per_trajectory: usize,
    pub sampling_mode: SamplingMode,
    /// DBSCAN radius for clustering terminal points, meters.
    pub cluster_eps: f64,
    pub cluster_min_pts: usize,
    /// Monte Carlo samples for the terminal union area.
    pub mc_samples: usize,
    /// Free-volume floor ε in m², keeps the log finite.
    pub volume_floor: f64,
}

impl Default for EmpowermentParams {
    fn default() -> Self {
        EmpowermentParams {
            horizon: 1.0,
            n_trajectories: 150,
            steps_per_trajectory: 100,
            sampling_mode: SamplingMode::Piecewise(5),
            cluster_eps: 0.3,
            cluster_min_pts: 3,
            mc_samples: 20_000,
            volume_floor: 1e-4,
        }
    }
}

impl EmpowermentParams {
    /// Defaults adapted to a system: horizon from the stopping-time
    /// heuristic and cluster radius at twice the expected endpoint spacing
    /// for N points spread over the stopping disk.
    pub fn for_system(spec: &SystemSpec) -> Self {
        let mut p = EmpowermentParams::default();
        let t = crate::dynamics::default_horizon(spec);
        if t > 0.0 {
            p.horizon = t;
        }
        let radius = spec.v_max * p.horizon;
        if radius > 0.0 && p.n_trajectories > 0 {
            let spacing =
                (std::f64::consts::PI * radius * radius / p.n_trajectories as f64).sqrt();
            p.cluster_eps = 2.0 * spacing;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::Config("empowerment horizon must be positive".into()));
        }
        if self.n_trajectories == 0 {
            return Err(Error::Config("n_trajectories must be at least 1".into()));
        }
        if self.steps_per_trajectory == 0 {
            return Err(Error::Config("steps_per_trajectory must be at least 1".into()));
        }
        if !(self.volume_floor > 0.0) {
            return Err(Error::Config("volume_floor must be positive".into()));
        }
        if !(self.cluster_eps > 0.0) {
            return Err(Error::Config("cluster_eps must be positive".into()));
        }
        if self.cluster_min_pts == 0 {
            return Err(Error::Config("cluster_min_pts must be at least 1".into()));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one estimator evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpowermentEstimate {
    /// Hull area of all endpoints, m²: the unconstrained reachable set.
    pub reach_area: f64,
    /// Union area of clustered terminal-point hulls clipped to the reach
    /// hull, m².
    pub terminal_area: f64,
    /// max(reach_area - terminal_area, 0), m².
    pub free_area: f64,
    /// log(max(free_area, ε)) in nats.
    pub value: f64,
    pub n_free: usize,
    pub n_terminal: usize,
}

/// Endpoint scatter and hull geometry behind an estimate, for exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachSetGeometry {
    pub free_endpoints: Vec<Vec2>,
    pub terminal_endpoints: Vec<Vec2>,
    pub reach_hull: ConvexPolygon,
    pub terminal_hulls: Vec<ConvexPolygon>,
}

/// Estimate empowerment at state `x`:
/// sample N admissible controls, integrate each, split endpoints into free
/// and terminal sets (terminal trajectories contribute their position at the
/// first colliding sample), take the hull of all endpoints as the reachable
/// set and subtract the clipped union of clustered terminal hulls.
///
/// Trajectory `i` uses a dedicated generator substream keyed by `i`, and the
/// reduction runs in index order, so results are reproducible regardless of
/// evaluation order.
pub fn estimate_empowerment<R: Rng>(
    spec: &SystemSpec,
    map: &WorldMap,
    x: &SystemState,
    params: &EmpowermentParams,
    rng: &mut R,
) -> Result<EmpowermentEstimate> {
    estimate_with_geometry(spec, map, x, params, rng).map(|(e, _)| e)
}

/// [`estimate_empowerment`] plus the hulls and endpoint scatter.
pub fn estimate_with_geometry<R: Rng>(
    spec: &SystemSpec,
    map: &WorldMap,
    x: &SystemState,
    params: &EmpowermentParams,
    rng: &mut R,
) -> Result<(EmpowermentEstimate, ReachSetGeometry)> {
    params.validate()?;
    if !point_free(map, x.position) {
        return Err(Error::StateNotFree(format!("({}, {})", x.position.x, x.position.y)));
    }

    let base_seed = rng.next_u64();
    let n = params.n_trajectories;
    let mut free_endpoints = Vec::new();
    let mut terminal_endpoints = Vec::new();
    let mut all_endpoints = Vec::with_capacity(n);

    for i in 0..n {
        // Stream 0 is reserved for the Monte Carlo union estimate.
        let mut traj_rng = substream(base_seed, i as u64 + 1);
        let ctrl = sample_control(&mut traj_rng, spec, params.sampling_mode, params.horizon)?;
        let traj = integrate(spec, x, &ctrl, params.horizon, params.steps_per_trajectory)?;
        let outcome = check_trajectory(map, &traj);
        all_endpoints.push(outcome.final_position);
        if outcome.free {
            free_endpoints.push(outcome.final_position);
        } else {
            terminal_endpoints.push(outcome.final_position);
        }
    }

    let reach_hull = convex_hull(&all_endpoints);
    let reach_area = polygon_area(&reach_hull);

    let mut mc_rng = substream(base_seed, 0);
    let terminal_area = if terminal_endpoints.is_empty() {
        0.0
    } else {
        crate::geometry::union_area_of_cluster_hulls(
            &terminal_endpoints,
            params.cluster_eps,
            params.cluster_min_pts,
            &reach_hull,
            params.mc_samples,
            &mut mc_rng,
        )
    };

    let free_area = (reach_area - terminal_area).max(0.0);
    let value = free_area.max(params.volume_floor).ln();
    let estimate = EmpowermentEstimate {
        reach_area,
        terminal_area,
        free_area,
        value,
        n_free: free_endpoints.len(),
        n_terminal: terminal_endpoints.len(),
    };
    let terminal_hulls = if terminal_endpoints.is_empty() {
        Vec::new()
    } else {
        cluster_hulls(&terminal_endpoints, params.cluster_eps, params.cluster_min_pts)
    };
    let geometry = ReachSetGeometry {
        free_endpoints,
        terminal_endpoints,
        reach_hull,
        terminal_hulls,
    };
    Ok((estimate, geometry))
}

/// Rectangular lattice of evaluation positions, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::Config("grid resolution must be at least 2 per axis".into()));
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::Config("grid extents out of order".into()));
        }
        Ok(())
    }

    pub fn cell_position(&self, ix: usize, iy: usize) -> Vec2 {
        let fx = ix as f64 / (self.nx - 1) as f64;
        let fy = iy as f64 / (self.ny - 1) as f64;
        Vec2::new(
            self.x_min + fx * (self.x_max - self.x_min),
            self.y_min + fy * (self.y_max - self.y_min),
        )
    }
}

/// Empowerment field over a grid at fixed velocity, serializable for
/// heatmap plots. `values[iy][ix]` follows the grid row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpowermentField {
    pub grid_spec: GridSpec,
    pub velocity: Vec2,
    pub values: Vec<Vec<f64>>,
}

/// Evaluate the estimator at every grid cell with the given fixed velocity.
/// Cells whose position is in collision get the floored value `log ε`.
/// Each cell uses a substream keyed by its row-major index.
pub fn empowerment_field(
    spec: &SystemSpec,
    map: &WorldMap,
    grid: &GridSpec,
    velocity: Vec2,
    params: &EmpowermentParams,
    seed: u64,
) -> Result<EmpowermentField> {
    grid.validate()?;
    params.validate()?;
    let floor_value = params.volume_floor.ln();
    let mut values = Vec::with_capacity(grid.ny);
    for iy in 0..grid.ny {
        let mut row = Vec::with_capacity(grid.nx);
        for ix in 0..grid.nx {
            let pos = grid.cell_position(ix, iy);
            let cell = (iy * grid.nx + ix) as u64;
            let value = if point_free(map, pos) {
                let state = SystemState::new(pos, velocity);
                let mut cell_rng = substream(seed, cell);
                estimate_empowerment(spec, map, &state, params, &mut cell_rng)?.value
            } else {
                floor_value
            };
            row.push(value);
        }
        values.push(row);
    }
    Ok(EmpowermentField { grid_spec: *grid, velocity, values })
}
