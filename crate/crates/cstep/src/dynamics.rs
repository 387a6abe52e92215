//! Deterministic continuous-time dynamics: built-in systems, fixed-step RK4
//! integration, and admissible control-trajectory sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Full state of a controlled planar agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Seconds since episode start.
    pub time: f64,
}

impl SystemState {
    pub fn at_rest(position: Vec2) -> Self {
        SystemState { position, velocity: Vec2::ZERO, time: 0.0 }
    }

    pub fn new(position: Vec2, velocity: Vec2) -> Self {
        SystemState { position, velocity, time: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.time.is_finite()
    }
}

/// A control vector, one component per actuated axis.
pub type ControlInput = Vec2;

/// Piecewise-constant control trajectory over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseControl {
    pub segments: Vec<ControlInput>,
    pub segment_duration: f64,
}

impl PiecewiseControl {
    pub fn new(segments: Vec<ControlInput>, segment_duration: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Contract("piecewise control needs at least one segment".into()));
        }
        if !(segment_duration > 0.0) {
            return Err(Error::Contract("segment duration must be positive".into()));
        }
        Ok(PiecewiseControl { segments, segment_duration })
    }

    pub fn constant(u: ControlInput, horizon: f64) -> Result<Self> {
        Self::new(vec![u], horizon)
    }

    pub fn horizon(&self) -> f64 {
        self.segments.len() as f64 * self.segment_duration
    }

    /// Control value at time `t`. Within `[0, horizon)` this is the segment
    /// containing `t`; at `t == horizon` (and beyond) the last segment holds.
    pub fn value_at(&self, t: f64) -> ControlInput {
        let idx = (t / self.segment_duration).floor() as isize;
        let idx = idx.clamp(0, self.segments.len() as isize - 1) as usize;
        self.segments[idx]
    }
}

/// Built-in system kinds. `SingleIntegrator2d` reads its control directly as
/// a velocity and exists for estimator cross-checks against closed-form
/// reachable sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    PointMass2d,
    PlanarDrone,
    SingleIntegrator2d,
}

/// Physical description of a controlled system. Both primary kinds share the
/// damped double-integrator form (ṗ, v̇) = (v, u/m − βv); the planar drone is
/// the same plant restricted to its flight plane with its own constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    /// Mass in kg.
    pub mass: f64,
    /// Linear damping coefficient in 1/s.
    pub linear_damping: f64,
    /// Speed limit in m/s, enforced after each integration step.
    pub v_max: f64,
    /// Peak acceleration in m/s², used by the stopping-time heuristic.
    pub a_max: f64,
    /// Per-axis admissible control interval [lo, hi].
    pub control_bounds: [[f64; 2]; 2],
    /// Optional Euclidean bound on the control vector; when set, admissible
    /// controls are the intersection of the box and this ball.
    pub control_norm_bound: Option<f64>,
}

impl SystemSpec {
    pub fn point_mass_2d() -> Self {
        SystemSpec {
            kind: SystemKind::PointMass2d,
            mass: 1.0,
            linear_damping: 0.3,
            v_max: 2.0,
            a_max: 2.0,
            control_bounds: [[-2.0, 2.0], [-2.0, 2.0]],
            control_norm_bound: None,
        }
    }

    pub fn planar_drone() -> Self {
        SystemSpec {
            kind: SystemKind::PlanarDrone,
            mass: 1.0,
            linear_damping: 0.3,
            v_max: 2.0,
            a_max: 2.0,
            control_bounds: [[-2.0, 2.0], [-2.0, 2.0]],
            control_norm_bound: None,
        }
    }

    /// Velocity-controlled test system whose T-reachable set under constant
    /// controls from a radius-r ball is exactly the disk of radius r·T.
    pub fn single_integrator_2d(radius: f64) -> Self {
        SystemSpec {
            kind: SystemKind::SingleIntegrator2d,
            mass: 1.0,
            linear_damping: 0.0,
            v_max: radius,
            a_max: radius,
            control_bounds: [[-radius, radius], [-radius, radius]],
            control_norm_bound: Some(radius),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, [lo, hi]) in self.control_bounds.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "control_bounds axis {i}: lo ({lo}) must be below hi ({hi})"
                )));
            }
        }
        if !(self.mass > 0.0) {
            return Err(Error::Config("mass must be positive".into()));
        }
        if !(self.a_max > 0.0) {
            return Err(Error::Config("a_max must be positive".into()));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::Config("v_max must be positive".into()));
        }
        if let Some(r) = self.control_norm_bound {
            if !(r > 0.0) {
                return Err(Error::Config("control_norm_bound must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn control_admissible(&self, u: ControlInput) -> bool {
        let [bx, by] = self.control_bounds;
        let in_box = u.x >= bx[0] && u.x <= bx[1] && u.y >= by[0] && u.y <= by[1];
        let in_ball = self.control_norm_bound.map_or(true, |r| u.norm() <= r + 1e-12);
        in_box && in_ball
    }

    /// Clip an arbitrary control vector into the admissible set.
    pub fn clip_control(&self, u: ControlInput) -> ControlInput {
        let [bx, by] = self.control_bounds;
        let mut c = Vec2::new(u.x.clamp(bx[0], bx[1]), u.y.clamp(by[0], by[1]));
        if let Some(r) = self.control_norm_bound {
            let n = c.norm();
            if n > r {
                c = c * (r / n);
            }
        }
        c
    }
}

/// State derivative (ṗ, v̇).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dp: Vec2,
    pub dv: Vec2,
}

/// Right-hand side of the system ODE. Velocity clamping is an
/// integration-step concern and is not applied here.
pub fn derivative(spec: &SystemSpec, x: &SystemState, u: ControlInput) -> Result<StateDerivative> {
    if !spec.control_admissible(u) {
        return Err(Error::ControlOutOfBounds(format!("u = ({}, {})", u.x, u.y)));
    }
    Ok(derivative_unchecked(spec, x, u))
}

#[inline]
fn derivative_unchecked(spec: &SystemSpec, x: &SystemState, u: ControlInput) -> StateDerivative {
    match spec.kind {
        SystemKind::PointMass2d | SystemKind::PlanarDrone => StateDerivative {
            dp: x.velocity,
            dv: u / spec.mass - x.velocity * spec.linear_damping,
        },
        SystemKind::SingleIntegrator2d => StateDerivative { dp: u, dv: Vec2::ZERO },
    }
}

/// Solution trajectory sampled at uniform time steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrajectory {
    pub states: Vec<SystemState>,
    pub dt: f64,
}

impl StateTrajectory {
    pub fn final_state(&self) -> &SystemState {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// Integrate the system from `x0` under `ctrl` for `T` seconds with
/// `steps` classical RK4 steps. After each step the velocity magnitude is
/// clamped to `v_max`, which keeps the reachable set bounded and the
/// stopping-time heuristic meaningful.
pub fn integrate(
    spec: &SystemSpec,
    x0: &SystemState,
    ctrl: &PiecewiseControl,
    total_time: f64,
    steps: usize,
) -> Result<StateTrajectory> {
    if !(total_time > 0.0) {
        return Err(Error::Contract("integration horizon must be positive".into()));
    }
    if steps == 0 {
        return Err(Error::Contract("integration needs at least one step".into()));
    }
    if ctrl.horizon() < total_time - 1e-9 {
        return Err(Error::Contract(format!(
            "control horizon {} shorter than integration time {}",
            ctrl.horizon(),
            total_time
        )));
    }
    for &u in &ctrl.segments {
        if !spec.control_admissible(u) {
            return Err(Error::ControlOutOfBounds(format!("segment u = ({}, {})", u.x, u.y)));
        }
    }

    let dt = total_time / steps as f64;
    let mut states = Vec::with_capacity(steps + 1);
    let mut p = x0.position;
    let mut v = x0.velocity;
    let t0 = x0.time;
    states.push(SystemState { position: p, velocity: v, time: t0 });

    for i in 0..steps {
        let t = i as f64 * dt;
        let u0 = ctrl.value_at(t);
        let um = ctrl.value_at(t + 0.5 * dt);
        let u1 = ctrl.value_at(t + dt);

        let s = SystemState { position: p, velocity: v, time: t0 + t };
        let k1 = derivative_unchecked(spec, &s, u0);
        let s2 = rk_state(p, v, &k1, 0.5 * dt, t0 + t + 0.5 * dt);
        let k2 = derivative_unchecked(spec, &s2, um);
        let s3 = rk_state(p, v, &k2, 0.5 * dt, t0 + t + 0.5 * dt);
        let k3 = derivative_unchecked(spec, &s3, um);
        let s4 = rk_state(p, v, &k3, dt, t0 + t + dt);
        let k4 = derivative_unchecked(spec, &s4, u1);

        p += (k1.dp + (k2.dp + k3.dp) * 2.0 + k4.dp) * (dt / 6.0);
        v += (k1.dv + (k2.dv + k3.dv) * 2.0 + k4.dv) * (dt / 6.0);

        let speed = v.norm();
        if speed > spec.v_max {
            v = v * (spec.v_max / speed);
        }

        let state = SystemState { position: p, velocity: v, time: t0 + (i + 1) as f64 * dt };
        if !state.is_finite() {
            return Err(Error::NonFiniteState { step: i });
        }
        states.push(state);
    }

    Ok(StateTrajectory { states, dt })
}

#[inline]
fn rk_state(p: Vec2, v: Vec2, k: &StateDerivative, h: f64, time: f64) -> SystemState {
    SystemState { position: p + k.dp * h, velocity: v + k.dv * h, time }
}

/// Families of admissible control trajectories to sample from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// K independent uniform draws held over equal sub-intervals.
    Piecewise(usize),
    /// One uniform draw held over the whole horizon.
    Constant,
}

/// Draw one admissible control trajectory over `[0, T]`. Draws are uniform
/// over the admissible set (rejection-sampled into the norm ball when one is
/// configured) and fully determined by the generator state.
pub fn sample_control<R: Rng>(
    rng: &mut R,
    spec: &SystemSpec,
    mode: SamplingMode,
    total_time: f64,
) -> Result<PiecewiseControl> {
    let k = match mode {
        SamplingMode::Piecewise(k) => {
            if k == 0 {
                return Err(Error::Contract("piecewise sampling needs K >= 1".into()));
            }
            k
        }
        SamplingMode::Constant => 1,
    };
    let mut segments = Vec::with_capacity(k);
    for _ in 0..k {
        segments.push(sample_admissible(rng, spec));
    }
    PiecewiseControl::new(segments, total_time / k as f64)
}

fn sample_admissible<R: Rng>(rng: &mut R, spec: &SystemSpec) -> ControlInput {
    let [bx, by] = spec.control_bounds;
    loop {
        let u = Vec2::new(rng.gen_range(bx[0]..=bx[1]), rng.gen_range(by[0]..=by[1]));
        match spec.control_norm_bound {
            Some(r) if u.norm() > r => continue,
            _ => return u,
        }
    }
}

/// Default empowerment horizon: the worst-case stopping time from maximum
/// velocity, `v_max / a_max`.
pub fn default_horizon(spec: &SystemSpec) -> f64 {
    spec.v_max / spec.a_max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    fn undamped_point_mass() -> SystemSpec {
        SystemSpec { linear_damping: 0.0, ..SystemSpec::point_mass_2d() }
    }

    #[test]
    fn derivative_newton_from_rest() {
        let spec = undamped_point_mass();
        let x = SystemState::at_rest(Vec2::ZERO);
        let d = derivative(&spec, &x, Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(d.dp, Vec2::ZERO);
        assert_eq!(d.dv, Vec2::new(1.0, 0.0));
    }

    #[test]
    fn derivative_pure_damping() {
        let spec = SystemSpec { linear_damping: 0.5, ..SystemSpec::point_mass_2d() };
        let x = SystemState::new(Vec2::ZERO, Vec2::new(2.0, 0.0));
        let d = derivative(&spec, &x, Vec2::ZERO).unwrap();
        assert_eq!(d.dv, Vec2::new(-1.0, 0.0));
    }

    #[test]
    fn derivative_rejects_out_of_bounds_control() {
        let spec = SystemSpec::point_mass_2d();
        let x = SystemState::at_rest(Vec2::ZERO);
        let err = derivative(&spec, &x, Vec2::new(5.0, 0.0));
        assert!(matches!(err, Err(Error::ControlOutOfBounds(_))));
    }

    #[test]
    fn integrate_constant_force_matches_half_a_t_squared() {
        let spec = SystemSpec { v_max: 10.0, ..undamped_point_mass() };
        let x0 = SystemState::at_rest(Vec2::ZERO);
        let ctrl = PiecewiseControl::constant(Vec2::new(1.0, 0.0), 1.0).unwrap();
        let traj = integrate(&spec, &x0, &ctrl, 1.0, 100).unwrap();
        let end = traj.final_state();
        assert!((end.position.x - 0.5).abs() < 1e-9);
        assert!(end.position.y.abs() < 1e-12);
        assert!((end.velocity.x - 1.0).abs() < 1e-9);
        assert_eq!(traj.states.len(), 101);
    }

    #[test]
    fn integrate_ballistic_drift() {
        let spec = SystemSpec { v_max: 10.0, ..undamped_point_mass() };
        let x0 = SystemState::new(Vec2::new(1.0, -1.0), Vec2::new(1.0, 1.0));
        let ctrl = PiecewiseControl::constant(Vec2::ZERO, 2.0).unwrap();
        let traj = integrate(&spec, &x0, &ctrl, 2.0, 200).unwrap();
        let end = traj.final_state();
        assert!((end.position.x - 3.0).abs() < 1e-9);
        assert!((end.position.y - 1.0).abs() < 1e-9);
    }

    /// Closed-form oracle: under pure damping, v(t) = v0·exp(-βt). The RK4
    /// error at dt = 1/100 must be below 1e-6 and drop by at least 8x when
    /// the step is halved (4th-order convergence, empirically ~16x).
    #[test]
    fn integrate_damped_decay_and_rk4_order() {
        let spec = SystemSpec { linear_damping: 1.0, ..SystemSpec::point_mass_2d() };
        let x0 = SystemState::new(Vec2::ZERO, Vec2::new(1.0, 0.0));
        let ctrl = PiecewiseControl::constant(Vec2::ZERO, 1.0).unwrap();
        let exact = (-1.0f64).exp();

        let v_at = |steps: usize| {
            integrate(&spec, &x0, &ctrl, 1.0, steps).unwrap().final_state().velocity.x
        };
        let err_100 = (v_at(100) - exact).abs();
        let err_200 = (v_at(200) - exact).abs();
        assert!(err_100 < 1e-6, "RK4 error {err_100} too large");
        assert!(err_100 / err_200 >= 8.0, "order check: {err_100} / {err_200}");
    }

    #[test]
    fn integrate_is_deterministic() {
        let spec = SystemSpec::point_mass_2d();
        let x0 = SystemState::new(Vec2::new(0.3, 0.4), Vec2::new(-0.5, 0.2));
        let ctrl = sample_control(&mut substream(9, 0), &spec, SamplingMode::Piecewise(5), 1.0)
            .unwrap();
        let a = integrate(&spec, &x0, &ctrl, 1.0, 100).unwrap();
        let b = integrate(&spec, &x0, &ctrl, 1.0, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn velocity_clamp_bounds_speed() {
        let spec = SystemSpec::point_mass_2d(); // v_max = 2
        let mut rng = substream(10, 0);
        for _ in 0..50 {
            let ctrl =
                sample_control(&mut rng, &spec, SamplingMode::Piecewise(4), 2.0).unwrap();
            let x0 = SystemState::new(Vec2::ZERO, Vec2::new(1.9, 0.0));
            let traj = integrate(&spec, &x0, &ctrl, 2.0, 100).unwrap();
            for s in &traj.states {
                assert!(s.velocity.norm() <= spec.v_max + 1e-9);
            }
        }
    }

    #[test]
    fn integrate_detects_non_finite_states() {
        let spec = SystemSpec { mass: 1e-320, ..SystemSpec::point_mass_2d() };
        let x0 = SystemState::at_rest(Vec2::ZERO);
        let ctrl = PiecewiseControl::constant(Vec2::new(1.0, 0.0), 1.0).unwrap();
        match integrate(&spec, &x0, &ctrl, 1.0, 10) {
            Err(Error::NonFiniteState { step }) => assert_eq!(step, 0),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn sample_constant_mode_single_segment_in_bounds() {
        let spec = SystemSpec {
            control_bounds: [[-1.0, 1.0], [-1.0, 1.0]],
            ..SystemSpec::point_mass_2d()
        };
        let ctrl =
            sample_control(&mut substream(42, 0), &spec, SamplingMode::Constant, 1.0).unwrap();
        assert_eq!(ctrl.segments.len(), 1);
        assert!(spec.control_admissible(ctrl.segments[0]));
    }

    #[test]
    fn sample_piecewise_partitions_horizon() {
        let spec = SystemSpec::point_mass_2d();
        let ctrl =
            sample_control(&mut substream(1, 0), &spec, SamplingMode::Piecewise(4), 1.0).unwrap();
        assert_eq!(ctrl.segments.len(), 4);
        assert!((ctrl.segment_duration - 0.25).abs() < 1e-15);
        assert!((ctrl.horizon() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sample_control_is_seed_deterministic() {
        let spec = SystemSpec::point_mass_2d();
        let a = sample_control(&mut substream(42, 0), &spec, SamplingMode::Piecewise(5), 1.0)
            .unwrap();
        let b = sample_control(&mut substream(42, 0), &spec, SamplingMode::Piecewise(5), 1.0)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_controls_stay_admissible() {
        let specs = [SystemSpec::point_mass_2d(), SystemSpec::single_integrator_2d(1.0)];
        for spec in &specs {
            let mut rng = substream(7, 3);
            for _ in 0..10_000 {
                let ctrl =
                    sample_control(&mut rng, spec, SamplingMode::Piecewise(2), 1.0).unwrap();
                for &u in &ctrl.segments {
                    assert!(spec.control_admissible(u));
                }
            }
        }
    }

    #[test]
    fn default_horizon_examples() {
        let spec = SystemSpec::point_mass_2d(); // v_max 2, a_max 2
        assert_eq!(default_horizon(&spec), 1.0);
        let degenerate = SystemSpec { v_max: 0.0, ..spec.clone() };
        assert_eq!(default_horizon(&degenerate), 0.0);
        let slow = SystemSpec { v_max: 3.0, a_max: 1.5, ..spec };
        assert_eq!(default_horizon(&slow), 2.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        /// Piecewise evaluation returns the segment containing t, and the
        /// horizon endpoint maps to the last segment.
        #[test]
        fn piecewise_lookup(k in 1usize..8, frac in 0.0f64..1.0) {
            let segments: Vec<ControlInput> =
                (0..k).map(|i| Vec2::new(i as f64, 0.0)).collect();
            let ctrl = PiecewiseControl::new(segments, 0.5).unwrap();
            let horizon = ctrl.horizon();
            let t = frac * horizon;
            let expect = ((t / 0.5).floor() as usize).min(k - 1);
            prop_assert_eq!(ctrl.value_at(t).x, expect as f64);
            prop_assert_eq!(ctrl.value_at(horizon).x, (k - 1) as f64);
        }
    }
}
