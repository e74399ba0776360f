//! Two-phase scenario orchestration: optimal impedance reference, conversion to
//! joint space, and closed-loop neuro-adaptive tracking on the arm.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector6};

use crate::controller::{ControllerGains, NeuroAdaptivePid, RbfNetwork, TrackingState};
use crate::error::{Error, Result};
use crate::integrator::{rk4_step, step_count};
use crate::interaction::{HumanParams, Horizon, ImpedanceParams, InteractionModel, MatrixSchedule};
use crate::manipulator::{ElbowBranch, JointState, ManipulatorParams, SINGULARITY_THRESHOLD};
use crate::riccati::{
    rollout, solve_riccati_backward_with, LqProblem, OptimalTrajectory, RiccatiSolution,
    DEFAULT_GUARD_STEPS,
};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_TF: f64 = 10.0;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_NODES: usize = 20;
pub const DEFAULT_WIDTH: f64 = 1.0;
pub const DEFAULT_SETTLE_TIME: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub q: MatrixSchedule,
    pub s: MatrixSchedule,
    pub r: MatrixSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOptions {
    pub nodes: usize,
    pub seed: u64,
    pub width: f64,
    /// Divisors applied to `e`, `ė` and `e_c` before feature evaluation.
    pub scales: [f64; 3],
}

impl Default for NetworkOptions {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            seed: DEFAULT_SEED,
            width: DEFAULT_WIDTH,
            scales: [1.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub robot: ManipulatorParams,
    pub interaction: InteractionModel,
    pub cost: CostWeights,
    pub x0: DVector<f64>,
    pub xf: DVector<f64>,
    pub horizon: Horizon,
    /// Phase 1 grid step; every reported series lives on this grid.
    pub step: f64,
    /// Phase 2 integration step; must divide `step`.
    pub tracking_step: f64,
    pub guard_steps: usize,
    pub gains: ControllerGains,
    pub network: NetworkOptions,
    pub branch: ElbowBranch,
    /// Added to `q_d(t0)` to form the initial arm configuration.
    pub initial_offset: Vector2<f64>,
    pub settle_time: f64,
}

impl ScenarioConfig {
    /// The benchmark scenario: two 5 kg, 1 m links moving the end effector
    /// from (-0.5, 1) to (0.8, -0.6) at rest over ten seconds.
    pub fn benchmark() -> Self {
        let m = |rows: &[f64]| DMatrix::from_row_slice(2, 2, rows);
        let interaction = InteractionModel {
            impedance: ImpedanceParams {
                mass: MatrixSchedule::constant(m(&[5.0, 1.0, 1.0, -3.0])),
                damping: MatrixSchedule::constant(m(&[20.0, 0.0, 5.0, 15.0])),
                stiffness: MatrixSchedule::constant(m(&[1.0, 0.5, 0.0, 0.0])),
            },
            human: HumanParams {
                damping: MatrixSchedule::constant(DMatrix::identity(2, 2) * 10.0),
                stiffness: MatrixSchedule::constant(DMatrix::identity(2, 2) * 2.0),
                gain: MatrixSchedule::identity(2),
            },
        };
        let network = NetworkOptions::default();
        Self {
            robot: ManipulatorParams::default(),
            interaction,
            cost: CostWeights {
                q: MatrixSchedule::identity(6),
                s: MatrixSchedule::zeros(6, 2),
                r: MatrixSchedule::identity(2),
            },
            x0: DVector::from_vec(vec![-0.5, 1.0, 0.0, 0.0, 0.0, 0.0]),
            xf: DVector::from_vec(vec![0.8, -0.6, 0.0, 0.0, 0.0, 0.0]),
            horizon: Horizon { t0: 0.0, tf: DEFAULT_TF },
            step: DEFAULT_STEP,
            tracking_step: DEFAULT_STEP,
            guard_steps: DEFAULT_GUARD_STEPS,
            gains: ControllerGains {
                zeta: 0.1,
                k_rc: 50.0,
                alpha: 10.0,
                sigma: 0.1,
                gamma: DMatrix::identity(network.nodes, network.nodes),
            },
            network,
            branch: ElbowBranch::Down,
            initial_offset: Vector2::zeros(),
            settle_time: DEFAULT_SETTLE_TIME,
        }
        .bound_to_horizon()
    }

    /// Restricts every schedule to the configured horizon.
    pub fn bound_to_horizon(mut self) -> Self {
        let h = self.horizon;
        let bind = |s: &mut MatrixSchedule| *s = s.clone().within(h);
        let imp = &mut self.interaction.impedance;
        let hum = &mut self.interaction.human;
        for s in [
            &mut imp.mass,
            &mut imp.damping,
            &mut imp.stiffness,
            &mut hum.damping,
            &mut hum.stiffness,
            &mut hum.gain,
            &mut self.cost.q,
            &mut self.cost.s,
            &mut self.cost.r,
        ] {
            bind(s);
        }
        self
    }

    /// Checks everything that can be checked before integrating.
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.interaction.validate(&self.horizon)?;
        self.gains.validate()?;
        self.lq_problem()?;
        let intervals = step_count(self.horizon.t0, self.horizon.tf, self.step)
            .map_err(|e| Error::config("simulation.step", e.to_string()))?;
        if self.guard_steps >= intervals {
            return Err(Error::config(
                "simulation.guard_steps",
                format!("must be smaller than the {intervals} grid intervals"),
            ));
        }
        self.tracking_refinement()?;
        if self.network.nodes == 0 {
            return Err(Error::config("controller.nodes", "must be at least 1"));
        }
        if self.gains.gamma.nrows() != self.network.nodes {
            return Err(Error::config(
                "controller.gamma",
                format!("must be {0}x{0} to match controller.nodes", self.network.nodes),
            ));
        }
        RbfNetwork::seeded(1, 0, self.network.width, self.network.scales)?;
        if !self.initial_offset.iter().all(|v| v.is_finite()) {
            return Err(Error::config("tracking.initial_offset", "must be finite"));
        }
        if !(self.settle_time >= self.horizon.t0 && self.settle_time.is_finite()) {
            return Err(Error::config("tracking.settle_time", "must be a finite time inside the horizon"));
        }
        Ok(())
    }

    pub fn lq_problem(&self) -> Result<LqProblem<InteractionModel>> {
        LqProblem::new(
            self.interaction.clone(),
            self.cost.q.clone(),
            self.cost.s.clone(),
            self.cost.r.clone(),
            self.horizon,
            self.x0.clone(),
            self.xf.clone(),
        )
    }

    fn tracking_refinement(&self) -> Result<usize> {
        let ratio = self.step / self.tracking_step;
        let refine = ratio.round();
        if !(self.tracking_step > 0.0) || !(refine >= 1.0) || (ratio - refine).abs() > 1e-9 * ratio {
            return Err(Error::config(
                "tracking.step",
                format!("must divide the grid step {} by an integer", self.step),
            ));
        }
        Ok(refine as usize)
    }

    pub fn controller(&self) -> Result<NeuroAdaptivePid> {
        let net = RbfNetwork::seeded(
            self.network.nodes,
            self.network.seed,
            self.network.width,
            self.network.scales,
        )?;
        NeuroAdaptivePid::new(self.gains.clone(), net)
    }
}

/// Cartesian impedance reference and human force on the shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianReference {
    pub times: Vec<f64>,
    pub position: Vec<Vector2<f64>>,
    pub velocity: Vec<Vector2<f64>>,
    pub force: Vec<Vector2<f64>>,
}

impl CartesianReference {
    pub fn from_trajectory(traj: &OptimalTrajectory) -> Result<Self> {
        let mut out = Self {
            times: traj.times.clone(),
            position: Vec::with_capacity(traj.len()),
            velocity: Vec::with_capacity(traj.len()),
            force: Vec::with_capacity(traj.len()),
        };
        for x in &traj.states {
            if x.len() != 6 {
                return Err(Error::InvalidArgument(format!(
                    "expected a 6-dimensional unified state, got {}",
                    x.len()
                )));
            }
            out.position.push(Vector2::new(x[0], x[1]));
            out.velocity.push(Vector2::new(x[2], x[3]));
            out.force.push(Vector2::new(x[4], x[5]));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub cartesian: CartesianReference,
    pub q_d: Vec<Vector2<f64>>,
    pub qdot_d: Vec<Vector2<f64>>,
}

impl ReferenceTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.cartesian.times
    }

    pub fn len(&self) -> usize {
        self.q_d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_d.is_empty()
    }

    fn grid_step(&self) -> Result<(f64, f64)> {
        let t = self.times();
        if t.len() < 2 {
            return Err(Error::InvalidArgument("reference needs at least two samples".into()));
        }
        let h = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        let uniform = t
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
        if !(h > 0.0) || !uniform {
            return Err(Error::InvalidArgument("reference grid must be uniform and increasing".into()));
        }
        Ok((t[0], h))
    }

    /// `(q_d, q̇_d, f_h)` at `t`: cubic Hermite for `q_d`, linear for the rest.
    fn sample(&self, t0: f64, h: f64, t: f64) -> (Vector2<f64>, Vector2<f64>, Vector2<f64>) {
        let n = self.len() - 1;
        let s = ((t - t0) / h).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        let a = s - k as f64;
        let lin = |v: &[Vector2<f64>]| v[k] * (1.0 - a) + v[k + 1] * a;
        let (a2, a3) = (a * a, a * a * a);
        let q = self.q_d[k] * (2.0 * a3 - 3.0 * a2 + 1.0)
            + self.qdot_d[k] * ((a3 - 2.0 * a2 + a) * h)
            + self.q_d[k + 1] * (3.0 * a2 - 2.0 * a3)
            + self.qdot_d[k + 1] * ((a3 - a2) * h);
        (q, lin(&self.qdot_d), lin(&self.cartesian.force))
    }
}

/// Builds and solves the fixed-endpoint problem, returning the Riccati
/// solution and the closed-loop optimal trajectory.
pub fn phase1_solve(config: &ScenarioConfig) -> Result<(RiccatiSolution, OptimalTrajectory)> {
    let problem = config.lq_problem()?;
    let sol = solve_riccati_backward_with(&problem, config.step, config.guard_steps)?;
    let traj = rollout(&problem, &sol, config.step)?;
    Ok((sol, traj))
}

pub fn phase1_optimize(config: &ScenarioConfig) -> Result<(OptimalTrajectory, CartesianReference)> {
    let (_, traj) = phase1_solve(config)?;
    let cart = CartesianReference::from_trajectory(&traj)?;
    Ok((traj, cart))
}

/// Branch-continuous inverse kinematics along the Cartesian reference.
pub fn cartesian_to_joint_reference(
    robot: &ManipulatorParams,
    branch: ElbowBranch,
    cartesian: &CartesianReference,
) -> Result<ReferenceTrajectory> {
    let n = cartesian.times.len();
    let mut q_d: Vec<Vector2<f64>> = Vec::with_capacity(n);
    for (k, (t, p)) in cartesian.times.iter().zip(&cartesian.position).enumerate() {
        let q = match k {
            0 => robot.inverse_kinematics(p, branch),
            _ => robot.inverse_kinematics_near(p, branch, &q_d[k - 1]),
        }
        .map_err(|e| Error::ReferenceUnreachable {
            t: *t,
            source: Box::new(e),
        })?;
        q_d.push(q);
    }

    let mut qdot_d = Vec::with_capacity(n);
    for k in 0..n {
        let jac: Matrix2<f64> = robot.jacobian(&q_d[k]);
        let inverse = (jac.determinant().abs() > SINGULARITY_THRESHOLD)
            .then(|| jac.try_inverse())
            .flatten();
        let qd = match inverse {
            Some(inv) => inv * cartesian.velocity[k],
            None if n < 2 => Vector2::zeros(),
            None => {
                let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
                (q_d[b] - q_d[a]) / (cartesian.times[b] - cartesian.times[a])
            }
        };
        qdot_d.push(qd);
    }
    Ok(ReferenceTrajectory {
        cartesian: cartesian.clone(),
        q_d,
        qdot_d,
    })
}

/// Closed-loop series sampled on the reference grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackingRecord {
    pub times: Vec<f64>,
    pub q: Vec<Vector2<f64>>,
    pub qdot: Vec<Vector2<f64>>,
    pub q_d: Vec<Vector2<f64>>,
    pub e: Vec<Vector2<f64>>,
    pub e_dot: Vec<Vector2<f64>>,
    pub e_int: Vec<Vector2<f64>>,
    pub e_c: Vec<Vector2<f64>>,
    pub tau: Vec<Vector2<f64>>,
    pub k_r: Vec<f64>,
    pub theta_norm: Vec<f64>,
    pub theta_final: DVector<f64>,
}

impl TrackingRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn pack(q: &Vector2<f64>, qdot: &Vector2<f64>, e_int: &Vector2<f64>, theta: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(6 + theta.len());
    y.fixed_rows_mut::<2>(0).copy_from(q);
    y.fixed_rows_mut::<2>(2).copy_from(qdot);
    y.fixed_rows_mut::<2>(4).copy_from(e_int);
    y.rows_mut(6, theta.len()).copy_from(theta);
    y
}

struct Unpacked {
    q: Vector2<f64>,
    qdot: Vector2<f64>,
    e_int: Vector2<f64>,
    theta: DVector<f64>,
}

fn unpack(y: &DVector<f64>) -> Unpacked {
    Unpacked {
        q: y.fixed_rows::<2>(0).into_owned(),
        qdot: y.fixed_rows::<2>(2).into_owned(),
        e_int: y.fixed_rows::<2>(4).into_owned(),
        theta: y.rows(6, y.len() - 6).into_owned(),
    }
}

/// Integrates arm, error integral and network weights as one RK4 system.
pub fn phase2_track(config: &ScenarioConfig, reference: &ReferenceTrajectory) -> Result<TrackingRecord> {
    let (t0, h) = reference.grid_step()?;
    let refine = config.tracking_refinement()?;
    let dt = h / refine as f64;
    let pid = config.controller()?;
    let robot = &config.robot;

    let eval = |t: f64, s: &Unpacked| {
        let (q_d, qdot_d, f_h) = reference.sample(t0, h, t);
        let state = TrackingState {
            e: q_d - s.q,
            e_int: s.e_int,
            e_dot: qdot_d - s.qdot,
            e_c: Vector2::zeros(),
            theta_hat: s.theta.clone(),
        };
        let out = pid.evaluate(&state);
        (q_d, state, out, f_h)
    };
    let deriv = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let s = unpack(y);
        let (_, state, out, f_h) = eval(t, &s);
        let qddot = robot.forward_dynamics(&JointState::new(s.q, s.qdot), &out.tau, &f_h);
        Ok(pack(&s.qdot, &qddot, &state.e, &out.theta_dot))
    };

    let q0 = reference.q_d[0] + config.initial_offset;
    let mut y = pack(&q0, &reference.qdot_d[0], &Vector2::zeros(), &pid.network.theta_hat);
    let n = reference.len();
    let mut rec = TrackingRecord::default();
    for k in 0..n {
        let t = reference.times()[k];
        let s = unpack(&y);
        let (q_d, state, out, _) = eval(t, &s);
        if !out.tau.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "tracking state",
                t,
            });
        }
        rec.times.push(t);
        rec.q.push(s.q);
        rec.qdot.push(s.qdot);
        rec.q_d.push(q_d);
        rec.e.push(state.e);
        rec.e_dot.push(state.e_dot);
        rec.e_int.push(state.e_int);
        rec.e_c.push(out.e_c);
        rec.tau.push(out.tau);
        rec.k_r.push(out.k_r);
        rec.theta_norm.push(s.theta.norm());
        if k + 1 == n {
            rec.theta_final = s.theta;
            break;
        }
        for j in 0..refine {
            let tj = t + j as f64 * dt;
            y = rk4_step(&deriv, tj, &y, dt).map_err(|e| match e {
                Error::NonFinite { t, .. } => Error::NonFinite {
                    context: "tracking state",
                    t,
                },
                other => other,
            })?;
        }
    }
    Ok(rec)
}

/// Summary numbers reported alongside the series, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub entries: Vec<(String, f64)>,
}

impl Metrics {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    fn push(&mut self, key: &str, value: f64) {
        self.entries.push((key.to_string(), value));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub optimal: OptimalTrajectory,
    pub reference: ReferenceTrajectory,
    pub tracking: TrackingRecord,
    pub metrics: Metrics,
}

impl Metrics {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn extend(&mut self, other: Metrics) {
        self.entries.extend(other.entries);
    }
}

impl Default for Metrics {
    fn default() -> Self {
        Self::new()
    }
}

pub fn phase1_metrics(config: &ScenarioConfig, optimal: &OptimalTrajectory) -> Metrics {
    let mut m = Metrics::new();
    let xt = optimal.terminal_state();
    m.push("cost", optimal.cost);
    m.push("terminal_state_error", (xt - &config.xf).norm());
    m.push(
        "terminal_position_error",
        (xt.rows(0, 2) - config.xf.rows(0, 2)).norm(),
    );
    m.push("terminal_velocity", xt.rows(2, 2).norm());
    m.push(
        "max_human_force",
        optimal.states.iter().map(|x| x.rows(4, 2).norm()).fold(0.0, f64::max),
    );
    m
}

pub fn tracking_metrics(config: &ScenarioConfig, tracking: &TrackingRecord) -> Metrics {
    let mut m = Metrics::new();
    let max_norm = |v: &[Vector2<f64>], from: f64| {
        tracking
            .times
            .iter()
            .zip(v)
            .filter(|(t, _)| **t > from)
            .map(|(_, x)| x.norm())
            .fold(0.0, f64::max)
    };
    let last = |v: &[Vector2<f64>]| v.last().map_or(0.0, |x| x.norm());
    m.push("max_tracking_error_after_settle", max_norm(&tracking.e, config.settle_time));
    m.push("final_tracking_error", last(&tracking.e));
    m.push("max_commutative_error", max_norm(&tracking.e_c, f64::NEG_INFINITY));
    m.push("final_commutative_error", last(&tracking.e_c));
    m.push(
        "max_theta_norm",
        tracking.theta_norm.iter().copied().fold(0.0, f64::max),
    );
    m.push("max_torque", max_norm(&tracking.tau, f64::NEG_INFINITY));
    m
}

/// The effective settings, defaults included.
pub fn setting_metrics(config: &ScenarioConfig) -> Metrics {
    let mut m = Metrics::new();
    m.push("t0", config.horizon.t0);
    m.push("tf", config.horizon.tf);
    m.push("step", config.step);
    m.push("tracking_step", config.tracking_step);
    m.push("settle_time", config.settle_time);
    m.push("rbf_nodes", config.network.nodes as f64);
    m.push("rbf_seed", config.network.seed as f64);
    m
}

pub fn compute_metrics(config: &ScenarioConfig, optimal: &OptimalTrajectory, tracking: &TrackingRecord) -> Metrics {
    let mut m = phase1_metrics(config, optimal);
    m.extend(tracking_metrics(config, tracking));
    m.extend(setting_metrics(config));
    m
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationReport> {
    config.validate()?;
    let (optimal, cartesian) = phase1_optimize(config).map_err(|e| e.in_phase("phase 1 optimization"))?;
    let reference = cartesian_to_joint_reference(&config.robot, config.branch, &cartesian)
        .map_err(|e| e.in_phase("reference conversion"))?;
    let tracking = phase2_track(config, &reference).map_err(|e| e.in_phase("phase 2 tracking"))?;
    let metrics = compute_metrics(config, &optimal, &tracking);
    Ok(SimulationReport {
        optimal,
        reference,
        tracking,
        metrics,
    })
}

/// Unforced, undamped arm under gravity only.
pub fn simulate_passive(robot: &ManipulatorParams, start: JointState, step: f64, steps: usize) -> Result<Vec<JointState>> {
    let zero = Vector2::zeros();
    let mut y = DVector::from_vec(vec![start.q[0], start.q[1], start.qdot[0], start.qdot[1]]);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    for k in 0..steps {
        y = rk4_step(
            |_, y| {
                let s = JointState::new(Vector2::new(y[0], y[1]), Vector2::new(y[2], y[3]));
                let a = robot.forward_dynamics(&s, &zero, &zero);
                Ok(DVector::from_vec(vec![y[2], y[3], a[0], a[1]]))
            },
            k as f64 * step,
            &y,
            step,
        )?;
        out.push(JointState::new(Vector2::new(y[0], y[1]), Vector2::new(y[2], y[3])));
    }
    Ok(out)
}

/// `z = [e, ė, e_c]` as recorded at sample `k`.
pub fn recorded_network_input(rec: &TrackingRecord, k: usize) -> Vector6<f64> {
    crate::controller::network_input(&rec.e[k], &rec.e_dot[k], &rec.e_c[k])
}
