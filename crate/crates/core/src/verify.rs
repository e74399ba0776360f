//! Randomized property and oracle checks, shared by the `verify` command and
//! the test suites.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector, Vector2, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{adapt_from, commutative_error, ControllerGains, RbfNetwork};
use crate::error::{Error, Result};
use crate::integrator::rk4_integrate;
use crate::interaction::{Horizon, MatrixSchedule};
use crate::manipulator::{ElbowBranch, JointState, ManipulatorParams};
use crate::riccati::{
    rollout, solve_riccati_backward, LinearSystem, LqProblem, RiccatiSolution, ScheduledSystem,
};
use crate::transcription::transcription_oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Manipulator,
    Riccati,
    Controller,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "manipulator" => Some(Suite::Manipulator),
            "riccati" => Some(Suite::Riccati),
            "controller" => Some(Suite::Controller),
            "all" => Some(Suite::All),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.limit
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}/{}: {:.3e} (limit {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.value,
            self.limit
        )
    }
}

fn random_state<R: Rng>(rng: &mut R, speed: f64) -> JointState {
    JointState::new(
        Vector2::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI)),
        Vector2::new(rng.random_range(-speed..speed), rng.random_range(-speed..speed)),
    )
}

/// Largest `|λᵀ(Ṁ_r - 2C_r)λ|` over random states and directions.
pub fn joint_skew_residual<R: Rng>(robot: &ManipulatorParams, rng: &mut R, cases: usize) -> f64 {
    (0..cases)
        .map(|_| {
            let s = random_state(rng, 3.0);
            let lam = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = robot.mass_matrix_dot(&s.q, &s.qdot) - robot.coriolis_matrix(&s.q, &s.qdot) * 2.0;
            lam.dot(&(n * lam)).abs()
        })
        .fold(0.0, f64::max)
}

/// Cartesian counterpart with `Ṁ_c` from a five-point difference along `q̇`;
/// configurations closer than `|det J| = 0.1` to a singularity are skipped.
pub fn cartesian_skew_residual<R: Rng>(robot: &ManipulatorParams, rng: &mut R, cases: usize) -> Result<f64> {
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < cases {
        let s = random_state(rng, 1.0);
        if robot.jacobian(&s.q).determinant().abs() < 0.1 {
            continue;
        }
        done += 1;
        let lam = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let at = |dq: f64| robot.cartesian_dynamics(&JointState::new(s.q + s.qdot * dq, s.qdot));
        let m_dot = (at(-2.0 * eps)?.mass - at(2.0 * eps)?.mass + (at(eps)?.mass - at(-eps)?.mass) * 8.0)
            / (12.0 * eps);
        let c = robot.cartesian_dynamics(&s)?.coriolis;
        worst = worst.max(lam.dot(&((m_dot - c * 2.0) * lam)).abs());
    }
    Ok(worst)
}

/// Largest `|FK(IK(p)) - p|` over random reachable targets and both branches.
pub fn fk_ik_residual<R: Rng>(robot: &ManipulatorParams, rng: &mut R, cases: usize) -> Result<f64> {
    let (inner, outer) = robot.reach();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let r = rng.random_range(inner..=outer);
        let a = rng.random_range(-PI..PI);
        let p = Vector2::new(r * a.cos(), r * a.sin());
        for branch in [ElbowBranch::Up, ElbowBranch::Down] {
            let q = robot.inverse_kinematics(&p, branch)?;
            worst = worst.max((robot.forward_kinematics(&q) - p).norm());
        }
    }
    Ok(worst)
}

pub fn jacobian_fd_residual<R: Rng>(robot: &ManipulatorParams, rng: &mut R, cases: usize) -> f64 {
    let eps = 1e-6;
    (0..cases)
        .map(|_| {
            let q = Vector2::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI));
            let j = robot.jacobian(&q);
            (0..2)
                .map(|c| {
                    let mut d = Vector2::zeros();
                    d[c] = eps;
                    let fd = (robot.forward_kinematics(&(q + d)) - robot.forward_kinematics(&(q - d))) / (2.0 * eps);
                    (fd - j.column(c)).amax()
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Smallest eigenvalue of `∫₀¹ e^{Aτ} B R⁻¹ Bᵀ e^{Aᵀτ} dτ`.
pub fn controllability_margin(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    let r_inv = r.clone().try_inverse().ok_or(Error::SingularMatrix { what: "R", t: 0.0 })?;
    let forcing = b * r_inv * b.transpose();
    let steps = 1000;
    let w = rk4_integrate(
        |_, y| {
            let w = DMatrix::from_column_slice(n, n, y.as_slice());
            let d = a * &w + &w * a.transpose() + &forcing;
            Ok(DVector::from_column_slice(d.as_slice()))
        },
        0.0,
        DVector::zeros(n * n),
        1.0 / steps as f64,
        steps,
    )?;
    let w = DMatrix::from_column_slice(n, n, w[steps].as_slice());
    Ok(((&w + w.transpose()) * 0.5).symmetric_eigenvalues().min())
}

/// Problems whose horizon Gramian is smaller than this are redrawn.
pub const MIN_CONTROLLABILITY: f64 = 1e-4;

/// Upper bound on redraws in [`random_lq_problem`].
const MAX_DRAWS: usize = 10_000;

/// Input width used for random problems with `n` states: single input up to
/// three states, two inputs above (single-input chains of four states are
/// almost never controllable enough on a unit horizon).
pub fn random_input_count(n: usize, pick: usize) -> usize {
    if n >= 4 {
        2
    } else {
        1 + pick % n.min(2)
    }
}

/// A random constant-coefficient problem on `[0, 1]` with `S = 0`, redrawn
/// until it is comfortably controllable over the horizon.
pub fn random_lq_problem<R: Rng>(rng: &mut R, n: usize, m: usize) -> Result<LqProblem<ScheduledSystem>> {
    let mut draws = 0;
    let (a, b, r) = loop {
        draws += 1;
        if draws > MAX_DRAWS {
            return Err(Error::InvalidArgument(format!(
                "no controllable {n}x{m} problem found in {MAX_DRAWS} draws"
            )));
        }
        let a = random_matrix(rng, n, n, 1.0);
        let b = random_matrix(rng, n, m, 1.0);
        let lr = random_matrix(rng, m, m, 1.0);
        let r = &lr * lr.transpose() * 0.5 + DMatrix::identity(m, m) * 0.5;
        if controllability_margin(&a, &b, &r)? >= MIN_CONTROLLABILITY {
            break (a, b, r);
        }
    };
    let lq = random_matrix(rng, n, n, 1.0);
    let q = &lq * lq.transpose() * 0.5;
    LqProblem::new(
        ScheduledSystem::constant(a, b),
        MatrixSchedule::constant(q),
        MatrixSchedule::zeros(n, m),
        MatrixSchedule::constant(r),
        Horizon::new(0.0, 1.0)?,
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub rollout_cost: f64,
    pub oracle_cost: f64,
}

impl OracleComparison {
    pub fn relative_gap(&self) -> f64 {
        (self.rollout_cost - self.oracle_cost).abs() / self.oracle_cost.max(1.0)
    }
}

pub fn compare_with_oracle<S: LinearSystem>(
    problem: &LqProblem<S>,
    step: f64,
    intervals: usize,
) -> Result<OracleComparison> {
    let sol = solve_riccati_backward(problem, step)?;
    let traj = rollout(problem, &sol, step)?;
    let oracle = transcription_oracle(problem, intervals)?;
    Ok(OracleComparison {
        rollout_cost: traj.cost,
        oracle_cost: oracle.cost,
    })
}

/// Largest entry of the centered-difference `dP/dt` minus the Riccati
/// right-hand side over interior grid nodes.
pub fn riccati_residual<S: LinearSystem>(problem: &LqProblem<S>, sol: &RiccatiSolution) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 1..sol.intervals() {
        let fd = (&sol.p[k + 1] - &sol.p[k - 1]) / (2.0 * sol.step);
        let rhs = problem.coefficients(sol.time(k))?.riccati_rhs(&sol.p[k]);
        worst = worst.max((fd - rhs).amax());
    }
    Ok(worst)
}

pub fn scalar_riccati_error(step: f64) -> Result<f64> {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let problem = LqProblem::new(
        ScheduledSystem::constant(one(0.0), one(1.0)),
        MatrixSchedule::zeros(1, 1),
        MatrixSchedule::zeros(1, 1),
        MatrixSchedule::identity(1),
        Horizon::new(0.0, 1.0)?,
        DVector::zeros(1),
        DVector::from_element(1, 1.0),
    )?;
    let sol = solve_riccati_backward(&problem, step)?;
    Ok((0..=sol.intervals())
        .map(|k| (sol.p[k][(0, 0)] - (1.0 - sol.time(k))).abs())
        .fold(0.0, f64::max))
}

pub fn double_integrator() -> Result<LqProblem<ScheduledSystem>> {
    LqProblem::new(
        ScheduledSystem::constant(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        ),
        MatrixSchedule::zeros(2, 2),
        MatrixSchedule::zeros(2, 1),
        MatrixSchedule::identity(1),
        Horizon::new(0.0, 1.0)?,
        DVector::zeros(2),
        DVector::from_vec(vec![1.0, 0.0]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleIntegratorCheck {
    pub cost: f64,
    /// RMS distance to `(3t² - 2t³, 6t - 6t²)`.
    pub state_rms: f64,
    /// Largest `|u - (6 - 12t)|` on `[0, 0.95]`.
    pub control_error: f64,
}

pub fn double_integrator_check(step: f64) -> Result<DoubleIntegratorCheck> {
    let problem = double_integrator()?;
    let sol = solve_riccati_backward(&problem, step)?;
    let traj = rollout(&problem, &sol, step)?;
    let mut sq = 0.0;
    let mut control_error: f64 = 0.0;
    for ((t, x), u) in traj.times.iter().zip(&traj.states).zip(&traj.controls) {
        let exact = Vector2::new(3.0 * t * t - 2.0 * t * t * t, 6.0 * t - 6.0 * t * t);
        sq += (x[0] - exact[0]).powi(2) + (x[1] - exact[1]).powi(2);
        if *t <= 0.95 {
            control_error = control_error.max((u[0] - (6.0 - 12.0 * t)).abs());
        }
    }
    Ok(DoubleIntegratorCheck {
        cost: traj.cost,
        state_rms: (sq / traj.len() as f64).sqrt(),
        control_error,
    })
}

/// Max deviation of the RK4-integrated leakage-only weight law from
/// `exp(-Γσt) θ̂0` at every step up to `t_end`.
pub fn leakage_decay_error(gains: &ControllerGains, theta0: &DVector<f64>, t_end: f64, step: f64) -> Result<f64> {
    let steps = (t_end / step).round() as usize;
    let phi = DVector::from_element(theta0.len(), 0.5);
    let traj = rk4_integrate(
        |_, th| Ok(adapt_from(th, &phi, &Vector2::zeros(), gains)),
        0.0,
        theta0.clone(),
        step,
        steps,
    )?;
    let decay = -(&gains.gamma * gains.sigma);
    Ok(traj
        .iter()
        .enumerate()
        .map(|(k, th)| (th - (&decay * (k as f64 * step)).exp() * theta0).amax())
        .fold(0.0, f64::max))
}

/// Smallest and largest feature value over random inputs.
pub fn feature_range<R: Rng>(net: &RbfNetwork, rng: &mut R, cases: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..cases {
        let z = Vector6::from_fn(|_, _| rng.random_range(-3.0..3.0));
        for v in net.features(&z).iter() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    (lo, hi)
}

fn manipulator_suite(cases: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let robot = ManipulatorParams::default();
    let s = "manipulator";
    Ok(vec![
        Check { suite: s, name: "joint skew symmetry", value: joint_skew_residual(&robot, rng, cases), limit: 1e-10 },
        Check {
            suite: s,
            name: "cartesian skew symmetry",
            value: cartesian_skew_residual(&robot, rng, cases)?,
            limit: 1e-6,
        },
        Check { suite: s, name: "fk of ik", value: fk_ik_residual(&robot, rng, cases)?, limit: 1e-9 },
        Check { suite: s, name: "jacobian finite differences", value: jacobian_fd_residual(&robot, rng, cases), limit: 1e-6 },
    ])
}

fn riccati_suite(cases: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let s = "riccati";
    let di = double_integrator_check(1e-3)?;
    let mut worst_gap: f64 = 0.0;
    let mut worst_asym: f64 = 0.0;
    for _ in 0..cases.min(20) {
        let n = rng.random_range(1..=4);
        let m = random_input_count(n, rng.random_range(0..2));
        let problem = random_lq_problem(rng, n, m)?;
        worst_gap = worst_gap.max(compare_with_oracle(&problem, 1e-3, 100)?.relative_gap());
        worst_asym = worst_asym.max(solve_riccati_backward(&problem, 1e-3)?.max_asymmetry());
    }
    Ok(vec![
        Check { suite: s, name: "scalar sweep", value: scalar_riccati_error(1e-3)?, limit: 1e-12 },
        Check { suite: s, name: "double integrator cost", value: (di.cost - 6.0).abs() / 6.0, limit: 0.01 },
        Check { suite: s, name: "double integrator state rms", value: di.state_rms, limit: 1e-2 },
        Check { suite: s, name: "random problems vs transcription", value: worst_gap, limit: 0.01 },
        Check { suite: s, name: "P symmetry", value: worst_asym, limit: 1e-8 },
    ])
}

fn controller_suite(cases: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let s = "controller";
    let gains = ControllerGains::new(0.1, 50.0, 10.0, 0.1, DMatrix::identity(20, 20))?;
    let theta0 = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
    let net = RbfNetwork::seeded(20, rng.random(), 1.0, [1.0; 3])?;
    let (lo, hi) = feature_range(&net, rng, cases);
    let mut lin: f64 = 0.0;
    for _ in 0..cases {
        let v = |rng: &mut ChaCha8Rng| Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (e, ed, ei) = (v(rng), v(rng), v(rng));
        let a = rng.random_range(-5.0..5.0);
        let lhs = commutative_error(&(e * a), &(ed * a), &(ei * a), gains.zeta);
        lin = lin.max((lhs - commutative_error(&e, &ed, &ei, gains.zeta) * a).amax());
    }
    Ok(vec![
        Check { suite: s, name: "leakage decay", value: leakage_decay_error(&gains, &theta0, 10.0, 1e-3)?, limit: 1e-6 },
        Check { suite: s, name: "feature upper bound excess", value: (hi - 1.0).max(0.0), limit: 0.0 },
        Check { suite: s, name: "feature positivity", value: if lo > 0.0 { 0.0 } else { 1.0 }, limit: 0.0 },
        Check { suite: s, name: "commutative error linearity", value: lin, limit: 1e-12 },
    ])
}

pub fn run_suite(suite: Suite, cases: usize, seed: u64) -> Result<Vec<Check>> {
    if cases == 0 {
        return Err(Error::InvalidArgument("--cases must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if matches!(suite, Suite::Manipulator | Suite::All) {
        out.extend(manipulator_suite(cases, &mut rng)?);
    }
    if matches!(suite, Suite::Riccati | Suite::All) {
        out.extend(riccati_suite(cases, &mut rng)?);
    }
    if matches!(suite, Suite::Controller | Suite::All) {
        out.extend(controller_suite(cases, &mut rng)?);
    }
    Ok(out)
}
