//! Fixed-endpoint finite-horizon LQ control through the inverse differential
//! Riccati equation.
//!
//! For `X' = A X + B u` with cost
//! `1/2 ∫ (X'QX + 2X'Su + u'Ru) dt` and both `X(t0) = X0` and `X(tf) = Xf`
//! prescribed, the optimal input is
//!
//! ```text
//! u* = -R⁻¹SᵀX + R⁻¹Bᵀ P⁻¹ (V - X)
//! ```
//!
//! where `P` and `V` solve
//!
//! ```text
//! P' = AP + PAᵀ + PQP - (PS + B) R⁻¹ (SᵀP + Bᵀ)
//! V' = (A - BR⁻¹Sᵀ + PQ - PSR⁻¹Sᵀ) V
//! ```
//!
//! backward from `P(tf) = 0`, `V(tf) = Xf`. Because `X = V + P λ` (λ the costate) along the
//! optimum, `P(tf) = 0` pins the terminal state while the forward rollout
//! starts exactly at `X0`.
//!
//! `P` is rank deficient at `tf`, so `P⁻¹(V - X)` is evaluated as a
//! pseudo-inverse solve and the control is frozen over a short terminal
//! guard window.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::integrator::{rk4_step, step_count};
use crate::interaction::{Horizon, MatrixSchedule, VALIDATION_SAMPLES};

/// Default terminal guard window, in solution steps.
pub const DEFAULT_GUARD_STEPS: usize = 10;

/// Relative eigenvalue cutoff of the pseudo-inverse used for `P⁻¹(V - X)`.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-13;

/// A linear time-varying system `X' = A(t) X + B(t) u`.
pub trait LinearSystem {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn matrices(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
}

/// A system given directly by `A(t)` and `B(t)` schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledSystem {
    pub a: MatrixSchedule,
    pub b: MatrixSchedule,
}

impl ScheduledSystem {
    pub fn constant(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        Self {
            a: MatrixSchedule::constant(a),
            b: MatrixSchedule::constant(b),
        }
    }
}

impl LinearSystem for ScheduledSystem {
    fn state_dim(&self) -> usize {
        self.a.shape().0
    }

    fn input_dim(&self) -> usize {
        self.b.shape().1
    }

    fn matrices(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((self.a.evaluate(t)?, self.b.evaluate(t)?))
    }
}

impl<T: LinearSystem + ?Sized> LinearSystem for &T {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }

    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn matrices(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        (**self).matrices(t)
    }
}

#[derive(Debug, Clone)]
pub struct LqProblem<S> {
    pub system: S,
    pub q: MatrixSchedule,
    pub s: MatrixSchedule,
    pub r: MatrixSchedule,
    pub horizon: Horizon,
    pub x0: DVector<f64>,
    pub xf: DVector<f64>,
}

/// All matrices of an [`LqProblem`] frozen at one time instant.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub r_inv: DMatrix<f64>,
}

impl<S: LinearSystem> LqProblem<S> {
    /// Builds the problem and checks dimensions, `Q ⪰ 0` and `R ≻ 0` on a
    /// sampled grid of the horizon.
    pub fn new(
        system: S,
        q: MatrixSchedule,
        s: MatrixSchedule,
        r: MatrixSchedule,
        horizon: Horizon,
        x0: DVector<f64>,
        xf: DVector<f64>,
    ) -> Result<Self> {
        let problem = Self {
            system,
            q,
            s,
            r,
            horizon,
            x0,
            xf,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.system.input_dim()
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = (self.state_dim(), self.input_dim());
        let shapes = [
            ("cost.Q", self.q.shape(), (n, n)),
            ("cost.S", self.s.shape(), (n, m)),
            ("cost.R", self.r.shape(), (m, m)),
        ];
        for (key, got, want) in shapes {
            if got != want {
                return Err(Error::config(key, format!("expected shape {want:?}, got {got:?}")));
            }
        }
        for (key, v) in [("boundary.x0", &self.x0), ("boundary.xf", &self.xf)] {
            if v.len() != n {
                return Err(Error::config(key, format!("expected length {n}, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(key, "entries must be finite"));
            }
        }
        for t in self.horizon.samples(VALIDATION_SAMPLES) {
            let (a, b) = self.system.matrices(t)?;
            if a.shape() != (n, n) || b.shape() != (n, m) {
                return Err(Error::InvalidArgument(format!(
                    "system matrices have shapes {:?}, {:?} at t = {t}",
                    a.shape(),
                    b.shape()
                )));
            }
            let r = self.r.evaluate(t).map_err(|e| Error::config("cost.R", e.to_string()))?;
            let scale = r.abs().max().max(1.0);
            if (&r - r.transpose()).abs().max() > 1e-9 * scale {
                return Err(Error::config("cost.R", format!("must be symmetric (t = {t})")));
            }
            let min_eig = r.clone().symmetric_eigenvalues().min();
            if !(min_eig > 1e-12 * scale) {
                return Err(Error::config(
                    "cost.R",
                    format!("must be positive definite; min eigenvalue {min_eig:.3e} at t = {t}"),
                ));
            }
            let q = self.q.evaluate(t).map_err(|e| Error::config("cost.Q", e.to_string()))?;
            let scale = q.abs().max().max(1.0);
            if (&q - q.transpose()).abs().max() > 1e-9 * scale {
                return Err(Error::config("cost.Q", format!("must be symmetric (t = {t})")));
            }
            let min_eig = q.symmetric_eigenvalues().min();
            if min_eig < -1e-10 * scale {
                return Err(Error::config(
                    "cost.Q",
                    format!("must be positive semidefinite; min eigenvalue {min_eig:.3e} at t = {t}"),
                ));
            }
            self.s.evaluate(t).map_err(|e| Error::config("cost.S", e.to_string()))?;
        }
        Ok(())
    }

    pub fn coefficients(&self, t: f64) -> Result<Coefficients> {
        let (a, b) = self.system.matrices(t)?;
        let r = self.r.evaluate(t)?;
        let r_inv = r
            .clone()
            .cholesky()
            .ok_or(Error::SingularMatrix { what: "R", t })?
            .inverse();
        Ok(Coefficients {
            a,
            b,
            q: self.q.evaluate(t)?,
            s: self.s.evaluate(t)?,
            r,
            r_inv,
        })
    }

    /// Same problem with `Q`, `S`, `R` all multiplied by `c`.
    pub fn with_scaled_weights(&self, c: f64) -> Self
    where
        S: Clone,
    {
        Self {
            system: self.system.clone(),
            q: self.q.scaled(c),
            s: self.s.scaled(c),
            r: self.r.scaled(c),
            horizon: self.horizon,
            x0: self.x0.clone(),
            xf: self.xf.clone(),
        }
    }
}

impl Coefficients {
    pub fn riccati_rhs(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let ps_b = p * &self.s + &self.b;
        let rhs = &self.a * p + p * self.a.transpose() + p * &self.q * p
            - &ps_b * &self.r_inv * ps_b.transpose();
        // exact symmetry; the two halves differ only by rounding
        (&rhs + rhs.transpose()) * 0.5
    }

    pub fn v_rhs(&self, p: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
        let rs = &self.r_inv * self.s.transpose();
        let m = &self.a - &self.b * &rs + p * &self.q - p * &self.s * &rs;
        m * v
    }

    /// `u* = -R⁻¹SᵀX + R⁻¹Bᵀ y` with `P y = V - X` solved by pseudo-inverse.
    pub fn control(&self, p: &DMatrix<f64>, v: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let y = pseudo_solve_symmetric(p, &(v - x));
        &self.r_inv * (self.b.transpose() * y - self.s.transpose() * x)
    }

    /// Integrand `X'QX + 2X'Su + u'Ru` (without the 1/2).
    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x)) + 2.0 * x.dot(&(&self.s * u)) + u.dot(&(&self.r * u))
    }
}

/// `dP/dt` at time `t`.
pub fn riccati_rhs<S: LinearSystem>(problem: &LqProblem<S>, t: f64, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(problem.coefficients(t)?.riccati_rhs(p))
}

/// `dV/dt` at time `t`.
pub fn v_rhs<S: LinearSystem>(
    problem: &LqProblem<S>,
    t: f64,
    p: &DMatrix<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok(problem.coefficients(t)?.v_rhs(p, v))
}

/// Least-squares solution of `P y = b` for symmetric `P` via its
/// eigen-decomposition, discarding eigenvalues below a relative cutoff.
pub fn pseudo_solve_symmetric(p: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(p.clone());
    let largest = eig.eigenvalues.amax();
    if largest == 0.0 {
        return DVector::zeros(b.len());
    }
    let cutoff = largest * PINV_RELATIVE_CUTOFF;
    let coords = eig.eigenvectors.transpose() * b;
    let scaled = DVector::from_iterator(
        coords.len(),
        coords.iter().zip(eig.eigenvalues.iter()).map(|(c, &l)| {
            if l.abs() > cutoff {
                c / l
            } else {
                0.0
            }
        }),
    );
    &eig.eigenvectors * scaled
}

/// Sampled `P(t)`, `V(t)` on a uniform grid.
///
/// Between nodes the solution is interpolated with cubic Hermite segments
/// built from the stored right-hand sides, which keeps interpolation error at
/// the order of the RK4 sweep.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub t0: f64,
    pub step: f64,
    pub p: Vec<DMatrix<f64>>,
    pub v: Vec<DVector<f64>>,
    pub p_dot: Vec<DMatrix<f64>>,
    pub v_dot: Vec<DVector<f64>>,
    pub guard_steps: usize,
}

impl RiccatiSolution {
    pub fn intervals(&self) -> usize {
        self.p.len() - 1
    }

    pub fn tf(&self) -> f64 {
        self.time(self.intervals())
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.intervals()).map(|k| self.time(k)).collect()
    }

    /// Start of the terminal window over which the control is frozen.
    pub fn guard_start(&self) -> f64 {
        self.time(self.intervals().saturating_sub(self.guard_steps))
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.intervals();
        let s = ((t - self.t0) / self.step).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        (k, s - k as f64)
    }

    /// `(P(t), V(t))`.
    pub fn interpolate(&self, t: f64) -> (DMatrix<f64>, DVector<f64>) {
        let (k, a) = self.locate(t);
        if a == 0.0 {
            return (self.p[k].clone(), self.v[k].clone());
        }
        let h = self.step;
        let a2 = a * a;
        let a3 = a2 * a;
        let h00 = 2.0 * a3 - 3.0 * a2 + 1.0;
        let h10 = (a3 - 2.0 * a2 + a) * h;
        let h01 = -2.0 * a3 + 3.0 * a2;
        let h11 = (a3 - a2) * h;
        let p = &self.p[k] * h00 + &self.p_dot[k] * h10 + &self.p[k + 1] * h01 + &self.p_dot[k + 1] * h11;
        let v = &self.v[k] * h00 + &self.v_dot[k] * h10 + &self.v[k + 1] * h01 + &self.v_dot[k + 1] * h11;
        (p, v)
    }

    /// Largest `max|P - Pᵀ|` over all samples.
    pub fn max_asymmetry(&self) -> f64 {
        self.p
            .iter()
            .map(|p| (p - p.transpose()).abs().max())
            .fold(0.0, f64::max)
    }
}

fn pack(p: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(p.len() + v.len(), p.iter().chain(v.iter()).copied())
}

fn unpack(y: &DVector<f64>, n: usize) -> (DMatrix<f64>, DVector<f64>) {
    (
        DMatrix::from_column_slice(n, n, &y.as_slice()[..n * n]),
        DVector::from_column_slice(&y.as_slice()[n * n..]),
    )
}

pub fn solve_riccati_backward<S: LinearSystem>(problem: &LqProblem<S>, step: f64) -> Result<RiccatiSolution> {
    solve_riccati_backward_with(problem, step, DEFAULT_GUARD_STEPS)
}

/// Integrates `(P, V)` backward from `(0, Xf)` at `tf` to `t0` with RK4.
pub fn solve_riccati_backward_with<S: LinearSystem>(
    problem: &LqProblem<S>,
    step: f64,
    guard_steps: usize,
) -> Result<RiccatiSolution> {
    let n = problem.state_dim();
    let (t0, tf) = (problem.horizon.t0, problem.horizon.tf);
    let intervals = step_count(t0, tf, step)?;
    let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let (p, v) = unpack(y, n);
        let c = problem.coefficients(t)?;
        Ok(pack(&c.riccati_rhs(&p), &c.v_rhs(&p, &v)))
    };

    let mut p = vec![DMatrix::zeros(n, n); intervals + 1];
    let mut v = vec![DVector::zeros(n); intervals + 1];
    p[intervals] = DMatrix::zeros(n, n);
    v[intervals] = problem.xf.clone();
    let mut y = pack(&p[intervals], &v[intervals]);
    for k in (0..intervals).rev() {
        let t = t0 + (k + 1) as f64 * step;
        y = rk4_step(rhs, t, &y, -step).map_err(|e| match e {
            Error::NonFinite { t, .. } => Error::NonFinite {
                context: "Riccati sweep",
                t,
            },
            other => other,
        })?;
        let (pk, vk) = unpack(&y, n);
        // keep samples exactly symmetric
        p[k] = (&pk + pk.transpose()) * 0.5;
        v[k] = vk;
        y = pack(&p[k], &v[k]);
    }

    let mut p_dot = Vec::with_capacity(intervals + 1);
    let mut v_dot = Vec::with_capacity(intervals + 1);
    for k in 0..=intervals {
        let c = problem.coefficients(t0 + k as f64 * step)?;
        p_dot.push(c.riccati_rhs(&p[k]));
        v_dot.push(c.v_rhs(&p[k], &v[k]));
    }
    Ok(RiccatiSolution {
        t0,
        step,
        p,
        v,
        p_dot,
        v_dot,
        guard_steps,
    })
}

/// Optimal control at `(t, X)`. Inside the terminal guard window the gains
/// are evaluated at the window start; [`rollout`] additionally holds the
/// control value itself constant there.
pub fn optimal_control<S: LinearSystem>(
    problem: &LqProblem<S>,
    sol: &RiccatiSolution,
    t: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let t = t.min(sol.guard_start());
    let (p, v) = sol.interpolate(t);
    Ok(problem.coefficients(t)?.control(&p, &v, x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub cost: f64,
}

impl OptimalTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has samples")
    }
}

/// Forward RK4 rollout of the closed loop `X' = A X + B u*(t, X)` from `X0`.
///
/// `step` must equal the solution step or divide it by an integer.
pub fn rollout<S: LinearSystem>(
    problem: &LqProblem<S>,
    sol: &RiccatiSolution,
    step: f64,
) -> Result<OptimalTrajectory> {
    let ratio = sol.step / step;
    let refine = ratio.round();
    if !(refine >= 1.0) || (ratio - refine).abs() > 1e-9 * ratio {
        return Err(Error::InvalidArgument(format!(
            "rollout step {step} must divide the Riccati step {}",
            sol.step
        )));
    }
    let refine = refine as usize;
    let intervals = sol.intervals() * refine;
    let guard_node = intervals.saturating_sub(sol.guard_steps * refine);
    let t0 = sol.t0;
    let time = |j: usize| t0 + j as f64 * step;

    let mut states = Vec::with_capacity(intervals + 1);
    let mut controls = Vec::with_capacity(intervals + 1);
    let mut x = problem.x0.clone();
    let mut held: Option<DVector<f64>> = None;
    for j in 0..intervals {
        let t = time(j);
        let u_now = match &held {
            Some(u) => u.clone(),
            None => optimal_control(problem, sol, t, &x)?,
        };
        if j >= guard_node && held.is_none() {
            held = Some(u_now.clone());
        }
        let next = if let Some(u) = &held {
            rk4_step(
                |tt, xx| {
                    let (a, b) = problem.system.matrices(tt)?;
                    Ok(a * xx + b * u)
                },
                t,
                &x,
                step,
            )
        } else {
            rk4_step(
                |tt, xx| {
                    let c = problem.coefficients(tt)?;
                    let (p, v) = sol.interpolate(tt);
                    let u = c.control(&p, &v, xx);
                    Ok(&c.a * xx + &c.b * u)
                },
                t,
                &x,
                step,
            )
        }
        .map_err(|e| match e {
            Error::NonFinite { t, .. } => Error::NonFinite {
                context: "optimal rollout",
                t,
            },
            other => other,
        })?;
        controls.push(u_now);
        states.push(std::mem::replace(&mut x, next));
    }
    let final_u = match held {
        Some(u) => u,
        None => optimal_control(problem, sol, time(intervals), &x)?,
    };
    states.push(x);
    controls.push(final_u);

    let mut traj = OptimalTrajectory {
        times: (0..=intervals).map(time).collect(),
        states,
        controls,
        cost: 0.0,
    };
    traj.cost = cost(problem, &traj)?;
    if !traj.cost.is_finite() {
        return Err(Error::NonFinite {
            context: "trajectory cost",
            t: sol.tf(),
        });
    }
    Ok(traj)
}

/// `1/2 ∫ (X'QX + 2X'Su + u'Ru) dt` by the trapezoidal rule on the trajectory grid.
pub fn cost<S: LinearSystem>(problem: &LqProblem<S>, traj: &OptimalTrajectory) -> Result<f64> {
    let mut integrand = Vec::with_capacity(traj.len());
    for ((t, x), u) in traj.times.iter().zip(&traj.states).zip(&traj.controls) {
        let q = problem.q.evaluate(*t)?;
        let s = problem.s.evaluate(*t)?;
        let r = problem.r.evaluate(*t)?;
        integrand.push(x.dot(&(q * x)) + 2.0 * x.dot(&(s * u)) + u.dot(&(r * u)));
    }
    let total: f64 = traj
        .times
        .windows(2)
        .zip(integrand.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum();
    Ok(0.5 * total)
}
