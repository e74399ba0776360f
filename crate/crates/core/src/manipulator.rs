//! Planar two-link arm moving in the vertical plane.
//!
//! Joint 1 is measured from the +x axis, joint 2 relative to link 1. Gravity
//! acts along -y. Links are uniform rods with their centre of mass at
//! mid-length unless explicit inertias are given.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;

use crate::error::{Error, Result};

/// Default guard on `|det J|` for Cartesian-space transforms.
pub const SINGULARITY_THRESHOLD: f64 = 1e-6;

/// Slack applied to the workspace annulus when solving inverse kinematics.
pub const REACH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManipulatorParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub i1: f64,
    pub i2: f64,
    pub g: f64,
}

impl Default for ManipulatorParams {
    /// 5 kg / 1 m uniform rods under standard gravity.
    fn default() -> Self {
        Self::uniform_rods(5.0, 5.0, 1.0, 1.0, 9.81).expect("default arm is valid")
    }
}

impl ManipulatorParams {
    pub fn new(m1: f64, m2: f64, l1: f64, l2: f64, i1: f64, i2: f64, g: f64) -> Result<Self> {
        let p = Self {
            m1,
            m2,
            l1,
            l2,
            i1,
            i2,
            g,
        };
        p.validate()?;
        Ok(p)
    }

    /// Links modelled as uniform rods: `I = m L^2 / 12` about the link centre.
    pub fn uniform_rods(m1: f64, m2: f64, l1: f64, l2: f64, g: f64) -> Result<Self> {
        Self::new(m1, m2, l1, l2, m1 * l1 * l1 / 12.0, m2 * l2 * l2 / 12.0, g)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("m1", self.m1), ("m2", self.m2), ("l1", self.l1), ("l2", self.l2)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("robot.{name}"),
                    format!("must be strictly positive, got {v}"),
                ));
            }
        }
        for (name, v) in [("i1", self.i1), ("i2", self.i2), ("g", self.g)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("robot.{name}"),
                    format!("must be non-negative, got {v}"),
                ));
            }
        }
        Ok(())
    }

    fn lc1(&self) -> f64 {
        0.5 * self.l1
    }

    fn lc2(&self) -> f64 {
        0.5 * self.l2
    }

    pub fn reach(&self) -> (f64, f64) {
        ((self.l1 - self.l2).abs(), self.l1 + self.l2)
    }

    pub fn forward_kinematics(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let q12 = q[0] + q[1];
        Vector2::new(
            self.l1 * q[0].cos() + self.l2 * q12.cos(),
            self.l1 * q[0].sin() + self.l2 * q12.sin(),
        )
    }

    pub fn forward_kinematics_state(&self, state: &JointState) -> CartesianState {
        CartesianState {
            x: self.forward_kinematics(&state.q),
            xdot: self.jacobian(&state.q) * state.qdot,
        }
    }

    pub fn inverse_kinematics(&self, p: &Vector2<f64>, branch: ElbowBranch) -> Result<Vector2<f64>> {
        let r2 = p.norm_squared();
        let r = r2.sqrt();
        let (inner, outer) = self.reach();
        if !r.is_finite() || r < inner - REACH_TOLERANCE || r > outer + REACH_TOLERANCE {
            return Err(Error::Unreachable {
                x: p[0],
                y: p[1],
                inner,
                outer,
            });
        }
        let c2 = ((r2 - self.l1 * self.l1 - self.l2 * self.l2) / (2.0 * self.l1 * self.l2))
            .clamp(-1.0, 1.0);
        let s2 = branch.sign() * (1.0 - c2 * c2).max(0.0).sqrt();
        let q2 = s2.atan2(c2);
        let q1 = p[1].atan2(p[0]) - (self.l2 * s2).atan2(self.l1 + self.l2 * c2);
        Ok(Vector2::new(wrap_angle(q1), q2))
    }

    /// Inverse kinematics with `q1` unwrapped to lie closest to `previous`.
    pub fn inverse_kinematics_near(
        &self,
        p: &Vector2<f64>,
        branch: ElbowBranch,
        previous: &Vector2<f64>,
    ) -> Result<Vector2<f64>> {
        let mut q = self.inverse_kinematics(p, branch)?;
        q[0] = previous[0] + wrap_angle(q[0] - previous[0]);
        Ok(q)
    }

    pub fn jacobian(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let (s1, c1) = q[0].sin_cos();
        let (s12, c12) = (q[0] + q[1]).sin_cos();
        Matrix2::new(
            -self.l1 * s1 - self.l2 * s12,
            -self.l2 * s12,
            self.l1 * c1 + self.l2 * c12,
            self.l2 * c12,
        )
    }

    /// Time derivative of the Jacobian along `qdot`.
    pub fn jacobian_dot(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
        let (s1, c1) = q[0].sin_cos();
        let (s12, c12) = (q[0] + q[1]).sin_cos();
        let w1 = qdot[0];
        let w12 = qdot[0] + qdot[1];
        Matrix2::new(
            -self.l1 * c1 * w1 - self.l2 * c12 * w12,
            -self.l2 * c12 * w12,
            -self.l1 * s1 * w1 - self.l2 * s12 * w12,
            -self.l2 * s12 * w12,
        )
    }

    pub fn mass_matrix(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let (lc1, lc2) = (self.lc1(), self.lc2());
        let c2 = q[1].cos();
        let m22 = self.i2 + self.m2 * lc2 * lc2;
        let m12 = m22 + self.m2 * self.l1 * lc2 * c2;
        let m11 = self.i1
            + self.m1 * lc1 * lc1
            + m22
            + self.m2 * (self.l1 * self.l1 + 2.0 * self.l1 * lc2 * c2);
        Matrix2::new(m11, m12, m12, m22)
    }

    /// Coriolis/centrifugal matrix built from the Christoffel symbols of the
    /// mass matrix, so `Mdot - 2C` is exactly skew-symmetric.
    pub fn coriolis_matrix(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
        let h = -self.m2 * self.l1 * self.lc2() * q[1].sin();
        Matrix2::new(h * qdot[1], h * (qdot[0] + qdot[1]), -h * qdot[0], 0.0)
    }

    /// `dM/dt` along the flow, analytic.
    pub fn mass_matrix_dot(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
        let d = -self.m2 * self.l1 * self.lc2() * q[1].sin() * qdot[1];
        Matrix2::new(2.0 * d, d, d, 0.0)
    }

    pub fn gravity(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        let g2 = self.m2 * self.lc2() * self.g * c12;
        Vector2::new((self.m1 * self.lc1() + self.m2 * self.l1) * self.g * c1 + g2, g2)
    }

    pub fn joint_dynamics(&self, state: &JointState) -> JointDynamicsTerms {
        JointDynamicsTerms {
            mass: self.mass_matrix(&state.q),
            coriolis: self.coriolis_matrix(&state.q, &state.qdot),
            gravity: self.gravity(&state.q),
        }
    }

    pub fn cartesian_dynamics(&self, state: &JointState) -> Result<CartesianDynamicsTerms> {
        self.cartesian_dynamics_with(state, SINGULARITY_THRESHOLD)
    }

    pub fn cartesian_dynamics_with(
        &self,
        state: &JointState,
        threshold: f64,
    ) -> Result<CartesianDynamicsTerms> {
        let j = self.jacobian(&state.q);
        let det = j.determinant();
        if !(det.abs() >= threshold) {
            return Err(Error::SingularConfiguration { det, threshold });
        }
        let j_inv = j.try_inverse().ok_or(Error::SingularConfiguration { det, threshold })?;
        let j_inv_t = j_inv.transpose();
        let terms = self.joint_dynamics(state);
        let j_dot = self.jacobian_dot(&state.q, &state.qdot);
        Ok(CartesianDynamicsTerms {
            mass: j_inv_t * terms.mass * j_inv,
            coriolis: j_inv_t * (terms.coriolis - terms.mass * j_inv * j_dot) * j_inv,
            gravity: j_inv_t * terms.gravity,
        })
    }

    /// Joint accelerations under torque `tau` and a Cartesian end-effector force `f_h`.
    pub fn forward_dynamics(
        &self,
        state: &JointState,
        tau: &Vector2<f64>,
        f_h: &Vector2<f64>,
    ) -> Vector2<f64> {
        let t = self.joint_dynamics(state);
        let rhs = tau + self.jacobian(&state.q).transpose() * f_h
            - t.coriolis * state.qdot
            - t.gravity;
        t.mass
            .cholesky()
            .expect("mass matrix is positive definite")
            .solve(&rhs)
    }

    pub fn kinetic_energy(&self, state: &JointState) -> f64 {
        0.5 * state.qdot.dot(&(self.mass_matrix(&state.q) * state.qdot))
    }

    /// Potential energy with the base at height zero.
    pub fn potential_energy(&self, q: &Vector2<f64>) -> f64 {
        let y1 = self.lc1() * q[0].sin();
        let y2 = self.l1 * q[0].sin() + self.lc2() * (q[0] + q[1]).sin();
        self.g * (self.m1 * y1 + self.m2 * y2)
    }

    pub fn total_energy(&self, state: &JointState) -> f64 {
        self.kinetic_energy(state) + self.potential_energy(&state.q)
    }

    /// Empirical constants for the mass-norm, Coriolis and gravity bounds of
    /// the Cartesian dynamics, sampled over configurations with
    /// `|det J| >= det_margin` and human forces with `|f_h| <= force_bound`.
    pub fn estimate_bounds<R: Rng>(
        &self,
        rng: &mut R,
        samples: usize,
        det_margin: f64,
        force_bound: f64,
    ) -> DynamicsBoundEstimates {
        let mut est = DynamicsBoundEstimates {
            alpha_m: f64::INFINITY,
            alpha_max: 0.0,
            eta: 0.0,
            delta: 0.0,
            force: 0.0,
        };
        let mut accepted = 0;
        while accepted < samples {
            let q = Vector2::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI));
            let j = self.jacobian(&q);
            if j.determinant().abs() < det_margin {
                continue;
            }
            accepted += 1;
            let zero = JointState::new(q, Vector2::zeros());
            let Ok(c0) = self.cartesian_dynamics_with(&zero, det_margin) else {
                continue;
            };
            let m_norm = spectral_norm(&c0.mass);
            est.alpha_m = est.alpha_m.min(m_norm);
            est.alpha_max = est.alpha_max.max(m_norm);
            est.delta = est.delta.max(c0.gravity.norm());
            est.force = est.force.max(force_bound * spectral_norm(&j));
            // C_c is linear in qdot: its induced gain is the max over unit directions.
            for k in 0..16 {
                let a = k as f64 * PI / 16.0;
                let qdot = Vector2::new(a.cos(), a.sin());
                if let Ok(c) = self.cartesian_dynamics_with(&JointState::new(q, qdot), det_margin) {
                    est.eta = est.eta.max(spectral_norm(&c.coriolis));
                }
            }
        }
        est
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElbowBranch {
    Up,
    #[default]
    Down,
}

impl ElbowBranch {
    /// Sign of `q2` on this branch.
    pub fn sign(self) -> f64 {
        match self {
            ElbowBranch::Up => 1.0,
            ElbowBranch::Down => -1.0,
        }
    }

    pub fn of(q: &Vector2<f64>) -> Self {
        if q[1] >= 0.0 {
            ElbowBranch::Up
        } else {
            ElbowBranch::Down
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ElbowBranch::Up => "elbow-up",
            ElbowBranch::Down => "elbow-down",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "elbow-up" => Some(ElbowBranch::Up),
            "elbow-down" => Some(ElbowBranch::Down),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub q: Vector2<f64>,
    pub qdot: Vector2<f64>,
}

impl JointState {
    pub fn new(q: Vector2<f64>, qdot: Vector2<f64>) -> Self {
        Self { q, qdot }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianState {
    pub x: Vector2<f64>,
    pub xdot: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDynamicsTerms {
    pub mass: Matrix2<f64>,
    pub coriolis: Matrix2<f64>,
    pub gravity: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianDynamicsTerms {
    pub mass: Matrix2<f64>,
    pub coriolis: Matrix2<f64>,
    pub gravity: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsBoundEstimates {
    pub alpha_m: f64,
    pub alpha_max: f64,
    pub eta: f64,
    pub delta: f64,
    /// Bound on `|J^T f_h|`.
    pub force: f64,
}

pub fn spectral_norm(m: &Matrix2<f64>) -> f64 {
    m.singular_values().max()
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arm() -> ManipulatorParams {
        ManipulatorParams::default()
    }

    fn random_state(rng: &mut ChaCha8Rng) -> JointState {
        JointState::new(
            Vector2::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI)),
            Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
        )
    }

    #[test]
    fn fk_known_points() {
        let p = arm();
        assert_abs_diff_eq!(p.forward_kinematics(&Vector2::new(0.0, 0.0)), Vector2::new(2.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(
            p.forward_kinematics(&Vector2::new(PI / 2.0, 0.0)),
            Vector2::new(0.0, 2.0),
            epsilon = 1e-15
        );
        // cos 0.5 + cos 1.5, sin 0.5 + sin 1.5
        let x = p.forward_kinematics(&Vector2::new(0.5, 1.0));
        assert_abs_diff_eq!(x, Vector2::new(0.9483197635580757, 1.4769205252082576), epsilon = 1e-12);
    }

    #[test]
    fn ik_known_points() {
        let p = arm();
        let q = p.inverse_kinematics(&Vector2::new(2.0, 0.0), ElbowBranch::Down).unwrap();
        assert_abs_diff_eq!(q, Vector2::new(0.0, 0.0), epsilon = 1e-7);
        let q = p.inverse_kinematics(&Vector2::new(0.0, 2.0), ElbowBranch::Up).unwrap();
        assert_abs_diff_eq!(q, Vector2::new(PI / 2.0, 0.0), epsilon = 1e-7);

        let target = Vector2::new(-0.5, 1.0);
        let q = p.inverse_kinematics(&target, ElbowBranch::Down).unwrap();
        assert_abs_diff_eq!(q[1].cos(), -0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(q[1], -1.9551931012905357, epsilon = 1e-12);
        assert_abs_diff_eq!(q[0], 3.0120404864409704, epsilon = 1e-12);
        assert_abs_diff_eq!(p.forward_kinematics(&q), target, epsilon = 1e-12);
    }

    #[test]
    fn ik_unreachable() {
        let p = arm();
        assert!(matches!(
            p.inverse_kinematics(&Vector2::new(2.5, 0.0), ElbowBranch::Down),
            Err(Error::Unreachable { .. })
        ));
        let uneven = ManipulatorParams::uniform_rods(1.0, 1.0, 1.0, 0.5, 9.81).unwrap();
        assert!(uneven
            .inverse_kinematics(&Vector2::new(0.1, 0.0), ElbowBranch::Up)
            .is_err());
    }

    #[test]
    fn ik_near_unwraps() {
        let p = arm();
        let prev = Vector2::new(3.1, -1.0);
        let target = p.forward_kinematics(&Vector2::new(3.2, -1.0));
        let q = p.inverse_kinematics_near(&target, ElbowBranch::Down, &prev).unwrap();
        assert_abs_diff_eq!(q[0], 3.2, epsilon = 1e-9);
    }

    #[test]
    fn jacobian_known_points() {
        let p = arm();
        assert_abs_diff_eq!(p.jacobian(&Vector2::new(0.0, 0.0)), Matrix2::new(0.0, 0.0, 2.0, 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(
            p.jacobian(&Vector2::new(PI / 2.0, 0.0)),
            Matrix2::new(-2.0, -1.0, 0.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = arm();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = 1e-6;
        for _ in 0..200 {
            let q = random_state(&mut rng).q;
            let j = p.jacobian(&q);
            for c in 0..2 {
                let mut dq = Vector2::zeros();
                dq[c] = eps;
                let fd = (p.forward_kinematics(&(q + dq)) - p.forward_kinematics(&(q - dq))) / (2.0 * eps);
                assert_abs_diff_eq!(j.column(c).into_owned(), fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn jacobian_dot_matches_finite_differences() {
        let p = arm();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let eps = 1e-6;
        for _ in 0..100 {
            let s = random_state(&mut rng);
            let fd = (p.jacobian(&(s.q + s.qdot * eps)) - p.jacobian(&(s.q - s.qdot * eps))) / (2.0 * eps);
            assert_abs_diff_eq!(p.jacobian_dot(&s.q, &s.qdot), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn mass_matrix_reference_values() {
        // Frozen from a symbolic Lagrangian of two uniform 5 kg, 1 m rods.
        let p = arm();
        let m = p.mass_matrix(&Vector2::new(0.3, 0.0));
        assert_abs_diff_eq!(m, Matrix2::new(40.0 / 3.0, 25.0 / 6.0, 25.0 / 6.0, 5.0 / 3.0), epsilon = 1e-12);
        let m = p.mass_matrix(&Vector2::new(-1.0, 1.0));
        assert_abs_diff_eq!(m[(0, 0)], 11.034844862674033, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(0, 1)], 3.017422431337016, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(1, 1)], 5.0 / 3.0, epsilon = 1e-12);
        let g = p.gravity(&Vector2::new(0.3, -0.7));
        assert_abs_diff_eq!(g, Vector2::new(92.87790306533722, 22.58902087792076), epsilon = 1e-10);
    }

    #[test]
    fn gravity_and_coriolis_vanish() {
        let p = ManipulatorParams::uniform_rods(5.0, 5.0, 1.0, 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s = random_state(&mut rng);
            assert_eq!(p.gravity(&s.q), Vector2::zeros());
            let c = p.coriolis_matrix(&s.q, &Vector2::zeros());
            assert_eq!(c * Vector2::<f64>::zeros(), Vector2::zeros());
            assert_eq!(c, Matrix2::zeros());
        }
    }

    #[test]
    fn gravity_is_potential_gradient() {
        let p = arm();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let eps = 1e-6;
        for _ in 0..50 {
            let q = random_state(&mut rng).q;
            for c in 0..2 {
                let mut dq = Vector2::zeros();
                dq[c] = eps;
                let fd = (p.potential_energy(&(q + dq)) - p.potential_energy(&(q - dq))) / (2.0 * eps);
                assert_abs_diff_eq!(p.gravity(&q)[c], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn joint_skew_symmetry() {
        let p = arm();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let s = random_state(&mut rng);
            let lam = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = p.mass_matrix_dot(&s.q, &s.qdot) - 2.0 * p.coriolis_matrix(&s.q, &s.qdot);
            assert!(lam.dot(&(n * lam)).abs() <= 1e-10);
        }
    }

    #[test]
    fn mass_matrix_dot_matches_finite_differences() {
        let p = arm();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let eps = 1e-6;
        for _ in 0..100 {
            let s = random_state(&mut rng);
            let fd = (p.mass_matrix(&(s.q + s.qdot * eps)) - p.mass_matrix(&(s.q - s.qdot * eps))) / (2.0 * eps);
            assert_abs_diff_eq!(p.mass_matrix_dot(&s.q, &s.qdot), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn cartesian_mass_symmetric_positive() {
        let p = arm();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 200 {
            let s = random_state(&mut rng);
            let Ok(c) = p.cartesian_dynamics(&s) else { continue };
            checked += 1;
            assert!((c.mass - c.mass.transpose()).abs().max() <= 1e-10 * c.mass.abs().max().max(1.0));
            assert!(c.mass.symmetric_eigenvalues().min() > 0.0);
            assert!(p.mass_matrix(&s.q).symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn cartesian_singular_configurations() {
        let p = arm();
        for q2 in [0.0, PI, 1e-9, PI - 1e-9] {
            let s = JointState::new(Vector2::new(0.4, q2), Vector2::zeros());
            assert!(matches!(p.cartesian_dynamics(&s), Err(Error::SingularConfiguration { .. })));
        }
    }

    #[test]
    fn forward_dynamics_balance() {
        let p = arm();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let s = random_state(&mut rng);
            let f = Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let t = p.joint_dynamics(&s);
            let j = p.jacobian(&s.q);
            let tau = t.coriolis * s.qdot + t.gravity - j.transpose() * f;
            assert_abs_diff_eq!(p.forward_dynamics(&s, &tau, &f), Vector2::zeros(), epsilon = 1e-10);

            let tau = Vector2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
            let qdd = p.forward_dynamics(&s, &tau, &f);
            let residual = t.mass * qdd + t.coriolis * s.qdot + t.gravity - tau - j.transpose() * f;
            assert!(residual.norm() <= 1e-10);
        }
        let flat = ManipulatorParams::uniform_rods(5.0, 5.0, 1.0, 1.0, 0.0).unwrap();
        let s = JointState::new(Vector2::new(0.2, 0.4), Vector2::zeros());
        assert_eq!(flat.forward_dynamics(&s, &Vector2::zeros(), &Vector2::zeros()), Vector2::zeros());
    }

    #[test]
    fn bound_estimates_hold_on_fresh_samples() {
        let p = arm();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let margin = 0.2;
        let est = p.estimate_bounds(&mut rng, 2000, margin, 1.0);
        assert!(est.alpha_m > 0.0 && est.alpha_m <= est.alpha_max);
        assert!(est.eta > 0.0 && est.delta > 0.0 && est.force > 0.0);
        let mut checked = 0;
        while checked < 500 {
            let s = random_state(&mut rng);
            let Ok(c) = p.cartesian_dynamics_with(&s, margin) else { continue };
            checked += 1;
            let slack = 1.1;
            let m = spectral_norm(&c.mass);
            assert!(m >= est.alpha_m / slack && m <= est.alpha_max * slack);
            assert!(spectral_norm(&c.coriolis) <= slack * est.eta * s.qdot.norm());
            assert!(c.gravity.norm() <= slack * est.delta);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ManipulatorParams::new(0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 9.81).is_err());
        assert!(ManipulatorParams::new(1.0, 1.0, -1.0, 1.0, 0.0, 0.0, 9.81).is_err());
        assert!(ManipulatorParams::new(1.0, 1.0, 1.0, 1.0, -0.1, 0.0, 9.81).is_err());
        assert!(ManipulatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, -9.81).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        for a in [-10.0, -PI, 0.0, PI, 3.5, 100.0] {
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI);
            assert_abs_diff_eq!((a - w).rem_euclid(2.0 * PI).min(2.0 * PI - (a - w).rem_euclid(2.0 * PI)), 0.0, epsilon = 1e-9);
        }
    }
}
