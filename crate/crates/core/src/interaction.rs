//! Unified human-robot interaction dynamics.
//!
//! The prescribed impedance model `M x'' + B x' + K x = f_h` and the
//! first-order human force model `K_d f_h' + K_p f_h = k_e x_d` are stacked
//! into one linear time-varying system over `X = [x_imp; x_imp'; f_h]`,
//! with the human's desired trajectory identified with the impedance state.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};
use crate::riccati::LinearSystem;

/// Determinant floor used when checking schedule invertibility.
pub const INVERTIBILITY_THRESHOLD: f64 = 1e-9;

/// Number of horizon samples used to validate schedules at load time.
pub const VALIDATION_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub t0: f64,
    pub tf: f64,
}

impl Horizon {
    pub fn new(t0: f64, tf: f64) -> Result<Self> {
        if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must satisfy t0 < tf, got [{t0}, {tf}]"
            )));
        }
        Ok(Self { t0, tf })
    }

    pub fn length(&self) -> f64 {
        self.tf - self.t0
    }

    fn tolerance(&self) -> f64 {
        1e-9 * self.length().abs().max(1.0)
    }

    pub fn contains(&self, t: f64) -> bool {
        let tol = self.tolerance();
        t >= self.t0 - tol && t <= self.tf + tol
    }

    /// `count` evenly spaced sample times including both endpoints.
    pub fn samples(&self, count: usize) -> impl Iterator<Item = f64> + '_ {
        let count = count.max(2);
        (0..count).map(move |i| self.t0 + self.length() * i as f64 / (count - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(DMatrix<f64>),
    /// `base + amplitude * sin(omega t)`, elementwise.
    Sinusoidal {
        base: DMatrix<f64>,
        amplitude: DMatrix<f64>,
        omega: f64,
    },
    /// Piecewise-linear interpolation through `(times[i], values[i])`.
    Tabulated {
        times: Vec<f64>,
        values: Vec<DMatrix<f64>>,
    },
}

/// A matrix-valued function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSchedule {
    profile: Profile,
    domain: Option<Horizon>,
}

impl MatrixSchedule {
    pub fn constant(m: DMatrix<f64>) -> Self {
        Self {
            profile: Profile::Constant(m),
            domain: None,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    pub fn sinusoidal(base: DMatrix<f64>, amplitude: DMatrix<f64>, omega: f64) -> Result<Self> {
        if base.shape() != amplitude.shape() {
            return Err(Error::InvalidArgument(format!(
                "amplitude shape {:?} differs from base shape {:?}",
                amplitude.shape(),
                base.shape()
            )));
        }
        if !omega.is_finite() {
            return Err(Error::InvalidArgument("frequency must be finite".into()));
        }
        Ok(Self {
            profile: Profile::Sinusoidal {
                base,
                amplitude,
                omega,
            },
            domain: None,
        })
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<DMatrix<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument(
                "table needs at least one sample and one matrix per time".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("table times must be strictly increasing".into()));
        }
        let shape = values[0].shape();
        if values.iter().any(|v| v.shape() != shape) {
            return Err(Error::InvalidArgument("table matrices must share one shape".into()));
        }
        Ok(Self {
            profile: Profile::Tabulated { times, values },
            domain: None,
        })
    }

    /// Restricts evaluation to `horizon`.
    pub fn within(mut self, horizon: Horizon) -> Self {
        self.domain = Some(horizon);
        self
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn domain(&self) -> Option<Horizon> {
        self.domain
    }

    pub fn shape(&self) -> (usize, usize) {
        match &self.profile {
            Profile::Constant(m) => m.shape(),
            Profile::Sinusoidal { base, .. } => base.shape(),
            Profile::Tabulated { values, .. } => values[0].shape(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.profile, Profile::Constant(_))
    }

    /// Scales every matrix in the schedule by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let profile = match &self.profile {
            Profile::Constant(m) => Profile::Constant(m * c),
            Profile::Sinusoidal {
                base,
                amplitude,
                omega,
            } => Profile::Sinusoidal {
                base: base * c,
                amplitude: amplitude * c,
                omega: *omega,
            },
            Profile::Tabulated { times, values } => Profile::Tabulated {
                times: times.clone(),
                values: values.iter().map(|v| v * c).collect(),
            },
        };
        Self {
            profile,
            domain: self.domain,
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<DMatrix<f64>> {
        if let Some(h) = self.domain {
            if !h.contains(t) {
                return Err(Error::OutOfHorizon {
                    t,
                    start: h.t0,
                    end: h.tf,
                });
            }
        }
        match &self.profile {
            Profile::Constant(m) => Ok(m.clone()),
            Profile::Sinusoidal {
                base,
                amplitude,
                omega,
            } => Ok(base + amplitude * (omega * t).sin()),
            Profile::Tabulated { times, values } => {
                let (first, last) = (times[0], times[times.len() - 1]);
                let tol = 1e-9 * (last - first).abs().max(1.0);
                if t < first - tol || t > last + tol {
                    return Err(Error::OutOfHorizon {
                        t,
                        start: first,
                        end: last,
                    });
                }
                if times.len() == 1 || t <= first {
                    return Ok(values[0].clone());
                }
                if t >= last {
                    return Ok(values[values.len() - 1].clone());
                }
                let k = times.partition_point(|&s| s <= t) - 1;
                let a = (t - times[k]) / (times[k + 1] - times[k]);
                Ok(&values[k] * (1.0 - a) + &values[k + 1] * a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceParams {
    pub mass: MatrixSchedule,
    pub damping: MatrixSchedule,
    pub stiffness: MatrixSchedule,
}

impl ImpedanceParams {
    pub fn task_dim(&self) -> usize {
        self.mass.shape().0
    }

    /// `(A_xi, B_xi)` of the impedance state `xi = [x_imp; x_imp']`.
    pub fn state_matrices(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let d = self.task_dim();
        let m = self.mass.evaluate(t)?;
        let m_inv = checked_inverse(&m, "impedance mass", t)?;
        let k = self.stiffness.evaluate(t)?;
        let b = self.damping.evaluate(t)?;
        let mut a_xi = DMatrix::zeros(2 * d, 2 * d);
        a_xi.view_mut((0, d), (d, d)).fill_with_identity();
        a_xi.view_mut((d, 0), (d, d)).copy_from(&(-&m_inv * k));
        a_xi.view_mut((d, d), (d, d)).copy_from(&(-&m_inv * b));
        let mut b_xi = DMatrix::zeros(2 * d, d);
        b_xi.view_mut((d, 0), (d, d)).fill_with_identity();
        Ok((a_xi, b_xi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanParams {
    /// `K_d`
    pub damping: MatrixSchedule,
    /// `K_p`
    pub stiffness: MatrixSchedule,
    /// `k_e`
    pub gain: MatrixSchedule,
}

impl HumanParams {
    /// `(A_h, B_h)` of `f_h' = A_h X_d + B_h f_h`.
    pub fn force_matrices(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let kd = self.damping.evaluate(t)?;
        let d = kd.nrows();
        let kd_inv = checked_inverse(&kd, "human damping K_d", t)?;
        let mut kd1 = DMatrix::zeros(d, 2 * d);
        kd1.view_mut((0, 0), (d, d)).copy_from(&kd_inv);
        let a_h = self.gain.evaluate(t)? * kd1;
        let b_h = -kd_inv * self.stiffness.evaluate(t)?;
        Ok((a_h, b_h))
    }
}

/// The stacked impedance + human-force system.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionModel {
    pub impedance: ImpedanceParams,
    pub human: HumanParams,
}

impl InteractionModel {
    pub fn task_dim(&self) -> usize {
        self.impedance.task_dim()
    }

    /// `A = [[A_xi, 0], [A_h, B_h]]`, `B = [[B_xi], [0]]`.
    pub fn unified_matrices(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let d = self.task_dim();
        let (a_xi, b_xi) = self.impedance.state_matrices(t)?;
        let (a_h, b_h) = self.human.force_matrices(t)?;
        let n = 3 * d;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (2 * d, 2 * d)).copy_from(&a_xi);
        a.view_mut((2 * d, 0), (d, 2 * d)).copy_from(&a_h);
        a.view_mut((2 * d, 2 * d), (d, d)).copy_from(&b_h);
        let mut b = DMatrix::zeros(n, d);
        b.view_mut((0, 0), (2 * d, d)).copy_from(&b_xi);
        Ok((a, b))
    }

    /// Checks shapes everywhere and invertibility of `M_imp` and `K_d` on
    /// [`VALIDATION_SAMPLES`] points of the horizon.
    pub fn validate(&self, horizon: &Horizon) -> Result<()> {
        let d = self.task_dim();
        let square = [
            ("impedance.M", &self.impedance.mass),
            ("impedance.B", &self.impedance.damping),
            ("impedance.K", &self.impedance.stiffness),
            ("human.Kd", &self.human.damping),
            ("human.Kp", &self.human.stiffness),
            ("human.ke", &self.human.gain),
        ];
        for (key, s) in square {
            if s.shape() != (d, d) {
                return Err(Error::config(
                    key,
                    format!("expected a {d}x{d} matrix, got {:?}", s.shape()),
                ));
            }
        }
        for t in horizon.samples(VALIDATION_SAMPLES) {
            for (key, s) in square {
                let m = s
                    .evaluate(t)
                    .map_err(|e| Error::config(key, e.to_string()))?;
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(key, format!("non-finite entry at t = {t}")));
                }
            }
            for (key, s) in [("impedance.M", &self.impedance.mass), ("human.Kd", &self.human.damping)] {
                let det = s.evaluate(t)?.determinant();
                if !(det.abs() > INVERTIBILITY_THRESHOLD) {
                    return Err(Error::config(
                        key,
                        format!("must be invertible; det = {det:.3e} at t = {t}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl LinearSystem for InteractionModel {
    fn state_dim(&self) -> usize {
        3 * self.task_dim()
    }

    fn input_dim(&self) -> usize {
        self.task_dim()
    }

    fn matrices(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.unified_matrices(t)
    }
}

/// `X = [x_imp; x_imp'; f_h]` for the planar task space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnifiedState {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    pub force: Vector2<f64>,
}

impl UnifiedState {
    pub fn from_vector(x: &DVector<f64>) -> Result<Self> {
        if x.len() != 6 {
            return Err(Error::InvalidArgument(format!(
                "unified state has length 6, got {}",
                x.len()
            )));
        }
        Ok(Self {
            position: Vector2::new(x[0], x[1]),
            velocity: Vector2::new(x[2], x[3]),
            force: Vector2::new(x[4], x[5]),
        })
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![
            self.position[0],
            self.position[1],
            self.velocity[0],
            self.velocity[1],
            self.force[0],
            self.force[1],
        ])
    }

    pub fn impedance_state(&self) -> DVector<f64> {
        self.to_vector().rows(0, 4).into_owned()
    }
}

fn checked_inverse(m: &DMatrix<f64>, what: &'static str, t: f64) -> Result<DMatrix<f64>> {
    if !(m.determinant().abs() > INVERTIBILITY_THRESHOLD) {
        return Err(Error::SingularMatrix { what, t });
    }
    m.clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix { what, t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn m2(rows: [[f64; 2]; 2]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
    }

    fn benchmark_model() -> InteractionModel {
        InteractionModel {
            impedance: ImpedanceParams {
                mass: MatrixSchedule::constant(m2([[5.0, 1.0], [1.0, -3.0]])),
                damping: MatrixSchedule::constant(m2([[20.0, 0.0], [5.0, 15.0]])),
                stiffness: MatrixSchedule::constant(m2([[1.0, 0.5], [0.0, 0.0]])),
            },
            human: HumanParams {
                damping: MatrixSchedule::constant(DMatrix::identity(2, 2) * 10.0),
                stiffness: MatrixSchedule::constant(DMatrix::identity(2, 2) * 2.0),
                gain: MatrixSchedule::identity(2),
            },
        }
    }

    #[test]
    fn schedule_kinds() {
        let i = DMatrix::<f64>::identity(2, 2);
        assert_eq!(MatrixSchedule::constant(i.clone()).evaluate(3.7).unwrap(), i);
        let s = MatrixSchedule::sinusoidal(i.clone(), i.clone(), PI).unwrap();
        assert_eq!(s.evaluate(0.0).unwrap(), i);
        assert_abs_diff_eq!(s.evaluate(0.5).unwrap(), &i * 2.0, epsilon = 1e-15);
        let tab = MatrixSchedule::tabulated(vec![0.0, 1.0], vec![DMatrix::zeros(2, 2), &i * 2.0]).unwrap();
        assert_abs_diff_eq!(tab.evaluate(0.5).unwrap(), i, epsilon = 1e-15);
        assert!(matches!(tab.evaluate(1.5), Err(Error::OutOfHorizon { .. })));
    }

    #[test]
    fn schedule_domain_enforced() {
        let s = MatrixSchedule::identity(2).within(Horizon::new(0.0, 2.0).unwrap());
        assert!(s.evaluate(2.0).is_ok());
        assert!(matches!(s.evaluate(2.1), Err(Error::OutOfHorizon { .. })));
        assert!(matches!(s.evaluate(-0.1), Err(Error::OutOfHorizon { .. })));
    }

    #[test]
    fn schedule_scaling_is_linear() {
        let base = m2([[1.0, -2.0], [0.5, 3.0]]);
        let tab = MatrixSchedule::tabulated(vec![0.0, 1.0, 3.0], vec![base.clone(), &base * 2.0, -&base]).unwrap();
        for t in [0.0, 0.3, 1.7, 3.0] {
            assert_abs_diff_eq!(tab.scaled(2.5).evaluate(t).unwrap(), tab.evaluate(t).unwrap() * 2.5, epsilon = 1e-12);
        }
        let c = MatrixSchedule::constant(base.clone());
        assert_eq!(c.scaled(-3.0).evaluate(0.0).unwrap(), &base * -3.0);
    }

    #[test]
    fn bad_schedules_rejected() {
        let i = DMatrix::<f64>::identity(2, 2);
        assert!(MatrixSchedule::sinusoidal(i.clone(), DMatrix::zeros(3, 3), 1.0).is_err());
        assert!(MatrixSchedule::tabulated(vec![1.0, 0.0], vec![i.clone(), i.clone()]).is_err());
        assert!(MatrixSchedule::tabulated(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn double_integrator_impedance() {
        let imp = ImpedanceParams {
            mass: MatrixSchedule::identity(2),
            damping: MatrixSchedule::zeros(2, 2),
            stiffness: MatrixSchedule::zeros(2, 2),
        };
        let (a, b) = imp.state_matrices(0.0).unwrap();
        let mut expected = DMatrix::zeros(4, 4);
        expected[(0, 2)] = 1.0;
        expected[(1, 3)] = 1.0;
        assert_eq!(a, expected);
        let mut eb = DMatrix::zeros(4, 2);
        eb[(2, 0)] = 1.0;
        eb[(3, 1)] = 1.0;
        assert_eq!(b, eb);
    }

    #[test]
    fn scenario_impedance_blocks() {
        // Exact rational values of -M^{-1}K and -M^{-1}B for the scenario matrices.
        let (a, b) = benchmark_model().impedance.state_matrices(0.0).unwrap();
        let mk = m2([[-3.0 / 16.0, -3.0 / 32.0], [-1.0 / 16.0, -1.0 / 32.0]]);
        let mb = m2([[-65.0 / 16.0, -15.0 / 16.0], [5.0 / 16.0, 75.0 / 16.0]]);
        assert_abs_diff_eq!(a.view((2, 0), (2, 2)).into_owned(), mk, epsilon = 1e-14);
        assert_abs_diff_eq!(a.view((2, 2), (2, 2)).into_owned(), mb, epsilon = 1e-14);
        assert_eq!(a.view((0, 2), (2, 2)).into_owned(), DMatrix::identity(2, 2));
        assert_eq!(a.view((0, 0), (2, 2)).into_owned(), DMatrix::zeros(2, 2));
        assert_eq!(b.view((2, 0), (2, 2)).into_owned(), DMatrix::identity(2, 2));
        assert_eq!(b.view((0, 0), (2, 2)).into_owned(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn singular_impedance_mass() {
        let mut model = benchmark_model();
        model.impedance.mass = MatrixSchedule::constant(m2([[1.0, 2.0], [2.0, 4.0]]));
        assert!(matches!(model.unified_matrices(0.0), Err(Error::SingularMatrix { .. })));
        assert!(matches!(
            model.validate(&Horizon::new(0.0, 1.0).unwrap()),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn human_force_blocks() {
        let h = benchmark_model().human;
        let (a_h, b_h) = h.force_matrices(0.0).unwrap();
        let mut expected = DMatrix::zeros(2, 4);
        expected[(0, 0)] = 0.1;
        expected[(1, 1)] = 0.1;
        assert_abs_diff_eq!(a_h, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(b_h, DMatrix::identity(2, 2) * -0.2, epsilon = 1e-15);

        let zero_gain = HumanParams {
            gain: MatrixSchedule::zeros(2, 2),
            ..h.clone()
        };
        assert_eq!(zero_gain.force_matrices(0.0).unwrap().0, DMatrix::zeros(2, 4));
        let zero_kp = HumanParams {
            stiffness: MatrixSchedule::zeros(2, 2),
            ..h.clone()
        };
        assert_eq!(zero_kp.force_matrices(0.0).unwrap().1, DMatrix::zeros(2, 2));
        let singular = HumanParams {
            damping: MatrixSchedule::zeros(2, 2),
            ..h
        };
        assert!(matches!(singular.force_matrices(0.0), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn unified_assembly() {
        let model = benchmark_model();
        let (a, b) = model.unified_matrices(0.0).unwrap();
        let (a_xi, _) = model.impedance.state_matrices(0.0).unwrap();
        let (a_h, b_h) = model.human.force_matrices(0.0).unwrap();
        assert_eq!(a.shape(), (6, 6));
        assert_eq!(b.shape(), (6, 2));
        assert_eq!(a.view((0, 0), (4, 4)).into_owned(), a_xi);
        assert_eq!(a.view((4, 0), (2, 4)).into_owned(), a_h);
        assert_eq!(a.view((4, 4), (2, 2)).into_owned(), b_h);
        assert_eq!(a.view((0, 4), (4, 2)).into_owned(), DMatrix::zeros(4, 2));
        assert_eq!(b.view((2, 0), (2, 2)).into_owned(), DMatrix::identity(2, 2));
        assert_eq!(b.view((4, 0), (2, 2)).into_owned(), DMatrix::zeros(2, 2));
        assert_eq!(b.view((0, 0), (2, 2)).into_owned(), DMatrix::zeros(2, 2));

        let frozen = InteractionModel {
            human: HumanParams {
                gain: MatrixSchedule::zeros(2, 2),
                stiffness: MatrixSchedule::zeros(2, 2),
                ..model.human.clone()
            },
            ..model.clone()
        };
        let (a, _) = frozen.unified_matrices(0.0).unwrap();
        assert_eq!(a.rows(4, 2).into_owned(), DMatrix::zeros(2, 6));

        assert_eq!(model.unified_matrices(0.0).unwrap(), model.unified_matrices(7.3).unwrap());
    }

    #[test]
    fn time_varying_block_structure() {
        let mut model = benchmark_model();
        let i = DMatrix::<f64>::identity(2, 2);
        model.human.gain = MatrixSchedule::sinusoidal(i.clone(), &i * 0.5, 2.0).unwrap();
        model.impedance.damping = MatrixSchedule::sinusoidal(m2([[20.0, 0.0], [5.0, 15.0]]), &i * 3.0, 1.0).unwrap();
        for t in [0.0, 0.4, 1.3, 5.0] {
            let (a, b) = model.unified_matrices(t).unwrap();
            assert_eq!(a.view((0, 4), (4, 2)).into_owned(), DMatrix::zeros(4, 2));
            assert_eq!(b.rows(4, 2).into_owned(), DMatrix::zeros(2, 2));
            let x = DVector::from_element(6, 0.3);
            let u = DVector::from_element(2, -1.0);
            assert_eq!((a * x + b * u).len(), 6);
        }
        assert_ne!(model.unified_matrices(0.0).unwrap().0, model.unified_matrices(1.0).unwrap().0);
    }

    #[test]
    fn unified_state_round_trip() {
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let s = UnifiedState::from_vector(&x).unwrap();
        assert_eq!(s.force, Vector2::new(5.0, 6.0));
        assert_eq!(s.to_vector(), x);
        assert_eq!(s.impedance_state().len(), 4);
        assert!(UnifiedState::from_vector(&DVector::zeros(5)).is_err());
    }
}
