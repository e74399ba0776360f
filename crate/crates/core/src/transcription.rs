//! Direct-transcription reference solver for fixed-endpoint LQ problems.
//!
//! Discretizes the dynamics by trapezoidal collocation on `N` uniform
//! intervals, forms the equality-constrained QP
//! `min 1/2 zᵀHz  s.t.  Ez = d` over `z = [X_0..X_N, u_0..u_N]`, and solves
//! the KKT system with a dense LU factorization. It shares nothing with the
//! Riccati sweep and serves as an independent check of it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::riccati::{LinearSystem, LqProblem};

#[derive(Debug, Clone)]
pub struct TranscriptionResult {
    pub cost: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
}

pub fn transcription_oracle<S: LinearSystem>(
    problem: &LqProblem<S>,
    intervals: usize,
) -> Result<TranscriptionResult> {
    if intervals < 2 {
        return Err(Error::InvalidArgument(format!(
            "transcription needs at least 2 intervals, got {intervals}"
        )));
    }
    let (n, m) = (problem.state_dim(), problem.input_dim());
    let (t0, tf) = (problem.horizon.t0, problem.horizon.tf);
    let h = (tf - t0) / intervals as f64;
    let nodes = intervals + 1;
    let nz = nodes * (n + m);
    let nc = (intervals + 2) * n;
    let xi = |k: usize| k * n;
    let ui = |k: usize| nodes * n + k * m;
    let times: Vec<f64> = (0..nodes).map(|k| t0 + k as f64 * h).collect();

    let mut kkt = DMatrix::<f64>::zeros(nz + nc, nz + nc);
    let mut rhs = DVector::<f64>::zeros(nz + nc);
    let mut hess = DMatrix::<f64>::zeros(nz, nz);

    let mut systems = Vec::with_capacity(nodes);
    for (k, &t) in times.iter().enumerate() {
        let w = if k == 0 || k == intervals { 0.5 * h } else { h };
        let q = problem.q.evaluate(t)?;
        let s = problem.s.evaluate(t)?;
        let r = problem.r.evaluate(t)?;
        hess.view_mut((xi(k), xi(k)), (n, n)).copy_from(&(q * w));
        hess.view_mut((xi(k), ui(k)), (n, m)).copy_from(&(&s * w));
        hess.view_mut((ui(k), xi(k)), (m, n)).copy_from(&(s.transpose() * w));
        hess.view_mut((ui(k), ui(k)), (m, m)).copy_from(&(r * w));
        systems.push(problem.system.matrices(t)?);
    }

    let mut cons = DMatrix::<f64>::zeros(nc, nz);
    let eye = DMatrix::<f64>::identity(n, n);
    cons.view_mut((0, xi(0)), (n, n)).copy_from(&eye);
    rhs.rows_mut(nz, n).copy_from(&problem.x0);
    for k in 0..intervals {
        let row = n * (k + 1);
        let (a0, b0) = &systems[k];
        let (a1, b1) = &systems[k + 1];
        cons.view_mut((row, xi(k)), (n, n)).copy_from(&(-&eye - a0 * (0.5 * h)));
        cons.view_mut((row, xi(k + 1)), (n, n)).copy_from(&(&eye - a1 * (0.5 * h)));
        cons.view_mut((row, ui(k)), (n, m)).copy_from(&(b0 * (-0.5 * h)));
        cons.view_mut((row, ui(k + 1)), (n, m)).copy_from(&(b1 * (-0.5 * h)));
    }
    cons.view_mut((nc - n, xi(intervals)), (n, n)).copy_from(&eye);
    rhs.rows_mut(nz + nc - n, n).copy_from(&problem.xf);

    kkt.view_mut((0, 0), (nz, nz)).copy_from(&hess);
    kkt.view_mut((nz, 0), (nc, nz)).copy_from(&cons);
    kkt.view_mut((0, nz), (nz, nc)).copy_from(&cons.transpose());

    let sol = kkt.clone().lu().solve(&rhs).ok_or(Error::SingularKkt)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularKkt);
    }
    let residual = (&kkt * &sol - &rhs).amax();
    if residual > 1e-6 * (1.0 + rhs.amax()) {
        return Err(Error::SingularKkt);
    }

    let z = sol.rows(0, nz).into_owned();
    let cost = 0.5 * z.dot(&(&hess * &z));
    Ok(TranscriptionResult {
        cost,
        states: (0..nodes).map(|k| z.rows(xi(k), n).into_owned()).collect(),
        controls: (0..nodes).map(|k| z.rows(ui(k), m).into_owned()).collect(),
        times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::{Horizon, MatrixSchedule};
    use crate::riccati::ScheduledSystem;

    fn double_integrator(xf: [f64; 2]) -> LqProblem<ScheduledSystem> {
        LqProblem::new(
            ScheduledSystem::constant(
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
                DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            ),
            MatrixSchedule::zeros(2, 2),
            MatrixSchedule::zeros(2, 1),
            MatrixSchedule::identity(1),
            Horizon::new(0.0, 1.0).unwrap(),
            DVector::zeros(2),
            DVector::from_vec(xf.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn double_integrator_cost() {
        let res = transcription_oracle(&double_integrator([1.0, 0.0]), 200).unwrap();
        assert!((res.cost - 6.0).abs() <= 0.06, "cost {}", res.cost);
        assert!((&res.states[200] - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-9);
        assert_eq!(res.states[0], DVector::zeros(2));
        let mid = &res.states[100];
        assert!((mid[0] - 0.5).abs() < 1e-3 && (mid[1] - 1.5).abs() < 1e-3);
    }

    #[test]
    fn zero_boundaries_give_zero() {
        let res = transcription_oracle(&double_integrator([0.0, 0.0]), 20).unwrap();
        assert_eq!(res.cost, 0.0);
        assert!(res.states.iter().chain(&res.controls).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn uncontrollable_problem_is_singular() {
        let prob = LqProblem::new(
            ScheduledSystem::constant(DMatrix::zeros(2, 2), DMatrix::from_row_slice(2, 1, &[1.0, 0.0])),
            MatrixSchedule::zeros(2, 2),
            MatrixSchedule::zeros(2, 1),
            MatrixSchedule::identity(1),
            Horizon::new(0.0, 1.0).unwrap(),
            DVector::zeros(2),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        assert!(matches!(transcription_oracle(&prob, 10), Err(Error::SingularKkt)));
    }

    #[test]
    fn too_few_intervals() {
        assert!(transcription_oracle(&double_integrator([1.0, 0.0]), 1).is_err());
    }
}
