//! Classical fixed-step Runge-Kutta integration.
//!
//! Every ODE in the crate (Riccati sweep, optimal rollout, closed-loop arm)
//! goes through [`rk4_step`] so that all of them share one scheme. A negative
//! step integrates backward in time.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// One classical RK4 step of `y' = f(t, y)` from `t` to `t + h`.
pub fn rk4_step<F>(mut f: F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let half = 0.5 * h;
    let k1 = f(t, y)?;
    let k2 = f(t + half, &(y + &k1 * half))?;
    let k3 = f(t + half, &(y + &k2 * half))?;
    let k4 = f(t + h, &(y + &k3 * h))?;
    let next = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFinite {
            context: "rk4 step",
            t: t + h,
        })
    }
}

/// Integrates `steps` RK4 steps and returns every sample including `y0`.
pub fn rk4_integrate<F>(
    mut f: F,
    t0: f64,
    y0: DVector<f64>,
    h: f64,
    steps: usize,
) -> Result<Vec<DVector<f64>>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y0);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let next = rk4_step(&mut f, t, &out[k], h)?;
        out.push(next);
    }
    Ok(out)
}

/// Number of uniform steps of size `h` covering `[t0, tf]`, if `h` divides the span.
pub fn step_count(t0: f64, tf: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let span = tf - t0;
    if !(span > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must satisfy tf > t0, got [{t0}, {tf}]"
        )));
    }
    let n = (span / h).round();
    if (n * h - span).abs() > 1e-9 * span.max(1.0) || n < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "step {h} does not divide horizon length {span}"
        )));
    }
    Ok(n as usize)
}
