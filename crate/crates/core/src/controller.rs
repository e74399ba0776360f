//! Neuro-adaptive PID joint tracking.
//!
//! The commutative error `e_c = 2ζe + ζ²∫e + ė` drives the torque
//! `τ = (k_rc + k_R) e_c`, where the scalar gain `k_R = α θ̂ᵀφ(z)` comes from
//! a Gaussian RBF network over `z = [e, ė, e_c]` and the weights follow the
//! σ-modified law `θ̂' = Γ(α|e_c|²φ(z) - σθ̂)`.

use nalgebra::{DMatrix, DVector, Vector2, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub zeta: f64,
    pub k_rc: f64,
    pub alpha: f64,
    pub sigma: f64,
    /// Adaptation gain matrix (one row/column per RBF node).
    pub gamma: DMatrix<f64>,
}

impl ControllerGains {
    pub fn new(zeta: f64, k_rc: f64, alpha: f64, sigma: f64, gamma: DMatrix<f64>) -> Result<Self> {
        let g = Self {
            zeta,
            k_rc,
            alpha,
            sigma,
            gamma,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("controller.zeta", self.zeta),
            ("controller.k_rc", self.k_rc),
            ("controller.alpha", self.alpha),
            ("controller.sigma", self.sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be strictly positive, got {v}")));
            }
        }
        let g = &self.gamma;
        if !g.is_square() || g.nrows() == 0 {
            return Err(Error::config("controller.gamma", "must be a non-empty square matrix"));
        }
        let scale = g.abs().max().max(1.0);
        if (g - g.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::config("controller.gamma", "must be symmetric"));
        }
        if !(g.clone().symmetric_eigenvalues().min() > 0.0) {
            return Err(Error::config("controller.gamma", "must be positive definite"));
        }
        Ok(())
    }
}

/// Gaussian radial basis network producing the adaptive gain.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfNetwork {
    /// One centre per node, in normalized input coordinates.
    pub centers: Vec<Vector6<f64>>,
    pub widths: Vec<f64>,
    /// Normalization of `[e, ė, e_c]`; each scale divides both joint components.
    pub scales: [f64; 3],
    pub theta_hat: DVector<f64>,
}

impl RbfNetwork {
    pub fn new(centers: Vec<Vector6<f64>>, widths: Vec<f64>, scales: [f64; 3]) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::config("controller.nodes", "network needs at least one node"));
        }
        if widths.len() != centers.len() || widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::config("controller.width", "one strictly positive width per node"));
        }
        if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config("controller.scales", "scales must be strictly positive"));
        }
        let nodes = centers.len();
        Ok(Self {
            centers,
            widths,
            scales,
            theta_hat: DVector::zeros(nodes),
        })
    }

    /// `nodes` centres drawn uniformly from `[-1, 1]^6` with a seeded ChaCha8 stream.
    pub fn seeded(nodes: usize, seed: u64, width: f64, scales: [f64; 3]) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = (0..nodes)
            .map(|_| Vector6::from_fn(|_, _| rng.random_range(-1.0..=1.0)))
            .collect();
        Self::new(centers, vec![width; nodes], scales)
    }

    pub fn nodes(&self) -> usize {
        self.centers.len()
    }

    pub fn normalize(&self, z: &Vector6<f64>) -> Vector6<f64> {
        Vector6::from_fn(|i, _| z[i] / self.scales[i / 2])
    }

    /// `φ_i = exp(-|ẑ - c_i|² / w_i²)` on the normalized input.
    pub fn features(&self, z: &Vector6<f64>) -> DVector<f64> {
        let zn = self.normalize(z);
        DVector::from_iterator(
            self.nodes(),
            self.centers
                .iter()
                .zip(&self.widths)
                .map(|(c, w)| (-(zn - c).norm_squared() / (w * w)).exp()),
        )
    }

    /// `k_R = α θ̂ᵀφ(z)` with the stored weights.
    pub fn gain(&self, z: &Vector6<f64>, alpha: f64) -> f64 {
        gain_from(&self.theta_hat, &self.features(z), alpha)
    }

    /// `θ̂'` with the stored weights.
    pub fn adapt(&self, e_c: &Vector2<f64>, z: &Vector6<f64>, gains: &ControllerGains) -> DVector<f64> {
        adapt_from(&self.theta_hat, &self.features(z), e_c, gains)
    }
}

pub fn gain_from(theta: &DVector<f64>, phi: &DVector<f64>, alpha: f64) -> f64 {
    alpha * theta.dot(phi)
}

pub fn adapt_from(
    theta: &DVector<f64>,
    phi: &DVector<f64>,
    e_c: &Vector2<f64>,
    gains: &ControllerGains,
) -> DVector<f64> {
    &gains.gamma * (phi * (gains.alpha * e_c.norm_squared()) - theta * gains.sigma)
}

pub fn commutative_error(e: &Vector2<f64>, e_dot: &Vector2<f64>, e_int: &Vector2<f64>, zeta: f64) -> Vector2<f64> {
    e * (2.0 * zeta) + e_int * (zeta * zeta) + e_dot
}

pub fn control_torque(e_c: &Vector2<f64>, k_rc: f64, k_r: f64) -> Vector2<f64> {
    e_c * (k_rc + k_r)
}

/// Network input `z = [e, ė, e_c]`.
pub fn network_input(e: &Vector2<f64>, e_dot: &Vector2<f64>, e_c: &Vector2<f64>) -> Vector6<f64> {
    Vector6::new(e[0], e[1], e_dot[0], e_dot[1], e_c[0], e_c[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingState {
    pub e: Vector2<f64>,
    pub e_int: Vector2<f64>,
    pub e_dot: Vector2<f64>,
    pub e_c: Vector2<f64>,
    pub theta_hat: DVector<f64>,
}

/// Everything the controller computes at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub e_c: Vector2<f64>,
    pub k_r: f64,
    pub tau: Vector2<f64>,
    pub theta_dot: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuroAdaptivePid {
    pub gains: ControllerGains,
    pub network: RbfNetwork,
}

impl NeuroAdaptivePid {
    pub fn new(gains: ControllerGains, network: RbfNetwork) -> Result<Self> {
        if gains.gamma.nrows() != network.nodes() {
            return Err(Error::config(
                "controller.gamma",
                format!(
                    "expected {0}x{0} to match the node count, got {1}x{1}",
                    network.nodes(),
                    gains.gamma.nrows()
                ),
            ));
        }
        Ok(Self { gains, network })
    }

    pub fn evaluate(&self, state: &TrackingState) -> ControlOutput {
        let e_c = commutative_error(&state.e, &state.e_dot, &state.e_int, self.gains.zeta);
        let z = network_input(&state.e, &state.e_dot, &e_c);
        let phi = self.network.features(&z);
        let k_r = gain_from(&state.theta_hat, &phi, self.gains.alpha);
        ControlOutput {
            e_c,
            k_r,
            tau: control_torque(&e_c, self.gains.k_rc, k_r),
            theta_dot: adapt_from(&state.theta_hat, &phi, &e_c, &self.gains),
        }
    }
}
