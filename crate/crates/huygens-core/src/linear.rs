//! Linear theory: the Lyapunov function of the linearised clock system, the
//! anti-phase asymptote and closed-form eigenvalues of the generating systems.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::ModelKind;
use crate::error::{invalid, Error, Result};
use crate::params::{DimensionlessParams, PoincareParams};

/// Value of the Lyapunov function and its analytic time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub e: f64,
    pub edot: f64,
    pub t: f64,
}

/// Evaluates `E = βθ² + (β−nβ²)θ̇² + nΩ²y² + n(βθ̇+ẏ)²` with `θ = Σθᵢ`, and
/// `Ė = −2nσẏ²`, for a state laid out as `(θ₁, θ̇₁, …, θₙ, θ̇ₙ, y, ẏ)`.
pub fn lyapunov(t: f64, state: &[f64], params: &DimensionlessParams) -> Result<LyapunovSample> {
    let n = params.n;
    let nf = n as f64;
    let beta = params.beta;
    if !beta.is_finite() || beta < 0.0 || beta > 1.0 / nf {
        return Err(invalid("beta must lie in [0, 1/n]"));
    }
    if state.len() != 2 * n + 2 {
        return Err(Error::Shape { expected: 2 * n + 2, got: state.len() });
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state"));
    }
    let (mut th, mut dth) = (0.0, 0.0);
    for i in 0..n {
        th += state[2 * i];
        dth += state[2 * i + 1];
    }
    let y = state[2 * n];
    let dy = state[2 * n + 1];
    let w = beta * dth + dy;
    let e = beta * th * th + (beta - nf * beta * beta) * dth * dth + nf * params.omega2 * y * y + nf * w * w;
    let edot = -2.0 * nf * params.sigma * dy * dy;
    Ok(LyapunovSample { e, edot, t })
}

/// Amplitude and phase of the surviving anti-phase motion
/// `θ₁ = −θ₂ → (A/2) sin(t + φ)` predicted by the linear model for two pendulums.
pub fn antiphase_asymptote(theta1: f64, dtheta1: f64, theta2: f64, dtheta2: f64) -> (f64, f64) {
    let d = theta1 - theta2;
    let dd = dtheta1 - dtheta2;
    let a = libm::hypot(d, dd);
    if a == 0.0 {
        (0.0, 0.0)
    } else {
        (a, libm::atan2(d, dd))
    }
}

/// Eigenvalues of a linear generating system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub eigenvalues: Vec<Complex64>,
    pub model: ModelKind,
}

impl ModeSet {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Closed-form eigenvalues of the generating (μ = 0) system for the
/// two-pendulum models that admit one.
pub fn generating_modes(model: ModelKind, params: &PoincareParams) -> Result<ModeSet> {
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let s = params.sigma;
    let pair = |disc: f64| {
        let r = Complex64::new(disc, 0.0).sqrt();
        (-0.5 * (s - r), -0.5 * (s + r))
    };
    let eigenvalues = match model {
        ModelKind::SmallSigma => {
            let w = params.omega;
            vec![i, i, -i, -i, i * w, -i * w]
        }
        ModelKind::ThreeDof => {
            let (l1, l2) = pair(s * s - 4.0 * params.omega * params.omega);
            vec![i, i, -i, -i, l1, l2]
        }
        ModelKind::TwoMass => {
            let kappa = params.kappa.ok_or_else(|| invalid("two-mass model needs kappa"))?;
            let (l1, l2) = pair(s * s - 8.0 * kappa);
            vec![i, i, -i, -i, l1, l2, -s * one, Complex64::new(0.0, 0.0)]
        }
        _ => return Err(Error::UnsupportedModel(model.name())),
    };
    Ok(ModeSet { eigenvalues, model })
}
