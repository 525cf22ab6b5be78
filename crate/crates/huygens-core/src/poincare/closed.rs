use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::roots::poly_roots;
use super::{Regime, STABILITY_TOL};
use crate::dynamics::ModelKind;
use crate::error::{invalid, Error, Result};
use crate::params::PoincareParams;

/// Which closed-form analysis produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosedFormSource {
    /// Frame damping of order μ.
    SmallDamping,
    /// Finite frame damping, rigid single-mass frame.
    FiniteDamping,
    /// Two casings on a spring.
    TwoMass,
}

/// First-order prediction for one synchronisation regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePrediction {
    pub regime: Regime,
    pub exists: bool,
    /// Pendulum amplitude; `None` when the regime does not exist.
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
    pub delta1: Option<f64>,
    /// `None` when no closed-form stability statement is available.
    pub stable: Option<bool>,
    pub roots: Vec<Complex64>,
    pub source: ClosedFormSource,
}

fn cubic_roots(lin: f64, c1: f64, c0: f64) -> Result<Vec<Complex64>> {
    let mut r = vec![Complex64::new(-lin, 0.0)];
    r.extend(poly_roots(&[Complex64::new(1.0, 0.0), Complex64::new(c1, 0.0), Complex64::new(c0, 0.0)])?);
    Ok(r)
}

fn all_stable(roots: &[Complex64]) -> bool {
    roots.iter().all(|z| z.re < -STABILITY_TOL)
}

fn prediction(
    regime: Regime,
    exists: bool,
    amplitude: f64,
    delta1: f64,
    mu: f64,
    roots: Vec<Complex64>,
    stable: Option<bool>,
    source: ClosedFormSource,
) -> RegimePrediction {
    if exists {
        RegimePrediction {
            regime,
            exists,
            amplitude: Some(amplitude),
            period: Some(2.0 * PI * (1.0 - delta1 * mu)),
            delta1: Some(delta1),
            stable,
            roots,
            source,
        }
    } else {
        RegimePrediction {
            regime,
            exists,
            amplitude: None,
            period: None,
            delta1: None,
            stable: None,
            roots: Vec::new(),
            source,
        }
    }
}

/// Closed-form in-phase and anti-phase predictions (in that order).
///
/// Periods are `2π(1 − δ₁ μ)`. For the finite-damping model the in-phase
/// stability quadratic uses the middle coefficient
/// `a(γ² − 2σ̃(2+γ²))/(1 + 2σ̃)`; for the two-mass model the anti-phase
/// correction carries the factor `1 − 2ϰ` and no stability verdict is given.
pub fn closed_form_regimes(params: &PoincareParams, model: ModelKind) -> Result<Vec<RegimePrediction>> {
    params.validate()?;
    let (mu, a, s, w, g) = (params.mu, params.a, params.sigma, params.omega, params.gamma);
    if g == 0.0 {
        return Err(invalid("closed forms need gamma != 0"));
    }
    let g2 = g * g;
    match model {
        ModelKind::SmallSigma => {
            if !(mu > 0.0) {
                return Err(invalid("small-sigma model needs mu > 0 (sigma = mu b)"));
            }
            let b = s / mu;
            let q = 1.0 - w * w;
            if q == 0.0 {
                return Err(invalid("small-sigma closed form needs Omega != 1"));
            }
            let src = ClosedFormSource::SmallDamping;
            let q2 = q * q;
            let roots_in = cubic_roots(a * g2, a * g2, (1.0 + g2) * (1.0 + g2) / q2)?;
            let roots_anti = cubic_roots(a * g2, a * g2, (3.0 * g2 * g2 + 4.0 * g2 + 1.0) / q2)?;
            let st_in = all_stable(&roots_in) && b > 0.0;
            let st_anti = all_stable(&roots_anti) && b > 0.0;
            Ok(vec![
                prediction(Regime::InPhase, true, 2.0 * g.abs(), (1.0 + g2) / q, mu, roots_in, Some(st_in), src),
                prediction(Regime::AntiPhase, true, 2.0 * g.abs(), 0.0, mu, roots_anti, Some(st_anti), src),
            ])
        }
        ModelKind::ThreeDof => {
            let q = 1.0 - w * w;
            let den = q * q + s * s;
            if !(a > 0.0) || den == 0.0 {
                return Err(invalid("finite-damping closed form needs a > 0 and (1-Omega^2)^2 + sigma^2 > 0"));
            }
            let st = s / (a * den);
            let st_over_s = 1.0 / (a * den);
            let src = ClosedFormSource::FiniteDamping;
            let exists_in = st < g2 / 2.0;
            let amp_in = 2.0 * libm::sqrt(((g2 - 2.0 * st) / (1.0 + 2.0 * st)).max(0.0));
            let d_in = q * (1.0 + g2) / (q * q + 2.0 * s / a + s * s);
            let c1 = a * (g2 - 2.0 * st * (2.0 + g2)) / (1.0 + 2.0 * st);
            let c0 = a * st_over_s * (1.0 + g2) / ((1.0 + 2.0 * st) * (1.0 + 2.0 * st))
                * (1.0 + 2.0 * a * s * st + g2 * (1.0 - a * s));
            let roots_in = if exists_in { cubic_roots(a * (g2 - 2.0 * st), c1, c0)? } else { Vec::new() };
            let st_in = all_stable(&roots_in);
            let c1a = a * ((1.0 + 4.0 * st) * g2 + 2.0 * st);
            let c0a = a * st_over_s * (1.0 + g2) * (1.0 + g2 * (a * s + 3.0));
            let roots_anti = cubic_roots(a * g2, c1a, c0a)?;
            let st_anti = all_stable(&roots_anti);
            Ok(vec![
                prediction(Regime::InPhase, exists_in, amp_in, d_in, mu, roots_in, Some(st_in), src),
                prediction(Regime::AntiPhase, true, 2.0 * g.abs(), 0.0, mu, roots_anti, Some(st_anti), src),
            ])
        }
        ModelKind::TwoMass => {
            let k = params.kappa.ok_or_else(|| invalid("two-mass model needs kappa"))?;
            if !(a > 0.0) {
                return Err(invalid("two-mass closed form needs a > 0"));
            }
            let src = ClosedFormSource::TwoMass;
            let s_in = s / (a * (1.0 + s * s));
            let m = 2.0 * k - 1.0;
            let s_an = s / (a * (m * m + s * s));
            let amp = |sx: f64| 2.0 * libm::sqrt(((g2 - sx) / (1.0 + sx)).max(0.0));
            let d_in = 0.5 * (1.0 + g2) / (1.0 + s / a + s * s);
            let d_an = 0.5 * (1.0 - 2.0 * k) * (1.0 + g2) / (m * m + s / a + s * s);
            Ok(vec![
                prediction(Regime::InPhase, g2 > s_in, amp(s_in), d_in, mu, Vec::new(), None, src),
                prediction(Regime::AntiPhase, g2 > s_an, amp(s_an), d_an, mu, Vec::new(), None, src),
            ])
        }
        other => Err(Error::UnsupportedModel(other.name())),
    }
}
