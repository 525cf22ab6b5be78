//! Parameter layers for the clock models and the conversions between them.
//!
//! Three layers are used. [`PhysicalParams`] carries SI quantities,
//! [`DimensionlessParams`] the rescaled system with time `tau = sqrt(g/l) t`,
//! and [`PoincareParams`] the small-parameter form with `mu = m/M` and the
//! escapement written as `epsilon = mu * a`.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Physical description of `n` identical pendulums on a common frame (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Bob mass (kg).
    pub m: f64,
    /// Frame (casing) mass (kg).
    #[serde(rename = "M")]
    pub big_m: f64,
    /// Pendulum length (m).
    pub l: f64,
    /// Gravitational acceleration (m/s^2).
    pub g: f64,
    /// Frame damping (N s/m).
    pub c: f64,
    /// Frame stiffness (N/m).
    pub k: f64,
    /// Escapement strength (N m s).
    pub e: f64,
    /// Escapement critical angle (rad).
    pub gamma: f64,
    /// Number of pendulums.
    pub n: usize,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let named = [("m", self.m), ("M", self.big_m), ("l", self.l), ("g", self.g)];
        for (name, v) in named {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(alloc::format!("{name} must be strictly positive, got {v}")));
            }
        }
        for (name, v) in [("c", self.c), ("k", self.k), ("e", self.e)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(alloc::format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.gamma.is_finite() {
            return Err(Error::NonFinite("gamma"));
        }
        if self.n == 0 {
            return Err(invalid("pendulum count n must be at least 1"));
        }
        Ok(())
    }
}

/// Rescaled single-frame system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    pub sigma: f64,
    /// Frame stiffness, squared frequency `Omega^2`.
    pub omega2: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub n: usize,
}

impl DimensionlessParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("pendulum count n must be at least 1"));
        }
        for (name, v) in [("sigma", self.sigma), ("omega2", self.omega2), ("epsilon", self.epsilon)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(alloc::format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.gamma.is_finite() {
            return Err(Error::NonFinite("gamma"));
        }
        if !(self.beta >= 0.0 && self.beta * (self.n as f64) < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!("beta must lie in [0, 1/n), got {}", self.beta)));
        }
        Ok(())
    }
}

/// Small-parameter form. `omega` is the frame frequency itself, not its square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareParams {
    pub mu: f64,
    pub a: f64,
    pub sigma: f64,
    pub omega: f64,
    pub gamma: f64,
    /// Coupling stiffness of the two-mass frame; `None` for single-frame models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl PoincareParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu", self.mu), ("a", self.a), ("sigma", self.sigma), ("omega", self.omega)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(alloc::format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.gamma.is_finite() {
            return Err(Error::NonFinite("gamma"));
        }
        if let Some(k) = self.kappa {
            if !k.is_finite() || k < 0.0 {
                return Err(invalid("kappa must be non-negative"));
            }
        }
        Ok(())
    }

    /// Escapement strength `epsilon = mu * a`.
    pub fn epsilon(&self) -> f64 {
        self.mu * self.a
    }

    /// Equivalent single-frame parameters for `n` pendulums (inverse of [`to_poincare`]).
    pub fn to_dimensionless(&self, n: usize) -> DimensionlessParams {
        let nf = n as f64;
        DimensionlessParams {
            sigma: self.sigma,
            omega2: self.omega * self.omega,
            beta: self.mu / (1.0 + nf * self.mu),
            gamma: self.gamma,
            epsilon: self.mu * self.a,
            n,
        }
    }
}

pub fn to_dimensionless(p: &PhysicalParams) -> Result<DimensionlessParams> {
    p.validate()?;
    let total = p.big_m + (p.n as f64) * p.m;
    Ok(DimensionlessParams {
        sigma: p.c / (total * libm::sqrt(p.g / p.l)),
        omega2: p.k * p.l / (total * p.g),
        beta: p.m / total,
        gamma: p.gamma,
        epsilon: p.e / (p.m * p.g * p.l),
        n: p.n,
    })
}

/// Physical parameters reproducing `d`, with the frame mass, length and
/// gravity fixed by the caller (the dimensionless layer has that scale freedom).
pub fn from_dimensionless(d: &DimensionlessParams, big_m: f64, l: f64, g: f64) -> Result<PhysicalParams> {
    d.validate()?;
    let nf = d.n as f64;
    let m = d.beta * big_m / (1.0 - nf * d.beta);
    let total = big_m + nf * m;
    let p = PhysicalParams {
        m,
        big_m,
        l,
        g,
        c: d.sigma * total * libm::sqrt(g / l),
        k: d.omega2 * total * g / l,
        e: d.epsilon * m * g * l,
        gamma: d.gamma,
        n: d.n,
    };
    p.validate()?;
    Ok(p)
}

/// `mu = beta / (1 - n beta)`, `a = epsilon / mu`.
///
/// With `beta = 0` the coupling vanishes and `mu = 0`; `a` is then only
/// defined when the escapement is off as well.
pub fn to_poincare(d: &DimensionlessParams) -> Result<PoincareParams> {
    d.validate()?;
    let nf = d.n as f64;
    let mu = d.beta / (1.0 - nf * d.beta);
    let a = if mu > 0.0 {
        d.epsilon / mu
    } else if d.epsilon == 0.0 {
        0.0
    } else {
        return Err(invalid("beta = 0 with nonzero epsilon leaves a = epsilon/mu undefined"));
    };
    Ok(PoincareParams { mu, a, sigma: d.sigma, omega: libm::sqrt(d.omega2), gamma: d.gamma, kappa: None })
}

/// Small-parameter form of the two-mass frame: each casing of mass `M`
/// carries one pendulum and the casings are joined by a spring `k` and a
/// damper `c`. Only `n = 2` is meaningful here.
pub fn to_two_mass_poincare(p: &PhysicalParams) -> Result<PoincareParams> {
    p.validate()?;
    if p.n != 2 {
        return Err(invalid("two-mass frame requires n = 2"));
    }
    let total = p.big_m + p.m;
    let mu = p.m / p.big_m;
    Ok(PoincareParams {
        mu,
        a: p.e / (p.m * p.g * p.l) / mu,
        sigma: p.c / (total * libm::sqrt(p.g / p.l)),
        omega: 0.0,
        gamma: p.gamma,
        kappa: Some(p.k * p.l / (total * p.g)),
    })
}

/// Single-frame equivalent of a stiff two-mass frame: the frame mass doubles,
/// so `mu -> mu/2` and `a -> 2a` at fixed `epsilon`; `Omega = 0`.
pub fn two_mass_rigid_limit(p: &PoincareParams) -> PoincareParams {
    PoincareParams { mu: p.mu / 2.0, a: 2.0 * p.a, sigma: p.sigma, omega: 0.0, gamma: p.gamma, kappa: None }
}

/// Modified damping `sigma / (a ((1 - Omega^2)^2 + sigma^2))`.
pub fn sigma_tilde(p: &PoincareParams) -> Result<f64> {
    if !(p.a > 0.0) {
        return Err(invalid("sigma_tilde requires a > 0"));
    }
    let w = 1.0 - p.omega * p.omega;
    Ok(p.sigma / (p.a * (w * w + p.sigma * p.sigma)))
}

/// Which sufficient stability condition for the in-phase regime applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityBranch {
    /// `a sigma < 1` and `sigma_tilde < gamma^2 / (2 (2 + gamma^2))`.
    LowDamping,
    /// `a sigma > 1` and `(a sigma - 1)/(a sigma) gamma^2/2 < sigma_tilde < gamma^2 / (2 (2 + gamma^2))`.
    HighDamping,
    /// Neither inequality pair holds.
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeSummary {
    AntiPhaseOnly,
    InPhaseUnstable,
    Coexist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub sigma_tilde: f64,
    pub exist_threshold: f64,
    pub stable_threshold: f64,
    pub a_sigma: f64,
    pub branch: StabilityBranch,
    pub regime_summary: RegimeSummary,
    /// Set when `sigma_tilde` is below the stability threshold but neither
    /// sufficient branch holds, so the in-phase stability is not decided.
    pub unclassified_by_theorem: bool,
}

/// Closed-form regime thresholds of the single-frame model with frame damping.
///
/// A value of `sigma_tilde` exactly on a threshold is put in the more
/// restrictive regime.
pub fn regime_thresholds(p: &PoincareParams) -> Result<ThresholdReport> {
    if p.gamma == 0.0 {
        return Err(invalid("gamma = 0 switches the escapement off; no limit cycle"));
    }
    if !(p.sigma > 0.0) {
        return Err(invalid("regime thresholds require sigma > 0"));
    }
    let st = sigma_tilde(p)?;
    let g2 = p.gamma * p.gamma;
    let exist = g2 / 2.0;
    let stable = g2 / (2.0 * (2.0 + g2));
    let a_sigma = p.a * p.sigma;
    let branch = if st < stable && a_sigma < 1.0 {
        StabilityBranch::LowDamping
    } else if st < stable && a_sigma > 1.0 && (a_sigma - 1.0) / a_sigma * exist < st {
        StabilityBranch::HighDamping
    } else {
        StabilityBranch::Neither
    };
    let regime_summary = if st >= exist {
        RegimeSummary::AntiPhaseOnly
    } else if st >= stable {
        RegimeSummary::InPhaseUnstable
    } else {
        RegimeSummary::Coexist
    };
    Ok(ThresholdReport {
        sigma_tilde: st,
        exist_threshold: exist,
        stable_threshold: stable,
        a_sigma,
        branch,
        regime_summary,
        unclassified_by_theorem: regime_summary == RegimeSummary::Coexist && branch == StabilityBranch::Neither,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn czolczynski() -> PhysicalParams {
        PhysicalParams { m: 0.158, big_m: 11.856, l: 0.269, g: 9.81, c: 11.856, k: 1.186, e: 0.0, gamma: 0.122, n: 2 }
    }

    #[test]
    fn czolczynski_conversion() {
        let d = to_dimensionless(&czolczynski()).unwrap();
        assert!((d.beta - 0.012980).abs() < 1e-6);
        assert!((d.omega2 - 0.002672).abs() < 5e-7);
        assert!((d.sigma - 0.16130).abs() < 5e-5);
    }

    #[test]
    fn mu_is_mass_ratio() {
        let p = czolczynski();
        let mu = to_poincare(&to_dimensionless(&p).unwrap()).unwrap().mu;
        assert_relative_eq!(mu, p.m / p.big_m, max_relative = 1e-12);
        assert!((mu - 0.013326).abs() < 1e-6);
    }

    #[test]
    fn massless_bobs_limit() {
        let mut p = czolczynski();
        p.m = 1e-300;
        let d = to_dimensionless(&p).unwrap();
        assert!(d.beta < 1e-290);
        assert_eq!(d.sigma, p.c / (p.big_m * libm::sqrt(p.g / p.l)));
        assert_eq!(d.omega2, p.k * p.l / (p.big_m * p.g));
    }

    #[test]
    fn rejects_nonpositive_masses() {
        for f in [
            |p: &mut PhysicalParams| p.m = 0.0,
            |p: &mut PhysicalParams| p.big_m = -1.0,
            |p: &mut PhysicalParams| p.l = 0.0,
            |p: &mut PhysicalParams| p.g = 0.0,
        ] {
            let mut p = czolczynski();
            f(&mut p);
            assert!(matches!(to_dimensionless(&p), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn poincare_examples() {
        let d = DimensionlessParams { sigma: 0.1, omega2: 0.0, beta: 0.012980, gamma: 0.1, epsilon: 0.0, n: 2 };
        assert!((to_poincare(&d).unwrap().mu - 0.013326).abs() < 1e-6);
        let d0 = DimensionlessParams { beta: 0.0, ..d };
        assert_eq!(to_poincare(&d0).unwrap().mu, 0.0);
        let d1 = DimensionlessParams { beta: 0.5, ..d };
        assert!(to_poincare(&d1).is_err());
        // epsilon = 0.1 with mu = 0.01
        let beta = 0.01 / 1.02;
        let d2 = DimensionlessParams { beta, epsilon: 0.1, ..d };
        assert_relative_eq!(to_poincare(&d2).unwrap().a, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn sigma_tilde_examples() {
        let p = PoincareParams { mu: 0.01, a: 5.0, sigma: 0.1, omega: 0.0, gamma: 0.5, kappa: None };
        assert_relative_eq!(sigma_tilde(&p).unwrap(), 0.02 / 1.01, max_relative = 1e-14);
        assert_eq!(sigma_tilde(&PoincareParams { sigma: 0.0, ..p }).unwrap(), 0.0);
        let q = PoincareParams { a: 1.0, sigma: 1.0, omega: 1.0, ..p };
        assert_eq!(sigma_tilde(&q).unwrap(), 1.0);
        assert!(sigma_tilde(&PoincareParams { a: 0.0, ..p }).is_err());
    }

    #[test]
    fn threshold_values() {
        let p = PoincareParams { mu: 0.01, a: 5.0, sigma: 0.001, omega: 0.0, gamma: 0.122, kappa: None };
        let r = regime_thresholds(&p).unwrap();
        assert!((r.stable_threshold - 0.0036935).abs() < 5e-8);
        assert!((r.exist_threshold - 0.0074420).abs() < 5e-8);
        assert_eq!(r.regime_summary, RegimeSummary::Coexist);
        assert_eq!(r.branch, StabilityBranch::LowDamping);
        assert!(regime_thresholds(&PoincareParams { gamma: 0.0, ..p }).is_err());
    }

    #[test]
    fn boundary_goes_to_restrictive_regime() {
        // sigma_tilde = sigma / a when Omega = 1; choose a so it equals gamma^2/2.
        let g = 0.5;
        let p = PoincareParams { mu: 0.01, a: 1.0, sigma: 0.125, omega: 1.0, gamma: g, kappa: None };
        let st = sigma_tilde(&p).unwrap();
        assert_eq!(st, 1.0 / 0.125);
        let p = PoincareParams { a: 0.125 / (g * g / 2.0) / (0.125 * 0.125), ..p };
        let r = regime_thresholds(&p).unwrap();
        assert_eq!(r.sigma_tilde, r.exist_threshold);
        assert_eq!(r.regime_summary, RegimeSummary::AntiPhaseOnly);
    }

    #[test]
    fn czolczynski_is_unclassified() {
        let mut p = czolczynski();
        p.e = 5.047 * p.m * p.g * p.l;
        let q = to_poincare(&to_dimensionless(&p).unwrap()).unwrap();
        let r = regime_thresholds(&q).unwrap();
        assert!(r.a_sigma > 1.0);
        assert_eq!(r.regime_summary, RegimeSummary::Coexist);
        assert!(r.unclassified_by_theorem);
    }

    proptest! {
        #[test]
        fn thresholds_ordered(g in 1e-4f64..3.0) {
            let p = PoincareParams { mu: 0.01, a: 1.0, sigma: 0.1, omega: 0.0, gamma: g, kappa: None };
            let r = regime_thresholds(&p).unwrap();
            prop_assert!(r.stable_threshold < r.exist_threshold);
        }

        #[test]
        fn sigma_tilde_monotone(s1 in 0.0f64..0.9, ds in 1e-6f64..0.05, a in 0.1f64..10.0, om in 0.0f64..0.3) {
            let w = 1.0 - om * om;
            let s2 = (s1 + ds).min(w);
            prop_assume!(s2 > s1);
            let p = PoincareParams { mu: 0.01, a, sigma: s1, omega: om, gamma: 0.3, kappa: None };
            let lo = sigma_tilde(&p).unwrap();
            let hi = sigma_tilde(&PoincareParams { sigma: s2, ..p }).unwrap();
            prop_assert!(hi >= lo);
            let a_big = sigma_tilde(&PoincareParams { a: a * 1.5, ..p }).unwrap();
            prop_assert!(a_big <= lo);
        }

        #[test]
        fn summary_non_increasing_in_sigma(a in 0.5f64..5.0, g in 0.05f64..0.6) {
            let mut last = RegimeSummary::Coexist;
            for i in 1..200 {
                let s = i as f64 * 0.005;
                let p = PoincareParams { mu: 0.01, a, sigma: s, omega: 0.0, gamma: g, kappa: None };
                let r = regime_thresholds(&p).unwrap().regime_summary;
                prop_assert!(r <= last);
                last = r;
            }
        }

        #[test]
        fn physical_round_trip(sigma in 0.0f64..2.0, omega2 in 0.0f64..0.1, beta in 1e-4f64..0.4, eps in 0.0f64..5.0) {
            let d = DimensionlessParams { sigma, omega2, beta, gamma: 0.1, epsilon: eps, n: 2 };
            let p = from_dimensionless(&d, 10.0, 0.25, 9.81).unwrap();
            let back = to_dimensionless(&p).unwrap();
            prop_assert!((back.sigma - sigma).abs() <= 1e-12 * (1.0 + sigma));
            prop_assert!((back.omega2 - omega2).abs() <= 1e-12);
            prop_assert!((back.beta - beta).abs() <= 1e-12);
            prop_assert!((back.epsilon - eps).abs() <= 1e-12 * (1.0 + eps));
        }
    }
}
