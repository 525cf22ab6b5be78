//! Synchronisation diagnostics for two-pendulum trajectories.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::poincare::wrap_phase;

/// Below this envelope value the phase of a pendulum is undefined.
pub const PHASE_AMPLITUDE_FLOOR: f64 = 1e-8;

/// Thresholds used by [`detect_regime`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyTolerances {
    /// Allowed distance of the smoothed phase difference from 0 or π (rad).
    pub phase_tol: f64,
    /// Allowed relative deviation of the smoothed envelopes from their final means.
    pub amp_tol: f64,
    /// A final envelope below this counts as a stopped pendulum.
    pub quench_tol: f64,
    /// Envelope modulation depth that counts as beating.
    pub beat_threshold: f64,
    /// Length of the final averaging window in nominal cycles...
    pub final_cycles: f64,
    /// ...capped at this fraction of the record.
    pub final_fraction: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        ClassifyTolerances {
            phase_tol: 0.05,
            amp_tol: 0.02,
            quench_tol: 1e-3,
            beat_threshold: 0.3,
            final_cycles: 50.0,
            final_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservedRegime {
    InPhase,
    AntiPhase,
    /// Still exchanging energy at the end of the record.
    Beats,
    /// At least one pendulum stopped.
    Quenched,
    Unsettled,
}

impl ObservedRegime {
    pub fn name(self) -> &'static str {
        match self {
            ObservedRegime::InPhase => "in-phase",
            ObservedRegime::AntiPhase => "anti-phase",
            ObservedRegime::Beats => "beats",
            ObservedRegime::Quenched => "quenched",
            ObservedRegime::Unsettled => "unsettled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncRegimeReport {
    pub regime: ObservedRegime,
    /// True when the envelope modulation before settling exceeded the beat threshold.
    pub beats: bool,
    pub settle_time: Option<f64>,
    /// Mean envelope of each pendulum over the final window.
    pub asymptotic_amplitude: Vec<f64>,
    pub measured_period: Option<f64>,
    pub period_std_error: Option<f64>,
    /// In `(-π, π]`.
    pub phase_difference_final: f64,
    pub beat_depth: f64,
}

/// `√(θᵢ² + θ̇ᵢ²)` at every sample.
pub fn envelope(traj: &Trajectory, pendulum: usize) -> Vec<f64> {
    (0..traj.len())
        .map(|k| {
            let s = traj.state(k);
            libm::hypot(s[2 * pendulum], s[2 * pendulum + 1])
        })
        .collect()
}

fn check_pair(traj: &Trajectory) -> Result<()> {
    if traj.n != 2 {
        return Err(invalid("synchronisation diagnostics need exactly two pendulums"));
    }
    Ok(())
}

/// Unwrapped `φ₁ − φ₂` with `φᵢ = atan2(−θ̇ᵢ, θᵢ)`. Samples where either
/// envelope is below [`PHASE_AMPLITUDE_FLOOR`] are `None`; unwrapping
/// continues from the last defined value.
pub fn phase_difference(traj: &Trajectory) -> Result<Vec<Option<f64>>> {
    check_pair(traj)?;
    let mut out = Vec::with_capacity(traj.len());
    let mut last: Option<f64> = None;
    for k in 0..traj.len() {
        let s = traj.state(k);
        if libm::hypot(s[0], s[1]) < PHASE_AMPLITUDE_FLOOR || libm::hypot(s[2], s[3]) < PHASE_AMPLITUDE_FLOOR {
            out.push(None);
            continue;
        }
        let raw = libm::atan2(-s[1], s[0]) - libm::atan2(-s[3], s[2]);
        let value = match last {
            None => wrap_phase(raw),
            Some(prev) => prev + wrap_phase(raw - prev),
        };
        last = Some(value);
        out.push(Some(value));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub period: f64,
    pub std_error: f64,
    pub crossings: usize,
}

/// Mean spacing of upward zero crossings of `θ₁` with `t₀ ≤ t ≤ t₁`.
pub fn measure_period(traj: &Trajectory, window: (f64, f64)) -> Result<PeriodEstimate> {
    let th = traj.theta(0);
    let t = &traj.times;
    let mut crossings = Vec::new();
    for k in 1..th.len() {
        if th[k - 1] < 0.0 && th[k] >= 0.0 {
            let tc = t[k - 1] + (t[k] - t[k - 1]) * (-th[k - 1]) / (th[k] - th[k - 1]);
            if tc >= window.0 && tc <= window.1 {
                crossings.push(tc);
            }
        }
    }
    if crossings.len() < 10 {
        return Err(Error::InsufficientData { crossings: crossings.len() });
    }
    let m = crossings.len() - 1;
    let period = (crossings[m] - crossings[0]) / m as f64;
    let var = crossings.windows(2).map(|w| (w[1] - w[0] - period).powi(2)).sum::<f64>() / (m.max(2) - 1) as f64;
    Ok(PeriodEstimate { period, std_error: libm::sqrt(var / m as f64), crossings: crossings.len() })
}

/// Trailing moving mean over `w` samples; entry `k` averages `k+1-w ..= k`
/// (shorter at the start).
fn moving_mean(x: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for k in 0..x.len() {
        acc += x[k];
        if k >= w {
            acc -= x[k - w];
        }
        out.push(acc / (k + 1).min(w) as f64);
    }
    out
}

/// Classifies the long-time behaviour of a two-pendulum trajectory.
pub fn detect_regime(traj: &Trajectory, tols: &ClassifyTolerances) -> Result<SyncRegimeReport> {
    check_pair(traj)?;
    let len = traj.len();
    if len < 4 {
        return Err(Error::InsufficientData { crossings: 0 });
    }
    let t = &traj.times;
    let t_end = t[len - 1];
    let dt = (t_end - t[0]) / (len - 1) as f64;
    let w = ((2.0 * PI / dt).round() as usize).clamp(1, len);
    let env = [moving_mean(&envelope(traj, 0), w), moving_mean(&envelope(traj, 1), w)];

    let raw_phase = phase_difference(traj)?;
    let mut filled = vec![0.0; len];
    let mut defined = vec![false; len];
    let mut last = 0.0;
    for (k, p) in raw_phase.iter().enumerate() {
        if let Some(v) = p {
            last = *v;
            defined[k] = true;
        }
        filled[k] = last;
    }
    let phase = moving_mean(&filled, w);
    let undefined_run = moving_mean(&defined.iter().map(|&d| if d { 0.0 } else { 1.0 }).collect::<Vec<_>>(), w);

    let final_len = (tols.final_cycles * 2.0 * PI).min(tols.final_fraction * (t_end - t[0]));
    let final_start = t.iter().position(|&x| x >= t_end - final_len).unwrap_or(len - 1).min(len - 1);
    let mean_tail = |v: &[f64]| v[final_start..].iter().sum::<f64>() / (len - final_start) as f64;
    let e_final = [mean_tail(&env[0]), mean_tail(&env[1])];
    let phase_final = wrap_phase(phase[len - 1]);
    let target = if phase_final.abs() <= PI / 2.0 { 0.0 } else { PI };

    let ok = |k: usize| {
        undefined_run[k] == 0.0
            && wrap_phase(phase[k] - target).abs() < tols.phase_tol
            && (0..2).all(|p| e_final[p] > 0.0 && (env[p][k] / e_final[p] - 1.0).abs() < tols.amp_tol)
    };
    let settle_index = match (0..len).rev().find(|&k| !ok(k)) {
        None => Some(0),
        Some(k) if k < final_start => Some(k + 1),
        Some(_) => None,
    };
    let settle_time = settle_index.map(|k| t[k]);

    let horizon = settle_index.unwrap_or(len);
    let mut beat_depth = 0.0f64;
    for p in 0..2 {
        let mut running = 0.0f64;
        for k in 0..horizon {
            running = running.max(env[p][k]);
            if running > 0.0 && env[p][k] < e_final[p] * (1.0 - tols.amp_tol) {
                beat_depth = beat_depth.max(1.0 - env[p][k] / running);
            }
        }
    }
    let beats = beat_depth > tols.beat_threshold;

    let quenched = e_final.iter().any(|&e| e < tols.quench_tol);
    let regime = if quenched {
        ObservedRegime::Quenched
    } else if settle_index.is_some() {
        if target == 0.0 {
            ObservedRegime::InPhase
        } else {
            ObservedRegime::AntiPhase
        }
    } else if beats {
        ObservedRegime::Beats
    } else {
        ObservedRegime::Unsettled
    };

    let window = (settle_time.unwrap_or(t[final_start]), t_end);
    let (measured_period, period_std_error) = match measure_period(traj, window) {
        Ok(est) => (Some(est.period), Some(est.std_error)),
        Err(_) => (None, None),
    };

    Ok(SyncRegimeReport {
        regime,
        beats,
        settle_time: if quenched { None } else { settle_time },
        asymptotic_amplitude: e_final.to_vec(),
        measured_period,
        period_std_error,
        phase_difference_final: phase_final,
        beat_depth,
    })
}
