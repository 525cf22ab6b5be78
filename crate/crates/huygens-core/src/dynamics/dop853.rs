//! Dormand–Prince 8(5,3) explicit Runge–Kutta pair with 7th-order dense output.
//!
//! The error estimate combines the 5th- and 3rd-order embedded solutions
//! (Hairer's construction) and is measured in the max norm with the mixed
//! scale `atol + rtol * max(|y_old|, |y_new|)`.

use super::tableau::{A, B, C, D, E3, E5};
use crate::error::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

const N_STAGES: usize = 12;
const N_EXTENDED: usize = 16;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

/// Design order of the propagated solution.
pub const ORDER: u32 = 8;

/// Smallest accepted relative tolerance.
pub const MIN_RTOL: f64 = 100.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dop853Options {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|.
    pub h_max: f64,
    /// Step budget before giving up.
    pub max_steps: usize,
}

impl Dop853Options {
    /// Same value for the absolute and relative tolerance.
    pub fn with_tol(tol: f64) -> Self {
        Dop853Options { rtol: tol, atol: tol, h_max: f64::INFINITY, max_steps: 50_000_000 }
    }
}

/// Output of a sampled integration: sample times and a row-major state table.
#[derive(Debug, Clone, Default)]
pub struct Samples {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

struct Work {
    k: Vec<f64>,
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    dim: usize,
}

impl Work {
    fn new(dim: usize) -> Self {
        Work { k: vec![0.0; N_EXTENDED * dim], tmp: vec![0.0; dim], y_new: vec![0.0; dim], dim }
    }

    fn stage(&self, s: usize) -> &[f64] {
        &self.k[s * self.dim..(s + 1) * self.dim]
    }
}

fn max_norm_scaled(v: &[f64], scale: &[f64]) -> f64 {
    v.iter().zip(scale).fold(0.0, |m, (x, s)| f64::max(m, libm::fabs(*x) / s))
}

/// Evaluates stages `from..to` of the extended tableau, reading `y` and writing into `w.k`.
fn run_stages<F>(f: &mut F, t: f64, h: f64, y: &[f64], w: &mut Work, from: usize, to: usize)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = w.dim;
    for s in from..to {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, a) in A[s][..s].iter().enumerate() {
                if *a != 0.0 {
                    acc += a * w.k[j * n + i];
                }
            }
            w.tmp[i] = y[i] + h * acc;
        }
        let (head, tail) = w.k.split_at_mut(s * n);
        let _ = head;
        f(t + C[s] * h, &w.tmp, &mut tail[..n]);
    }
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, opts: &Dop853Options) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let scale: Vec<f64> = y0.iter().map(|y| opts.atol + libm::fabs(*y) * opts.rtol).collect();
    let d0 = max_norm_scaled(y0, &scale);
    let d1 = max_norm_scaled(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + dir * h0 * d).collect();
    let mut f1 = vec![0.0; y0.len()];
    f(t0 + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = max_norm_scaled(&diff, &scale) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        f64::max(1e-6, h0 * 1e-3)
    } else {
        libm::pow(0.01 / f64::max(d1, d2), 1.0 / (ORDER as f64))
    };
    f64::min(f64::min(100.0 * h0, h1), opts.h_max)
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, recording the dense
/// solution at `t0 + j * sample_dt` (and at `t_end`).
///
/// Integration in negative time is allowed (`t_end < t0`); `sample_dt` is
/// taken by magnitude.
pub fn integrate_sampled<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    sample_dt: f64,
    opts: &Dop853Options,
) -> Result<Samples>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    if !(sample_dt > 0.0) || !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(crate::error::invalid("sample interval and tolerances must be positive"));
    }
    if opts.rtol < MIN_RTOL {
        return Err(crate::error::invalid("relative tolerance is below 100 machine epsilons"));
    }
    if y0.iter().any(|v| !v.is_finite()) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = libm::fabs(t_end - t0);
    let n_regular = libm::floor(span / sample_dt * (1.0 + 1e-14)) as usize;
    let mut sample_times: Vec<f64> = (0..=n_regular).map(|j| t0 + dir * (j as f64) * sample_dt).collect();
    if libm::fabs(t_end - sample_times[n_regular]) > 1e-9 * sample_dt {
        sample_times.push(t_end);
    } else {
        sample_times[n_regular] = t_end;
    }

    let mut out = Samples {
        times: Vec::with_capacity(sample_times.len()),
        states: Vec::with_capacity(sample_times.len() * n),
        ..Samples::default()
    };
    out.times.push(t0);
    out.states.extend_from_slice(y0);
    let mut next_sample = 1;
    if span == 0.0 {
        return Ok(out);
    }

    let mut w = Work::new(n);
    let mut y = y0.to_vec();
    let mut t = t0;
    f(t, &y, &mut w.k[..n]);
    let mut h_abs = initial_step(&mut f, t0, y0, &w.k[..n], dir, opts);
    let mut err5 = vec![0.0; n];
    let mut err3 = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let mut dense = vec![0.0; 7 * n];

    while next_sample < sample_times.len() {
        if out.accepted_steps + out.rejected_steps >= opts.max_steps {
            return Err(Error::IntegrationFailure { t_last: t, reason: "step budget exhausted" });
        }
        let min_step = 10.0 * libm::fabs(libm::nextafter(t, dir * f64::INFINITY) - t);
        h_abs = f64::min(h_abs, opts.h_max);
        if h_abs < min_step {
            return Err(Error::IntegrationFailure { t_last: t, reason: "step size underflow" });
        }
        let mut h = dir * h_abs;
        let mut t_new = t + h;
        if dir * (t_new - t_end) > 0.0 {
            t_new = t_end;
        }
        h = t_new - t;
        h_abs = libm::fabs(h);

        run_stages(&mut f, t, h, &y, &mut w, 1, N_STAGES);
        for i in 0..n {
            let mut acc = 0.0;
            for (j, b) in B.iter().enumerate() {
                acc += b * w.k[j * n + i];
            }
            w.y_new[i] = y[i] + h * acc;
        }
        {
            let (head, tail) = w.k.split_at_mut(N_STAGES * n);
            let _ = head;
            f(t_new, &w.y_new, &mut tail[..n]);
        }
        for i in 0..n {
            let (mut e5, mut e3) = (0.0, 0.0);
            for j in 0..=N_STAGES {
                let kj = w.k[j * n + i];
                e5 += E5[j] * kj;
                e3 += E3[j] * kj;
            }
            err5[i] = e5;
            err3[i] = e3;
            scale[i] = opts.atol + opts.rtol * f64::max(libm::fabs(y[i]), libm::fabs(w.y_new[i]));
        }
        let n5 = max_norm_scaled(&err5, &scale);
        let n3 = max_norm_scaled(&err3, &scale);
        let err = if n5 == 0.0 && n3 == 0.0 { 0.0 } else { h_abs * n5 * n5 / libm::sqrt(n5 * n5 + 0.01 * n3 * n3) };
        let finite = err.is_finite() && w.y_new.iter().all(|v| v.is_finite());

        if !finite || err > 1.0 {
            let factor =
                if finite { f64::max(MIN_FACTOR, SAFETY * libm::pow(err, ERROR_EXPONENT)) } else { MIN_FACTOR };
            h_abs *= factor;
            out.rejected_steps += 1;
            continue;
        }

        // Dense output for every sample in (t, t_new].
        if next_sample < sample_times.len() && dir * (sample_times[next_sample] - t_new) <= 0.0 {
            run_stages(&mut f, t, h, &y, &mut w, N_STAGES + 1, N_EXTENDED);
            let f_old = w.stage(0);
            let f_new = w.stage(N_STAGES);
            for i in 0..n {
                let dy = w.y_new[i] - y[i];
                dense[i] = dy;
                dense[n + i] = h * f_old[i] - dy;
                dense[2 * n + i] = 2.0 * dy - h * (f_new[i] + f_old[i]);
                for (r, drow) in D.iter().enumerate() {
                    let mut acc = 0.0;
                    for (j, d) in drow.iter().enumerate() {
                        if *d != 0.0 {
                            acc += d * w.k[j * n + i];
                        }
                    }
                    dense[(3 + r) * n + i] = h * acc;
                }
            }
            while next_sample < sample_times.len() && dir * (sample_times[next_sample] - t_new) <= 0.0 {
                let ts = sample_times[next_sample];
                if ts == t_new {
                    out.states.extend_from_slice(&w.y_new);
                } else {
                    let x = (ts - t) / h;
                    for i in 0..n {
                        let mut v = 0.0;
                        for q in (0..7).rev() {
                            v += dense[q * n + i];
                            v *= if (6 - q) % 2 == 0 { x } else { 1.0 - x };
                        }
                        out.states.push(y[i] + v);
                    }
                }
                out.times.push(ts);
                next_sample += 1;
            }
        }

        let factor =
            if err == 0.0 { MAX_FACTOR } else { f64::min(MAX_FACTOR, SAFETY * libm::pow(err, ERROR_EXPONENT)) };
        t = t_new;
        y.copy_from_slice(&w.y_new);
        w.k.copy_within(N_STAGES * n..(N_STAGES + 1) * n, 0);
        h_abs *= factor;
        out.accepted_steps += 1;
    }
    Ok(out)
}

/// Propagates with `steps` equal steps of the 8th-order formula and no error control.
pub fn fixed_step<F>(mut f: F, t0: f64, y0: &[f64], t_end: f64, steps: usize) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut w = Work::new(n);
    let mut y = y0.to_vec();
    let h = (t_end - t0) / steps as f64;
    for step in 0..steps {
        let t = t0 + step as f64 * h;
        f(t, &y, &mut w.k[..n]);
        run_stages(&mut f, t, h, &y, &mut w, 1, N_STAGES);
        for i in 0..n {
            let mut acc = 0.0;
            for (j, b) in B.iter().enumerate() {
                acc += b * w.k[j * n + i];
            }
            y[i] += h * acc;
        }
    }
    y
}
