//! Right-hand sides of the clock models and trajectory integration.
//!
//! All one-frame models use the state layout
//! `(theta_1, dtheta_1, ..., theta_n, dtheta_n, y, dy)`; the two-mass frame uses
//! `(theta_1, dtheta_1, theta_2, dtheta_2, y_1, dy_1, y_2, dy_2)`.

pub mod dop853;
#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
mod tableau;

use crate::error::{invalid, Error, Result};
use crate::params::{DimensionlessParams, PoincareParams};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

pub use dop853::Dop853Options;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Lagrangian equations with `sin`/`cos` kept, in dimensionless time.
    FullNonlinear,
    /// Partially linearized single-frame system with van der Pol escapements.
    Dimensionless,
    /// The same system with every nonlinear term dropped.
    Linear,
    /// Small-parameter form with frame damping `sigma = mu b` treated as small.
    SmallSigma,
    /// Small-parameter form with finite frame damping.
    ThreeDof,
    /// Two casings joined by a spring and damper, no support.
    TwoMass,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::FullNonlinear,
        ModelKind::Dimensionless,
        ModelKind::Linear,
        ModelKind::SmallSigma,
        ModelKind::ThreeDof,
        ModelKind::TwoMass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::FullNonlinear => "full-nonlinear",
            ModelKind::Dimensionless => "dimensionless",
            ModelKind::Linear => "linear",
            ModelKind::SmallSigma => "small-sigma",
            ModelKind::ThreeDof => "three-dof",
            ModelKind::TwoMass => "two-mass",
        }
    }

    pub fn from_name(s: &str) -> Option<ModelKind> {
        ModelKind::ALL.iter().copied().find(|m| m.name() == s)
    }

    /// Models written as `x' = A x + mu Phi(x)`.
    pub fn is_mu_form(self) -> bool {
        matches!(self, ModelKind::SmallSigma | ModelKind::ThreeDof | ModelKind::TwoMass)
    }

    pub fn state_len(self, n: usize) -> usize {
        match self {
            ModelKind::TwoMass => 2 * n + 4,
            _ => 2 * n + 2,
        }
    }
}

/// Parameters in whichever layer a model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "kebab-case")]
pub enum ModelParams {
    Dimensionless(DimensionlessParams),
    Poincare(PoincareParams),
}

/// A model bound to validated parameters, ready for evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    kind: ModelKind,
    params: ModelParams,
    n: usize,
}

impl Model {
    /// Binds `params` to `kind`. The μ-form models take [`PoincareParams`] and
    /// are defined for `n = 2` pendulums only when the two-mass frame is used.
    pub fn new(kind: ModelKind, params: ModelParams, n: usize) -> Result<Model> {
        if n == 0 {
            return Err(invalid("pendulum count must be at least 1"));
        }
        match (kind.is_mu_form(), &params) {
            (false, ModelParams::Dimensionless(d)) => {
                d.validate()?;
                if d.n != n {
                    return Err(invalid("pendulum count differs from parameter set"));
                }
            }
            (true, ModelParams::Poincare(p)) => {
                p.validate()?;
                if kind == ModelKind::TwoMass {
                    if n != 2 {
                        return Err(invalid("two-mass model is defined for n = 2"));
                    }
                    if p.kappa.is_none() {
                        return Err(invalid("two-mass model needs kappa"));
                    }
                }
                if kind == ModelKind::SmallSigma && !(p.mu > 0.0) {
                    return Err(invalid("small-sigma model needs mu > 0 (sigma = mu b)"));
                }
            }
            (false, _) => return Err(invalid("this model takes dimensionless parameters")),
            (true, _) => return Err(invalid("this model takes small-parameter (poincare) parameters")),
        }
        Ok(Model { kind, params, n })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn pendulums(&self) -> usize {
        self.n
    }

    pub fn state_len(&self) -> usize {
        self.kind.state_len(self.n)
    }

    /// Writes the time derivative of `x` into `dx`. Lengths are not checked here.
    pub fn eval(&self, x: &[f64], dx: &mut [f64]) {
        let n = self.n;
        match (self.kind, self.params) {
            (ModelKind::Dimensionless, ModelParams::Dimensionless(d)) => {
                let (y, dy) = (x[2 * n], x[2 * n + 1]);
                let mut drive = 0.0;
                for i in 0..n {
                    let (th, om) = (x[2 * i], x[2 * i + 1]);
                    let f = d.epsilon * (d.gamma * d.gamma - th * th) * om;
                    drive += f - th - om * om * th;
                    dx[2 * i + 1] = f - th;
                }
                let ydd = (-d.sigma * dy - d.omega2 * y - d.beta * drive) / (1.0 - n as f64 * d.beta);
                for i in 0..n {
                    dx[2 * i] = x[2 * i + 1];
                    dx[2 * i + 1] -= ydd;
                }
                dx[2 * n] = dy;
                dx[2 * n + 1] = ydd;
            }
            (ModelKind::Linear, ModelParams::Dimensionless(d)) => {
                let (y, dy) = (x[2 * n], x[2 * n + 1]);
                let sum: f64 = (0..n).map(|i| x[2 * i]).sum();
                let ydd = (-d.sigma * dy - d.omega2 * y + d.beta * sum) / (1.0 - n as f64 * d.beta);
                for i in 0..n {
                    dx[2 * i] = x[2 * i + 1];
                    dx[2 * i + 1] = -x[2 * i] - ydd;
                }
                dx[2 * n] = dy;
                dx[2 * n + 1] = ydd;
            }
            (ModelKind::FullNonlinear, ModelParams::Dimensionless(d)) => {
                let (y, dy) = (x[2 * n], x[2 * n + 1]);
                let (mut rhs, mut lhs) = (-d.sigma * dy - d.omega2 * y, 1.0);
                for i in 0..n {
                    let (th, om) = (x[2 * i], x[2 * i + 1]);
                    let (s, c) = (libm::sin(th), libm::cos(th));
                    let f = d.epsilon * (d.gamma * d.gamma - th * th) * om;
                    // theta_i'' = f - sin - y'' cos; substitute into the frame equation.
                    rhs -= d.beta * ((f - s) * c - om * om * s);
                    lhs -= d.beta * c * c;
                    dx[2 * i + 1] = f - s;
                }
                let ydd = rhs / lhs;
                for i in 0..n {
                    dx[2 * i] = x[2 * i + 1];
                    dx[2 * i + 1] -= ydd * libm::cos(x[2 * i]);
                }
                dx[2 * n] = dy;
                dx[2 * n + 1] = ydd;
            }
            (ModelKind::ThreeDof, ModelParams::Poincare(p)) => {
                let (y, dy) = (x[2 * n], x[2 * n + 1]);
                let w2 = p.omega * p.omega;
                let frame = p.sigma * dy + w2 * y;
                let mut big_f = -(n as f64) * frame;
                for i in 0..n {
                    let (th, om) = (x[2 * i], x[2 * i + 1]);
                    big_f += (1.0 + om * om) * th;
                }
                for i in 0..n {
                    let (th, om) = (x[2 * i], x[2 * i + 1]);
                    let fi = p.a * (p.gamma * p.gamma - th * th) * om;
                    dx[2 * i] = om;
                    dx[2 * i + 1] = -th + frame + p.mu * (fi - big_f);
                }
                dx[2 * n] = dy;
                dx[2 * n + 1] = -frame + p.mu * big_f;
            }
            (ModelKind::SmallSigma, ModelParams::Poincare(p)) => {
                let (y, dy) = (x[2 * n], x[2 * n + 1]);
                let w2 = p.omega * p.omega;
                let b = p.sigma / p.mu;
                let mut big_f = -b * dy - (n as f64) * w2 * y;
                for i in 0..n {
                    let (th, om) = (x[2 * i], x[2 * i + 1]);
                    big_f += (1.0 + om * om) * th;
                }
                for i in 0..n {
                    let (th, om) = (x[2 * i], x[2 * i + 1]);
                    let fi = p.a * (p.gamma * p.gamma - th * th) * om;
                    dx[2 * i] = om;
                    dx[2 * i + 1] = -th + w2 * y + p.mu * (fi - big_f);
                }
                dx[2 * n] = dy;
                dx[2 * n + 1] = -w2 * y + p.mu * big_f;
            }
            (ModelKind::TwoMass, ModelParams::Poincare(p)) => {
                let k = p.kappa.unwrap_or(0.0);
                let s = p.sigma;
                let (t1, o1, t2, o2) = (x[0], x[1], x[2], x[3]);
                let (y1, v1, y2, v2) = (x[4], x[5], x[6], x[7]);
                let spring = k * (y2 - y1);
                let g1 = -s * v1 + spring + t1 * (1.0 + o1 * o1);
                let g2 = -s * v2 - spring + t2 * (1.0 + o2 * o2);
                let f1 = p.a * (p.gamma * p.gamma - t1 * t1) * o1;
                let f2 = p.a * (p.gamma * p.gamma - t2 * t2) * o2;
                dx[0] = o1;
                dx[1] = -t1 + s * v1 - spring + p.mu * (f1 - g1);
                dx[2] = o2;
                dx[3] = -t2 + s * v2 + spring + p.mu * (f2 - g2);
                dx[4] = v1;
                dx[5] = -s * v1 + spring + p.mu * g1;
                dx[6] = v2;
                dx[7] = -s * v2 - spring + p.mu * g2;
            }
            _ => unreachable!("layer checked in Model::new"),
        }
    }
}

/// Time derivative of `state` under `model` with `params`.
pub fn rhs(kind: ModelKind, state: &[f64], params: ModelParams) -> Result<Vec<f64>> {
    let n = pendulums_for(kind, state.len(), &params)?;
    let model = Model::new(kind, params, n)?;
    check_state(&model, state)?;
    let mut out = vec![0.0; state.len()];
    model.eval(state, &mut out);
    Ok(out)
}

fn pendulums_for(kind: ModelKind, len: usize, params: &ModelParams) -> Result<usize> {
    let n = match (kind, params) {
        (ModelKind::TwoMass, _) => 2,
        (_, ModelParams::Dimensionless(d)) => d.n,
        (_, ModelParams::Poincare(_)) => (len.max(4) - 2) / 2,
    };
    Ok(n)
}

fn check_state(model: &Model, state: &[f64]) -> Result<()> {
    if state.len() != model.state_len() {
        return Err(Error::Shape { expected: model.state_len(), got: state.len() });
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state"));
    }
    Ok(())
}

/// Sampled solution of one of the models.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    states: Vec<f64>,
    dim: usize,
    pub model: ModelKind,
    pub params: ModelParams,
    pub n: usize,
}

impl Trajectory {
    /// Builds a trajectory from raw columns, checking the shape invariants.
    pub fn from_parts(
        times: Vec<f64>,
        states: Vec<f64>,
        model: ModelKind,
        params: ModelParams,
        n: usize,
    ) -> Result<Trajectory> {
        let dim = model.state_len(n);
        if states.len() != times.len() * dim {
            return Err(Error::Shape { expected: times.len() * dim, got: states.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("trajectory times must be strictly increasing"));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory"));
        }
        Ok(Trajectory { times, states, dim, model, params, n })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states_flat(&self) -> &[f64] {
        &self.states
    }

    /// Column `j` of the state table.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.states.iter().skip(j).step_by(self.dim).copied().collect()
    }

    pub fn theta(&self, pendulum: usize) -> Vec<f64> {
        self.component(2 * pendulum)
    }

    pub fn dtheta(&self, pendulum: usize) -> Vec<f64> {
        self.component(2 * pendulum + 1)
    }
}

/// Options for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Local error tolerance, used as both absolute and relative tolerance.
    pub tol: f64,
    /// Spacing of the dense-output samples.
    pub sample_interval: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { tol: 1e-9, sample_interval: 2.0 * PI / 200.0 }
    }
}

/// Integrates `model` from `state0` over `[0, t_end]`.
pub fn integrate(model: &Model, state0: &[f64], t_end: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    check_state(model, state0)?;
    if !(t_end > 0.0) {
        return Err(invalid("t_end must be positive"));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let samples = dop853::integrate_sampled(
        |_t, x, dx| model.eval(x, dx),
        0.0,
        state0,
        t_end,
        opts.sample_interval,
        &Dop853Options::with_tol(opts.tol),
    )?;
    if samples.states.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationFailure { t_last: t_end, reason: "non-finite state" });
    }
    Ok(Trajectory {
        times: samples.times,
        states: samples.states,
        dim: model.state_len(),
        model: model.kind,
        params: model.params,
        n: model.n,
    })
}

/// Removes the rigid-body component of a two-mass state.
///
/// The zero eigenvalue of the two-mass generating matrix has left vector
/// `w = (0,0,0,0, sigma,1, sigma,1)` and right vector `v = (0,0,0,0, 1,0, 1,0)`;
/// the returned state satisfies `w . x = 0`.
pub fn project_rigid_mode(state: &[f64], params: &PoincareParams) -> Result<Vec<f64>> {
    if state.len() != 8 {
        return Err(Error::Shape { expected: 8, got: state.len() });
    }
    if !(params.sigma > 0.0) {
        return Err(invalid("rigid-mode projection needs sigma > 0"));
    }
    let s = params.sigma;
    let c = (s * state[4] + state[5] + s * state[6] + state[7]) / (2.0 * s);
    let mut out = state.to_vec();
    out[4] -= c;
    out[6] -= c;
    Ok(out)
}
