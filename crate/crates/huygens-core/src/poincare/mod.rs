//! Periodic solutions of quasi-linear systems `x' = A x + μ Φ(x)` by the
//! Poincaré small-parameter method, plus closed-form predictions for the
//! clock models.
//!
//! The engine diagonalises `A` from its known spectrum, averages the
//! transformed nonlinearity over the generating solution, solves the
//! amplitude equations for the symmetric ansatz `r₁ = r₂ = r`, and reports
//! the first-order period correction and the stability roots.

mod closed;
pub mod linalg;
pub mod poly;
pub mod roots;

pub use closed::{closed_form_regimes, ClosedFormSource, RegimePrediction};

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::ModelKind;
use crate::error::{invalid, Error, Result};
use crate::linear::generating_modes;
use crate::params::PoincareParams;
use linalg::{normalize, CMatrix};
use poly::Poly;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tolerance on `|λ/iω − round(λ/iω)|` for integer-multiple detection.
pub const INTEGER_TOL: f64 = 1e-9;
/// Window around integers and half-integers that is rejected as ambiguous.
pub const RESONANCE_TOL: f64 = 1e-6;
/// Real parts below `-CRITICAL_TOL` count as non-critical (damped).
pub const CRITICAL_TOL: f64 = 1e-10;
/// Bound on `‖VΛV⁻¹ − A‖_∞`.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Stop criterion for the amplitude solver on `‖Q‖ / r²`.
pub const SOLVER_TOL: f64 = 1e-12;
pub const SOLVER_MAX_ITER: usize = 50;
/// A root counts as stable when its real part is below `-STABILITY_TOL`.
pub const STABILITY_TOL: f64 = 1e-9;
/// `|φ|` (or `|φ ∓ π|`) below this classifies a solution as in-phase (anti-phase).
pub const PHASE_TOL: f64 = 1e-6;

/// `x' = A x + μ Φ(x)` with a polynomial `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiLinearSystem {
    pub dim: usize,
    /// Row-major `dim × dim`.
    pub a: Vec<f64>,
    pub phi: Vec<Poly>,
    pub mu: f64,
    pub model: ModelKind,
    pub params: PoincareParams,
}

impl QuasiLinearSystem {
    pub fn a_matrix(&self) -> CMatrix {
        CMatrix::from_real(self.dim, self.dim, &self.a).expect("square by construction")
    }

    pub fn a_entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.dim + j]
    }

    pub fn phi_real(&self, x: &[f64]) -> Vec<f64> {
        self.phi.iter().map(|p| p.eval(x)).collect()
    }

    pub fn phi_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.phi.iter().map(|p| p.eval_complex(x)).collect()
    }

    /// `A x + μ Φ(x)`.
    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        let phi = self.phi_real(x);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.a_entry(i, j) * x[j]).sum::<f64>() + self.mu * phi[i])
            .collect()
    }

    pub fn max_degree(&self) -> u32 {
        self.phi.iter().map(Poly::degree).max().unwrap_or(0)
    }
}

/// Builds `A` and `Φ` for the two-pendulum small-parameter models.
pub fn build_system(model: ModelKind, params: &PoincareParams) -> Result<QuasiLinearSystem> {
    params.validate()?;
    let s = params.sigma;
    let w2 = params.omega * params.omega;
    let (a, g2) = (params.a, params.gamma * params.gamma);
    let escapement =
        |dim: usize, th: usize, om: usize| Poly::zero(dim).with(a * g2, &[(om, 1)]).with(-a, &[(th, 2), (om, 1)]);
    let bob = |dim: usize, th: usize, om: usize| Poly::zero(dim).with(1.0, &[(th, 1)]).with(1.0, &[(th, 1), (om, 2)]);
    let (dim, a_mat, phi) = match model {
        ModelKind::ThreeDof | ModelKind::SmallSigma => {
            let d = 6;
            let small = model == ModelKind::SmallSigma;
            if small && !(params.mu > 0.0) {
                return Err(invalid("small-sigma model needs mu > 0 (sigma = mu b)"));
            }
            let frame_damp = if small { 0.0 } else { s };
            #[rustfmt::skip]
            let a_mat = vec![
                0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
                -1.0, 0.0, 0.0, 0.0, w2, frame_damp,
                0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
                0.0, 0.0, -1.0, 0.0, w2, frame_damp,
                0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
                0.0, 0.0, 0.0, 0.0, -w2, -frame_damp,
            ];
            let damp = if small { s / params.mu } else { 2.0 * s };
            let big_f = Poly::zero(d)
                .with(-damp, &[(5, 1)])
                .with(-2.0 * w2, &[(4, 1)])
                .add_scaled(1.0, &bob(d, 0, 1))
                .add_scaled(1.0, &bob(d, 2, 3));
            let phi = vec![
                Poly::zero(d),
                escapement(d, 0, 1).add_scaled(-1.0, &big_f),
                Poly::zero(d),
                escapement(d, 2, 3).add_scaled(-1.0, &big_f),
                Poly::zero(d),
                big_f,
            ];
            (d, a_mat, phi)
        }
        ModelKind::TwoMass => {
            let d = 8;
            let k = params.kappa.ok_or_else(|| invalid("two-mass model needs kappa"))?;
            #[rustfmt::skip]
            let a_mat = vec![
                0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                -1.0, 0.0, 0.0, 0.0, k, s, -k, 0.0,
                0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
                0.0, 0.0, -1.0, 0.0, -k, 0.0, k, s,
                0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
                0.0, 0.0, 0.0, 0.0, -k, -s, k, 0.0,
                0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
                0.0, 0.0, 0.0, 0.0, k, 0.0, -k, -s,
            ];
            let g1 =
                Poly::zero(d).with(-s, &[(5, 1)]).with(k, &[(6, 1)]).with(-k, &[(4, 1)]).add_scaled(1.0, &bob(d, 0, 1));
            let g2c =
                Poly::zero(d).with(-s, &[(7, 1)]).with(-k, &[(6, 1)]).with(k, &[(4, 1)]).add_scaled(1.0, &bob(d, 2, 3));
            let phi = vec![
                Poly::zero(d),
                escapement(d, 0, 1).add_scaled(-1.0, &g1),
                Poly::zero(d),
                escapement(d, 2, 3).add_scaled(-1.0, &g2c),
                Poly::zero(d),
                g1,
                Poly::zero(d),
                g2c,
            ];
            (d, a_mat, phi)
        }
        other => return Err(Error::UnsupportedModel(other.name())),
    };
    Ok(QuasiLinearSystem { dim, a: a_mat, phi, mu: params.mu, model, params: *params })
}

/// `A = V Λ V⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub v: CMatrix,
    pub lambda: Vec<Complex64>,
    pub vinv: CMatrix,
    /// `conj_of[j] = Some(s)` when column `j` was set to the conjugate of column `s`.
    pub conj_of: Vec<Option<usize>>,
}

impl EigenDecomposition {
    pub fn reconstruction_error(&self, a: &CMatrix) -> f64 {
        self.v.mul(&CMatrix::from_diagonal(&self.lambda)).mul(&self.vinv).sub(a).norm_inf()
    }
}

/// Eigenvectors of `a` for the supplied spectrum, by null-space extraction.
///
/// Columns are unit vectors whose first nonzero entry is positive real. For
/// a real matrix and a non-real eigenvalue whose conjugate appears earlier
/// in the list, the columns are the conjugates of the earlier ones.
pub fn diagonalize(a: &CMatrix, lambda: &[Complex64]) -> Result<EigenDecomposition> {
    let n = a.rows();
    if a.cols() != n || lambda.len() != n {
        return Err(Error::Shape { expected: n, got: lambda.len() });
    }
    if lambda.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    let scale = a.norm_inf().max(1.0);
    let same = |x: Complex64, y: Complex64| (x - y).norm() <= 1e-9 * scale;
    let real = (0..n).all(|i| (0..n).all(|j| a[(i, j)].im == 0.0));
    let mut v = CMatrix::zeros(n, n);
    let mut conj_of = vec![None; n];
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        let group: Vec<usize> = (i..n).filter(|&j| !done[j] && same(lambda[j], lambda[i])).collect();
        let partner: Vec<usize> = if real && lambda[i].im.abs() > 1e-9 * scale {
            (0..i).filter(|&j| same(lambda[j], lambda[i].conj())).collect()
        } else {
            Vec::new()
        };
        if !partner.is_empty() && partner.len() == group.len() {
            for (&j, &p) in group.iter().zip(&partner) {
                let col: Vec<Complex64> = v.column(p).iter().map(|z| z.conj()).collect();
                v.set_column(j, &col);
                conj_of[j] = Some(p);
                done[j] = true;
            }
            continue;
        }
        let mut shifted = a.clone();
        for d in 0..n {
            shifted[(d, d)] -= lambda[i];
        }
        let basis = shifted.null_space(1e-9);
        if basis.len() != group.len() {
            let second = group.get(1).copied().unwrap_or_else(|| nearest_other(lambda, i));
            return Err(Error::Degeneracy { first: i, second });
        }
        for (&j, mut col) in group.iter().zip(basis) {
            normalize(&mut col, 1e-12);
            v.set_column(j, &col);
            done[j] = true;
        }
    }
    let vinv = v.inverse().ok_or(Error::Degeneracy { first: 0, second: nearest_other(lambda, 0) })?;
    let dec = EigenDecomposition { v, lambda: lambda.to_vec(), vinv, conj_of };
    if !(dec.reconstruction_error(a) < RECONSTRUCTION_TOL) {
        let (first, second) = closest_pair(lambda);
        return Err(Error::Degeneracy { first, second });
    }
    Ok(dec)
}

fn nearest_other(lambda: &[Complex64], i: usize) -> usize {
    (0..lambda.len())
        .filter(|&j| j != i)
        .min_by(|&x, &y| (lambda[x] - lambda[i]).norm().total_cmp(&(lambda[y] - lambda[i]).norm()))
        .unwrap_or(i)
}

fn closest_pair(lambda: &[Complex64]) -> (usize, usize) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..lambda.len() {
        for j in i + 1..lambda.len() {
            let d = (lambda[i] - lambda[j]).norm();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}

/// Diagonalises the system matrix using the closed-form spectrum, after
/// rejecting parameter sets where two eigenvalues (nearly) coalesce.
pub fn decompose(system: &QuasiLinearSystem) -> Result<EigenDecomposition> {
    let p = &system.params;
    let s2 = p.sigma * p.sigma;
    match system.model {
        ModelKind::ThreeDof if (s2 - 4.0 * p.omega * p.omega).abs() < 1e-10 => {
            return Err(Error::Degeneracy { first: 4, second: 5 });
        }
        ModelKind::TwoMass => {
            let k = p.kappa.unwrap_or(0.0);
            if (s2 - 8.0 * k).abs() < 1e-10 {
                return Err(Error::Degeneracy { first: 4, second: 5 });
            }
            if p.sigma.abs() < 1e-10 {
                return Err(Error::Degeneracy { first: 6, second: 7 });
            }
        }
        _ => {}
    }
    let modes = generating_modes(system.model, p)?;
    diagonalize(&system.a_matrix(), &modes.eigenvalues)
}

/// Partition of the spectrum relative to a base frequency `ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenGrouping {
    pub omega: f64,
    /// `(index, n_s)` with `λ_s = i n_s ω`; zero modes first.
    pub leading: Vec<(usize, i32)>,
    /// `(index, n_s)` with `λ_s = i (n_s + ½) ω`.
    pub secondary: Vec<(usize, i32)>,
    /// Remaining critical indices, grouped when their eigenvalues differ by
    /// an integer multiple of `iω`.
    pub nonspecial: Vec<Vec<usize>>,
    pub noncritical: Vec<usize>,
}

impl EigenGrouping {
    pub fn multiplier(&self, index: usize) -> Option<i32> {
        self.leading.iter().find(|l| l.0 == index).map(|l| l.1)
    }
}

fn nearest_int(x: f64) -> f64 {
    libm::round(x)
}

/// Sorts eigenvalues into leading special, secondary special, non-special
/// and non-critical groups.
pub fn group_eigenvalues(lambda: &[Complex64], omega: f64) -> Result<EigenGrouping> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(invalid("base frequency must be positive"));
    }
    let mut zeros = Vec::new();
    let mut rest = Vec::new();
    let mut secondary = Vec::new();
    let mut other = Vec::new();
    let mut noncritical = Vec::new();
    for (s, z) in lambda.iter().enumerate() {
        if z.re < -CRITICAL_TOL {
            noncritical.push(s);
            continue;
        }
        if z.re > CRITICAL_TOL {
            return Err(invalid("generating system has an eigenvalue with positive real part"));
        }
        let ratio = z.im / omega;
        let int = nearest_int(ratio);
        let half = libm::floor(ratio) + 0.5;
        if (ratio - int).abs() <= INTEGER_TOL {
            if int == 0.0 {
                zeros.push((s, 0));
            } else {
                rest.push((s, int as i32));
            }
        } else if (ratio - half).abs() <= INTEGER_TOL {
            secondary.push((s, libm::floor(ratio) as i32));
        } else if (ratio - int).abs() <= RESONANCE_TOL || (ratio - half).abs() <= RESONANCE_TOL {
            return Err(Error::Resonance { index: s, ratio });
        } else {
            other.push(s);
        }
    }
    let mut leading = zeros;
    leading.extend(rest);
    for &(s, _) in &leading {
        let c = lambda[s].conj();
        if !leading.iter().any(|&(j, _)| (lambda[j] - c).norm() <= INTEGER_TOL * omega.max(1.0)) {
            return Err(invalid("leading special group is not closed under conjugation"));
        }
    }
    let mut nonspecial: Vec<Vec<usize>> = Vec::new();
    for s in other {
        let slot = nonspecial.iter_mut().find(|g| {
            let d = (lambda[s].im - lambda[g[0]].im) / omega;
            (d - nearest_int(d)).abs() <= INTEGER_TOL
        });
        match slot {
            Some(g) => g.push(s),
            None => nonspecial.push(vec![s]),
        }
    }
    Ok(EigenGrouping { omega, leading, secondary, nonspecial, noncritical })
}

/// `(1/N) Σ f(t_j) e^{-i m ω t_j}` on `N` equally spaced nodes over one
/// period `2π/ω`. Exact for trigonometric polynomials whose harmonics
/// (after the shift by `m`) stay below `N` in absolute value.
pub fn harmonic_average<F: FnMut(f64) -> Complex64>(mut f: F, m: i32, omega: f64, nodes: usize) -> Complex64 {
    let period = 2.0 * PI / omega;
    let mut acc = ZERO;
    for j in 0..nodes {
        let t = period * j as f64 / nodes as f64;
        acc += f(t) * Complex64::from_polar(1.0, -(m as f64) * omega * t);
    }
    acc / nodes as f64
}

/// Synchronisation pattern of a periodic solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    InPhase,
    AntiPhase,
    /// Phase difference neither 0 nor π.
    Other,
}

impl Regime {
    pub fn from_phase(phi: f64) -> Regime {
        let w = wrap_phase(phi);
        if w.abs() < PHASE_TOL {
            Regime::InPhase
        } else if (w.abs() - PI).abs() < PHASE_TOL {
            Regime::AntiPhase
        } else {
            Regime::Other
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::InPhase => "in-phase",
            Regime::AntiPhase => "anti-phase",
            Regime::Other => "other",
        }
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut w = libm::remainder(phi, 2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Starting point of the amplitude solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub r0: f64,
    pub phi0: f64,
}

/// Roots of a stability determinant with its monic polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRoots {
    /// Highest degree first.
    pub coefficients: Vec<Complex64>,
    pub roots: Vec<Complex64>,
}

impl StabilityRoots {
    pub fn stable(&self) -> bool {
        self.roots.iter().all(|z| z.re < -STABILITY_TOL)
    }
}

/// A converged periodic solution with its first-order data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSolution {
    pub regime: Regime,
    pub exists: bool,
    /// Pendulum amplitude `2r`.
    pub amplitude: f64,
    pub period: f64,
    pub delta1: f64,
    pub stable: bool,
    /// Leading roots followed by non-special roots.
    pub roots: Vec<Complex64>,
    pub r: f64,
    pub phi: f64,
    pub alphas: Vec<Complex64>,
    pub leading_roots: Vec<Complex64>,
    pub nonspecial_roots: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Amplitude-equation machinery for one system.
#[derive(Debug, Clone)]
pub struct PoincareEngine {
    system: QuasiLinearSystem,
    decomposition: EigenDecomposition,
    grouping: EigenGrouping,
    /// Leading indices in solver order: zero modes, other harmonics, the
    /// `n = 1` modes driving each pendulum, then their conjugates.
    layout: Vec<(usize, i32)>,
    positives: Vec<usize>,
    nodes: usize,
}

impl PoincareEngine {
    pub fn new(system: QuasiLinearSystem) -> Result<PoincareEngine> {
        let decomposition = decompose(&system)?;
        let grouping = group_eigenvalues(&decomposition.lambda, 1.0)?;
        PoincareEngine::from_parts(system, decomposition, grouping)
    }

    pub fn for_model(model: ModelKind, params: &PoincareParams) -> Result<PoincareEngine> {
        PoincareEngine::new(build_system(model, params)?)
    }

    pub fn from_parts(
        system: QuasiLinearSystem,
        decomposition: EigenDecomposition,
        grouping: EigenGrouping,
    ) -> Result<PoincareEngine> {
        if !grouping.secondary.is_empty() {
            return Err(Error::SecondaryGroup { indices: grouping.secondary.len() });
        }
        let v = &decomposition.v;
        let mut positives: Vec<usize> = grouping.leading.iter().filter(|l| l.1 == 1).map(|l| l.0).collect();
        if positives.len() != 2 {
            return Err(Error::UnsupportedModel("amplitude ansatz needs two n = 1 modes"));
        }
        let pick = |row: usize, from: &[usize]| {
            from.iter().copied().max_by(|&x, &y| v[(row, x)].norm().total_cmp(&v[(row, y)].norm())).unwrap()
        };
        let first = pick(0, &positives);
        let rest: Vec<usize> = positives.iter().copied().filter(|&s| s != first).collect();
        positives = vec![first, pick(2, &rest)];
        let mut negatives = Vec::new();
        for &p in &positives {
            let partner = (0..decomposition.lambda.len())
                .find(|&j| decomposition.conj_of[j] == Some(p))
                .ok_or(Error::UnsupportedModel("n = 1 mode without a conjugate column"))?;
            negatives.push((partner, grouping.multiplier(partner).unwrap_or(0)));
        }
        let mut layout: Vec<(usize, i32)> = grouping.leading.iter().filter(|l| l.1 == 0).copied().collect();
        layout.extend(
            grouping
                .leading
                .iter()
                .filter(|l| l.1 != 0 && !positives.contains(&l.0) && !negatives.iter().any(|n| n.0 == l.0))
                .copied(),
        );
        layout.extend(positives.iter().map(|&p| (p, 1)));
        layout.extend(negatives);
        let nmax = layout.iter().map(|l| l.1.unsigned_abs()).max().unwrap_or(1);
        let nodes = (2 * (system.max_degree() + nmax) as usize + 1).max(16);
        Ok(PoincareEngine { system, decomposition, grouping, layout, positives, nodes })
    }

    pub fn with_nodes(mut self, nodes: usize) -> PoincareEngine {
        self.nodes = nodes.max(1);
        self
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn system(&self) -> &QuasiLinearSystem {
        &self.system
    }

    pub fn decomposition(&self) -> &EigenDecomposition {
        &self.decomposition
    }

    pub fn grouping(&self) -> &EigenGrouping {
        &self.grouping
    }

    /// `(index, n_s)` pairs in the order used for amplitude vectors.
    pub fn layout(&self) -> &[(usize, i32)] {
        &self.layout
    }

    fn omega(&self) -> f64 {
        self.grouping.omega
    }

    fn generating_state(&self, alphas: &[Complex64], t: f64) -> Vec<Complex64> {
        let mut xi = vec![ZERO; self.system.dim];
        for (&(s, n), &a) in self.layout.iter().zip(alphas) {
            xi[s] = a * Complex64::from_polar(1.0, n as f64 * self.omega() * t);
        }
        self.decomposition.v.mul_vec(&xi)
    }

    /// Amplitudes on the leading layout that produce `θ₁ = 2r₁ sin(ωt + φ)`
    /// and `θ₂ = 2r₂ sin(ωt)` with every other leading amplitude zero.
    pub fn alphas_for(&self, r1: f64, r2: f64, phi: f64) -> Result<Vec<Complex64>> {
        let v = &self.decomposition.v;
        let mut m = CMatrix::zeros(2, 2);
        for p in 0..2 {
            for (q, &s) in self.positives.iter().enumerate() {
                m[(p, q)] = v[(2 * p, s)];
            }
        }
        let minus_i = Complex64::new(0.0, -1.0);
        let rhs = [minus_i * Complex64::from_polar(r1, phi), minus_i * r2];
        let pos = m.solve(&rhs).ok_or(Error::DegenerateSolution)?;
        let mut out = vec![ZERO; self.layout.len()];
        let base = self.layout.len() - 4;
        out[base] = pos[0];
        out[base + 1] = pos[1];
        out[base + 2] = pos[0].conj();
        out[base + 3] = pos[1].conj();
        Ok(out)
    }

    fn check_alphas(&self, alphas: &[Complex64]) -> Result<()> {
        if alphas.len() != self.layout.len() {
            return Err(Error::Shape { expected: self.layout.len(), got: alphas.len() });
        }
        Ok(())
    }

    /// `P_s = ⟨F_s e^{-i n_s ω t}⟩` for every leading index in layout order,
    /// with `F = V⁻¹ Φ(V ξ)` along the generating solution.
    pub fn average_p(&self, alphas: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_alphas(alphas)?;
        let n = self.nodes;
        let period = 2.0 * PI / self.omega();
        let mut acc = vec![ZERO; self.layout.len()];
        for j in 0..n {
            let t = period * j as f64 / n as f64;
            let x = self.generating_state(alphas, t);
            let phi = self.system.phi_complex(&x);
            for (k, &(s, ns)) in self.layout.iter().enumerate() {
                let fs: Complex64 = (0..self.system.dim).map(|c| self.decomposition.vinv[(s, c)] * phi[c]).sum();
                acc[k] += fs * Complex64::from_polar(1.0, -(ns as f64) * self.omega() * t);
            }
        }
        Ok(acc.into_iter().map(|z| z / n as f64).collect())
    }

    fn residual_rows(&self) -> Vec<usize> {
        let k = self.layout.len() - 1;
        (0..k).filter(|&s| self.layout[s].1 != 0).collect()
    }

    /// `Q_s = α_k n_k P_s − α_s n_s P_k` over the leading layout, with `k`
    /// the last entry and zero modes skipped.
    pub fn amplitude_residual(&self, alphas: &[Complex64]) -> Result<Vec<Complex64>> {
        let p = self.average_p(alphas)?;
        let k = self.layout.len() - 1;
        let nk = self.layout[k].1 as f64;
        Ok(self
            .residual_rows()
            .into_iter()
            .map(|s| alphas[k] * nk * p[s] - alphas[s] * self.layout[s].1 as f64 * p[k])
            .collect())
    }

    /// `δ₁ = P_k / (i α_k n_k ω)`; the period is `T(1 − δ₁ μ)`.
    pub fn period_correction(&self, alphas: &[Complex64]) -> Result<f64> {
        let p = self.average_p(alphas)?;
        let k = self.layout.len() - 1;
        let denom = Complex64::new(0.0, 1.0) * alphas[k] * self.layout[k].1 as f64 * self.omega();
        if denom.norm() == 0.0 {
            return Err(Error::DegenerateSolution);
        }
        Ok((p[k] / denom).re)
    }

    /// Roots `ϰ` of `det(∂Q_s/∂α_j − α_k n_k δ_sj ϰ) = 0`.
    pub fn stability_leading(&self, alphas: &[Complex64]) -> Result<StabilityRoots> {
        self.check_alphas(alphas)?;
        let rows = self.residual_rows();
        let k = self.layout.len() - 1;
        let scale = alphas[k] * self.layout[k].1 as f64;
        if scale.norm() == 0.0 {
            return Err(Error::DegenerateSolution);
        }
        let m = rows.len();
        let mut jac = CMatrix::zeros(m, m);
        for (col, &j) in rows.iter().enumerate() {
            let h = 1e-6 * alphas[j].norm().max(1.0);
            let mut plus = alphas.to_vec();
            let mut minus = alphas.to_vec();
            plus[j] += h;
            minus[j] -= h;
            let qp = self.amplitude_residual(&plus)?;
            let qm = self.amplitude_residual(&minus)?;
            for row in 0..m {
                jac[(row, col)] = (qp[row] - qm[row]) / (2.0 * h);
            }
        }
        let scaled = jac.scale(Complex64::new(1.0, 0.0) / scale);
        let coefficients = roots::char_poly(&scaled);
        let r = roots::poly_roots(&coefficients)?;
        Ok(StabilityRoots { coefficients, roots: r })
    }

    /// Roots for every non-special group: eigenvalues of
    /// `⟨(V⁻¹ ∇Φ V)_sj e^{(λ_j − λ_s) t}⟩ − δ_sj ν_s P_k / (α_k n_k ω)`.
    pub fn stability_nonspecial(&self, alphas: &[Complex64]) -> Result<Vec<StabilityRoots>> {
        self.check_alphas(alphas)?;
        if self.grouping.nonspecial.is_empty() {
            return Ok(Vec::new());
        }
        let p = self.average_p(alphas)?;
        let k = self.layout.len() - 1;
        let denom = alphas[k] * self.layout[k].1 as f64 * self.omega();
        if denom.norm() == 0.0 {
            return Err(Error::DegenerateSolution);
        }
        let shift = p[k] / denom;
        let lam = &self.decomposition.lambda;
        let dim = self.system.dim;
        let v = &self.decomposition.v;
        let vinv = &self.decomposition.vinv;
        let mut out = Vec::new();
        for group in &self.grouping.nonspecial {
            let g = group.len();
            let mut m = CMatrix::zeros(g, g);
            for (a, &s) in group.iter().enumerate() {
                for (b, &j) in group.iter().enumerate() {
                    let harmonic = libm::round((lam[s].im - lam[j].im) / self.omega()) as i32;
                    m[(a, b)] = harmonic_average(
                        |t| {
                            let x = self.generating_state(alphas, t);
                            let mut col_j = vec![ZERO; dim];
                            for (c, poly) in self.system.phi.iter().enumerate() {
                                let grad = poly.gradient_complex(&x);
                                col_j[c] = (0..dim).map(|d| grad[d] * v[(d, j)]).sum();
                            }
                            (0..dim).map(|c| vinv[(s, c)] * col_j[c]).sum()
                        },
                        harmonic,
                        self.omega(),
                        self.nodes,
                    );
                }
                m[(a, a)] -= shift * lam[s].im;
            }
            let coefficients = roots::char_poly(&m);
            let r = roots::poly_roots(&coefficients)?;
            out.push(StabilityRoots { coefficients, roots: r });
        }
        Ok(out)
    }

    fn scaled_residual(&self, r1: f64, r2: f64, phi: f64, scale: f64) -> Result<Vec<f64>> {
        let q = self.amplitude_residual(&self.alphas_for(r1, r2, phi)?)?;
        let mut out: Vec<f64> = q.iter().map(|z| z.re / scale).collect();
        out.extend(q.iter().map(|z| z.im / scale));
        Ok(out)
    }

    /// Solves the amplitude equations under the symmetric ansatz
    /// `r₁ = r₂ = r` by Gauss-Newton on `(r, φ)`.
    pub fn solve(&self, seed: Seed) -> Result<PoincareSolution> {
        if !(seed.r0 > 0.0) || !seed.phi0.is_finite() {
            return Err(invalid("seed amplitude must be positive"));
        }
        let f = |z: &[f64]| self.scaled_residual(z[0], z[0], z[1], z[0] * z[0]);
        let (z, residual, iterations) = gauss_newton(f, &[seed.r0, seed.phi0])?;
        self.finish(z[0], z[0], z[1], residual, iterations)
    }

    /// Experimental: drops the `r₁ = r₂` ansatz and solves for
    /// `(r₁, r₂, φ)`.
    pub fn solve_asymmetric(&self, r1: f64, r2: f64, phi: f64) -> Result<PoincareSolution> {
        if !(r1 > 0.0 && r2 > 0.0) {
            return Err(invalid("seed amplitudes must be positive"));
        }
        let f = |z: &[f64]| {
            if !(z[1] > 0.0) {
                return Ok(vec![f64::INFINITY]);
            }
            self.scaled_residual(z[0], z[1], z[2], z[0] * z[1])
        };
        let (z, residual, iterations) = gauss_newton(f, &[r1, r2, phi])?;
        self.finish(z[0], z[1], z[2], residual, iterations)
    }

    fn finish(&self, r1: f64, r2: f64, phi: f64, residual: f64, iterations: usize) -> Result<PoincareSolution> {
        let alphas = self.alphas_for(r1, r2, phi)?;
        let delta1 = self.period_correction(&alphas)?;
        let leading = self.stability_leading(&alphas)?;
        let nonspecial: Vec<Complex64> =
            self.stability_nonspecial(&alphas)?.into_iter().flat_map(|g| g.roots).collect();
        let stable = leading.stable() && nonspecial.iter().all(|z| z.re < -STABILITY_TOL);
        let mut roots = leading.roots.clone();
        roots.extend(nonspecial.iter().copied());
        let phi = wrap_phase(phi);
        let period = 2.0 * PI / self.omega() * (1.0 - delta1 * self.system.mu);
        Ok(PoincareSolution {
            regime: Regime::from_phase(phi),
            exists: true,
            amplitude: r1 + r2,
            period,
            delta1,
            stable,
            roots,
            r: 0.5 * (r1 + r2),
            phi,
            alphas,
            leading_roots: leading.roots,
            nonspecial_roots: nonspecial,
            residual,
            iterations,
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Gauss-Newton with central-difference Jacobian and backtracking. The first
/// unknown is an amplitude and must stay positive.
fn gauss_newton<F: Fn(&[f64]) -> Result<Vec<f64>>>(f: F, z0: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
    let n = z0.len();
    let mut z = z0.to_vec();
    let mut res = f(&z)?;
    let mut rn = norm(&res);
    for it in 0..SOLVER_MAX_ITER {
        if rn < SOLVER_TOL {
            return Ok((z, rn, it));
        }
        let m = res.len();
        let mut jac = vec![0.0; m * n];
        for j in 0..n {
            let h = 1e-6 * z[j].abs().max(1.0);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            if j == 0 && zm[0] <= 0.0 {
                zm[0] = z[0];
                zp[0] = z[0] + 2.0 * h;
            }
            let (fp, fm) = (f(&zp)?, f(&zm)?);
            let width = zp[j] - zm[j];
            for i in 0..m {
                jac[i * n + j] = (fp[i] - fm[i]) / width;
            }
        }
        let mut normal = CMatrix::zeros(n, n);
        let mut grad = vec![ZERO; n];
        for a in 0..n {
            for b in 0..n {
                normal[(a, b)] = Complex64::new((0..m).map(|i| jac[i * n + a] * jac[i * n + b]).sum(), 0.0);
            }
            grad[a] = Complex64::new(-(0..m).map(|i| jac[i * n + a] * res[i]).sum::<f64>(), 0.0);
        }
        let step = match normal.solve(&grad) {
            Some(s) => s,
            None => return Err(Error::NoSolution { iterations: it, residual: rn }),
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand: Vec<f64> = z.iter().zip(&step).map(|(zi, si)| zi + t * si.re).collect();
            if cand[0] > 0.0 && cand.iter().all(|v| v.is_finite()) {
                let r = f(&cand)?;
                let cn = norm(&r);
                if cn < rn {
                    z = cand;
                    res = r;
                    rn = cn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NoSolution { iterations: it + 1, residual: rn });
        }
        if z[0] < 1e-9 {
            return Err(if rn < SOLVER_TOL {
                Error::TrivialSolution
            } else {
                Error::NoSolution { iterations: it + 1, residual: rn }
            });
        }
    }
    if rn < SOLVER_TOL {
        return Ok((z, rn, SOLVER_MAX_ITER));
    }
    Err(Error::NoSolution { iterations: SOLVER_MAX_ITER, residual: rn })
}
