#![allow(clippy::needless_range_loop)]

use huygens_core::dynamics::{rhs, ModelKind, ModelParams};
use huygens_core::params::{sigma_tilde, two_mass_rigid_limit, PoincareParams};
use huygens_core::poincare::linalg::CMatrix;
use huygens_core::poincare::poly::Poly;
use huygens_core::poincare::{
    build_system, closed_form_regimes, decompose, diagonalize, group_eigenvalues, PoincareEngine, QuasiLinearSystem,
    Regime, Seed,
};
use huygens_core::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn three_dof(sigma: f64, a: f64, omega: f64, gamma: f64) -> PoincareParams {
    PoincareParams { mu: 0.001, a, sigma, omega, gamma, kappa: None }
}

fn small_sigma(b: f64, a: f64, omega: f64, gamma: f64, mu: f64) -> PoincareParams {
    PoincareParams { mu, a, sigma: b * mu, omega, gamma, kappa: None }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn match_roots(found: &[Complex64], want: &[Complex64], tol: f64) -> bool {
    if found.len() != want.len() {
        return false;
    }
    let mut used = vec![false; found.len()];
    want.iter().all(|w| {
        let best = (0..found.len())
            .filter(|&i| !used[i])
            .min_by(|&i, &j| (found[i] - w).norm().total_cmp(&(found[j] - w).norm()));
        match best {
            Some(i) if (found[i] - w).norm() <= tol * (1.0 + w.norm()) => {
                used[i] = true;
                true
            }
            _ => false,
        }
    })
}

fn quadratic_roots(c1: f64, c0: f64) -> [Complex64; 2] {
    let d = c(c1 * c1 - 4.0 * c0, 0.0).sqrt();
    [(-c1 + d) / 2.0, (-c1 - d) / 2.0]
}

#[test]
fn three_dof_matrix_rows() {
    let p = three_dof(0.3, 2.0, 0.4, 0.2);
    let s = build_system(ModelKind::ThreeDof, &p).unwrap();
    let row: Vec<f64> = (0..6).map(|j| s.a_entry(1, j)).collect();
    assert_eq!(row, vec![-1.0, 0.0, 0.0, 0.0, 0.16000000000000003, 0.3]);
    assert!(build_system(ModelKind::Linear, &p).is_err());
}

#[test]
fn zero_mu_gives_generating_system_and_phi_vanishes_at_origin() {
    for (kind, kappa) in [(ModelKind::ThreeDof, None), (ModelKind::SmallSigma, None), (ModelKind::TwoMass, Some(0.7))] {
        let mu = if kind == ModelKind::SmallSigma { 1e-3 } else { 0.0 };
        let p = PoincareParams { mu, a: 3.0, sigma: 0.2 * mu.max(1.0), omega: 0.3, gamma: 0.2, kappa };
        let s = build_system(kind, &p).unwrap();
        assert!(s.phi_real(&vec![0.0; s.dim]).iter().all(|v| *v == 0.0));
        let x: Vec<f64> = (0..s.dim).map(|i| 0.1 * (i as f64 + 1.0).sin()).collect();
        let mut s0 = s.clone();
        s0.mu = 0.0;
        let lin: Vec<f64> = (0..s.dim).map(|i| (0..s.dim).map(|j| s.a_entry(i, j) * x[j]).sum()).collect();
        assert_eq!(s0.rhs(&x), lin);
        let direct = rhs(kind, &x, ModelParams::Poincare(p)).unwrap();
        for (u, v) in s.rhs(&x).iter().zip(&direct) {
            assert!((u - v).abs() < 1e-14, "{kind:?}: {u} vs {v}");
        }
    }
}

#[test]
fn change_of_variables_for_small_damping_model() {
    let w = 0.1 * 2f64.sqrt();
    let p = small_sigma(1.0, 5.0, w, 0.5, 0.01);
    let s = build_system(ModelKind::SmallSigma, &p).unwrap();
    let d = decompose(&s).unwrap();
    let k = w * w / (w * w - 1.0);
    let funcs = [
        [c(0.0, 0.5), c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.5 * k), c(0.5 * k, 0.0)],
        [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.5), c(0.5, 0.0), c(0.0, 0.5 * k), c(0.5 * k, 0.0)],
    ];
    for srow in 0..6 {
        if (d.lambda[srow] - c(0.0, 1.0)).norm() > 1e-12 {
            continue;
        }
        let row: Vec<Complex64> = (0..6).map(|j| d.vinv[(srow, j)]).collect();
        let (c1, c2) = (row[1] / funcs[0][1], row[3] / funcs[1][3]);
        for j in 0..6 {
            assert!((row[j] - c1 * funcs[0][j] - c2 * funcs[1][j]).norm() < 1e-12);
        }
    }
}

#[test]
fn diagonal_matrix_gives_identity() {
    let lam = [c(-1.0, 0.0), c(0.0, 2.0), c(0.0, -2.0), c(3.0, 0.0)];
    let a = CMatrix::from_diagonal(&lam);
    let d = diagonalize(&a, &lam).unwrap();
    assert!(d.v.sub(&CMatrix::identity(4)).norm_inf() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn similarity_transforms_are_recovered(entries in proptest::collection::vec(-1.0..1.0f64, 25),
                                           spec in proptest::collection::vec(-2.0..2.0f64, 3)) {
        let lam = [c(spec[0], 0.0), c(-0.3, spec[1]), c(-0.3, -spec[1]), c(spec[2], 0.0), c(0.0, 0.0)];
        prop_assume!(spec[1].abs() > 0.05 && (spec[0] - spec[2]).abs() > 0.05 && spec[0].abs() > 0.05 && spec[2].abs() > 0.05);
        let mut s = CMatrix::from_real(5, 5, &entries).unwrap();
        for i in 0..5 { s[(i, i)] += c(2.0, 0.0); }
        let sinv = s.inverse().unwrap();
        let a = s.mul(&CMatrix::from_diagonal(&lam)).mul(&sinv);
        let d = diagonalize(&a, &lam).unwrap();
        prop_assert!(d.reconstruction_error(&a) < 1e-10);
        for j in 0..5 {
            let col = d.v.column(j);
            let av = a.mul_vec(&col);
            for i in 0..5 {
                prop_assert!((av[i] - lam[j] * col[i]).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn coalescing_frame_modes_are_rejected() {
    let p = three_dof(0.4, 2.0, 0.2, 0.3);
    let s = build_system(ModelKind::ThreeDof, &p).unwrap();
    assert!(matches!(decompose(&s), Err(Error::Degeneracy { first: 4, second: 5 })));
    let p = PoincareParams { mu: 0.01, a: 2.0, sigma: 0.4, omega: 0.0, gamma: 0.3, kappa: Some(0.02) };
    let s = build_system(ModelKind::TwoMass, &p).unwrap();
    assert!(matches!(decompose(&s), Err(Error::Degeneracy { .. })));
    let p = small_sigma(1.0, 2.0, 0.0, 0.3, 0.01);
    let s = build_system(ModelKind::SmallSigma, &p).unwrap();
    assert!(matches!(decompose(&s), Err(Error::Degeneracy { .. })));
}

#[test]
fn grouping_examples() {
    let s = build_system(ModelKind::ThreeDof, &three_dof(0.3, 2.0, 0.4, 0.2)).unwrap();
    let d = decompose(&s).unwrap();
    let g = group_eigenvalues(&d.lambda, 1.0).unwrap();
    let ns: Vec<i32> = g.leading.iter().map(|l| l.1).collect();
    assert_eq!(ns, vec![1, 1, -1, -1]);
    assert_eq!(g.noncritical.len(), 2);
    assert!(g.secondary.is_empty() && g.nonspecial.is_empty());

    let s = build_system(ModelKind::SmallSigma, &small_sigma(1.0, 2.0, 0.1 * 2f64.sqrt(), 0.3, 0.01)).unwrap();
    let d = decompose(&s).unwrap();
    let g = group_eigenvalues(&d.lambda, 1.0).unwrap();
    assert_eq!(g.leading.len(), 4);
    assert_eq!(g.nonspecial, vec![vec![4], vec![5]]);

    let p = PoincareParams { mu: 0.01, a: 2.0, sigma: 0.3, omega: 0.0, gamma: 0.3, kappa: Some(0.7) };
    let s = build_system(ModelKind::TwoMass, &p).unwrap();
    let d = decompose(&s).unwrap();
    let g = group_eigenvalues(&d.lambda, 1.0).unwrap();
    assert_eq!(g.leading[0], (7, 0));
    assert_eq!(g.leading.len(), 5);
    assert_eq!(g.noncritical.len(), 3);
}

#[test]
fn near_resonance_and_secondary_group_are_errors() {
    let lam = [c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.5 + 1e-7), c(0.0, -0.5 - 1e-7)];
    assert!(matches!(group_eigenvalues(&lam, 1.0), Err(Error::Resonance { index: 2, .. })));
    let lam = [c(0.0, 1.0), c(0.0, -1.0), c(0.0, 2.0 - 5e-8), c(0.0, -2.0 + 5e-8)];
    assert!(matches!(group_eigenvalues(&lam, 1.0), Err(Error::Resonance { .. })));
    let s = build_system(ModelKind::SmallSigma, &small_sigma(1.0, 2.0, 0.5, 0.3, 0.01)).unwrap();
    assert!(matches!(PoincareEngine::new(s), Err(Error::SecondaryGroup { indices: 2 })));
}

fn van_der_pol_pair(a: f64, gamma: f64) -> PoincareEngine {
    let d = 4;
    #[rustfmt::skip]
    let amat = vec![
        0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, -1.0, 0.0,
    ];
    let vdp = |th: usize, om: usize| Poly::zero(d).with(a * gamma * gamma, &[(om, 1)]).with(-a, &[(th, 2), (om, 1)]);
    let system = QuasiLinearSystem {
        dim: d,
        a: amat,
        phi: vec![Poly::zero(d), vdp(0, 1), Poly::zero(d), vdp(2, 3)],
        mu: 0.01,
        model: ModelKind::ThreeDof,
        params: three_dof(0.0, a, 0.0, gamma),
    };
    let lam = [c(0.0, 1.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, -1.0)];
    let dec = diagonalize(&system.a_matrix(), &lam).unwrap();
    let grouping = group_eigenvalues(&dec.lambda, 1.0).unwrap();
    PoincareEngine::from_parts(system, dec, grouping).unwrap()
}

#[test]
fn van_der_pol_average_matches_symbolic_form() {
    let (a, gamma) = (1.7, 0.4);
    let e = van_der_pol_pair(a, gamma);
    let alphas = e.alphas_for(0.3, 0.2, 0.7).unwrap();
    let p = e.average_p(&alphas).unwrap();
    let v = &e.decomposition().v;
    let vinv = &e.decomposition().vinv;
    for (pos, &(s, n)) in e.layout().iter().enumerate() {
        let row = if v[(0, s)].norm() > 1e-12 { 0 } else { 2 };
        let beta = v[(row, s)] * alphas[pos];
        let coef = if n == 1 {
            c(0.0, 1.0) * a * beta * (gamma * gamma - beta.norm_sqr())
        } else {
            c(0.0, -1.0) * a * beta * (gamma * gamma - beta.norm_sqr())
        };
        let want = vinv[(s, row + 1)] * coef;
        assert!((p[pos] - want).norm() < 1e-15, "{pos}: {} vs {}", p[pos], want);
    }
    let zero = vec![c(0.0, 0.0); e.layout().len()];
    assert!(e.average_p(&zero).unwrap().iter().all(|z| z.norm() == 0.0));
}

#[test]
fn quadrature_is_exact() {
    let e = PoincareEngine::for_model(ModelKind::ThreeDof, &three_dof(0.2, 3.0, 0.3, 0.4)).unwrap();
    let alphas = e.alphas_for(0.35, 0.3, 1.1).unwrap();
    let n = e.nodes();
    let base = e.average_p(&alphas).unwrap();
    for other in [2 * n, n + 7] {
        let e2 = e.clone().with_nodes(other);
        let p2 = e2.average_p(&alphas).unwrap();
        for (u, v) in base.iter().zip(&p2) {
            assert!((u - v).norm() < 1e-13);
        }
    }
}

#[test]
fn residual_examples() {
    let e = PoincareEngine::for_model(ModelKind::SmallSigma, &small_sigma(1.0, 5.0, 0.3, 0.5, 0.01)).unwrap();
    let q = e.amplitude_residual(&e.alphas_for(0.5, 0.5, PI).unwrap()).unwrap();
    assert!(q.iter().all(|z| z.norm() < 1e-14), "{q:?}");
    let zero = vec![c(0.0, 0.0); e.layout().len()];
    assert!(e.amplitude_residual(&zero).unwrap().iter().all(|z| z.norm() == 0.0));

    let (sigma, a, omega, gamma) = (0.1, 5.0, 0.3, 0.5);
    let p = three_dof(sigma, a, omega, gamma);
    let st = sigma_tilde(&p).unwrap();
    let r = ((gamma * gamma - 2.0 * st) / (1.0 + 2.0 * st)).sqrt();
    let e = PoincareEngine::for_model(ModelKind::ThreeDof, &p).unwrap();
    let q = e.amplitude_residual(&e.alphas_for(r, r, 0.0).unwrap()).unwrap();
    let norm: f64 = q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(norm < 1e-10, "{norm:e}");
    let alphas = e.alphas_for(r, r, 0.4).unwrap();
    let k = alphas.len();
    for i in 0..2 {
        assert_eq!(alphas[k - 2 + i], alphas[k - 4 + i].conj());
    }
}

#[test]
fn small_damping_solutions() {
    let gamma = 0.3;
    let e = PoincareEngine::for_model(ModelKind::SmallSigma, &small_sigma(1.0, 4.0, 0.3, gamma, 0.01)).unwrap();
    for (seed, regime) in [
        ((gamma, 0.0), Regime::InPhase),
        ((gamma, PI), Regime::AntiPhase),
        ((0.8 * gamma, 0.2), Regime::InPhase),
        ((1.1 * gamma, 2.9), Regime::AntiPhase),
    ] {
        let s = e.solve(Seed { r0: seed.0, phi0: seed.1 }).unwrap();
        assert_eq!(s.regime, regime);
        assert!((s.r - gamma).abs() < 1e-10, "r = {}", s.r);
        assert!((s.amplitude - 2.0 * gamma).abs() < 2e-10);
        assert!(s.stable);
    }
}

#[test]
fn missing_in_phase_regime_is_no_solution() {
    let p = three_dof(1.0, 1.0, 0.0, 0.5);
    assert!(sigma_tilde(&p).unwrap() >= 0.125);
    let e = PoincareEngine::for_model(ModelKind::ThreeDof, &p).unwrap();
    let err = e.solve(Seed { r0: 0.5, phi0: 0.0 }).unwrap_err();
    assert!(matches!(err, Error::NoSolution { .. }), "{err:?}");
    assert!(e.solve(Seed { r0: -0.1, phi0: 0.0 }).is_err());
}

#[test]
fn finite_damping_in_phase_amplitude() {
    let p = three_dof(0.1, 5.0, 0.0, 0.5);
    assert!((sigma_tilde(&p).unwrap() - 0.019802).abs() < 1e-6);
    let e = PoincareEngine::for_model(ModelKind::ThreeDof, &p).unwrap();
    let s = e.solve(Seed { r0: 0.5, phi0: 0.0 }).unwrap();
    assert_eq!(s.regime, Regime::InPhase);
    assert!((s.r - 0.44987).abs() < 1e-5, "r = {}", s.r);
    assert!((s.amplitude - 0.89974).abs() < 1e-5);
}

#[test]
fn small_damping_period_corrections() {
    let (gamma, omega, mu) = (0.1, 0.3, 0.01);
    let e = PoincareEngine::for_model(ModelKind::SmallSigma, &small_sigma(1.0, 3.0, omega, gamma, mu)).unwrap();
    let anti = e.solve(Seed { r0: gamma, phi0: PI }).unwrap();
    assert!(anti.delta1.abs() < 1e-12);
    assert!((anti.period - 2.0 * PI).abs() < 1e-12);
    let inph = e.solve(Seed { r0: gamma, phi0: 0.0 }).unwrap();
    let want = (1.0 + gamma * gamma) / (1.0 - omega * omega);
    assert!(rel(inph.delta1, want) < 1e-10, "{} vs {want}", inph.delta1);
    assert!((inph.period - 2.0 * PI * (1.0 - want * mu)).abs() < 1e-12);
    let defective = build_system(ModelKind::SmallSigma, &small_sigma(1.0, 3.0, 0.0, gamma, mu)).unwrap();
    assert!(matches!(PoincareEngine::new(defective), Err(Error::Degeneracy { .. })));
}

#[test]
fn finite_damping_engine_matches_closed_forms() {
    let mut rng = 0x2545F4914F6CDD1Du64;
    let mut next = || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut checked = 0;
    while checked < 20 {
        let (sigma, a, omega, gamma) = (0.01 + 0.5 * next(), 0.5 + 5.0 * next(), 0.6 * next(), 0.1 + 0.5 * next());
        let p = three_dof(sigma, a, omega, gamma);
        if (sigma * sigma - 4.0 * omega * omega).abs() < 1e-3 {
            continue;
        }
        let st = sigma_tilde(&p).unwrap();
        if st >= 0.45 * gamma * gamma {
            continue;
        }
        let e = PoincareEngine::for_model(ModelKind::ThreeDof, &p).unwrap();
        let sol = e.solve(Seed { r0: gamma, phi0: 0.0 }).unwrap();
        let closed = closed_form_regimes(&p, ModelKind::ThreeDof).unwrap();
        let inph = &closed[0];
        assert!(rel(sol.amplitude, inph.amplitude.unwrap()) < 1e-8);
        assert!(rel(sol.delta1, inph.delta1.unwrap()) < 1e-8, "{} vs {:?}", sol.delta1, inph.delta1);
        assert!(match_roots(&sol.leading_roots, &inph.roots, 1e-6), "{:?} vs {:?}", sol.leading_roots, inph.roots);
        assert_eq!(sol.stable, inph.stable.unwrap());
        let anti = e.solve(Seed { r0: gamma, phi0: PI }).unwrap();
        assert!(rel(anti.amplitude, 2.0 * gamma) < 1e-8);
        assert!(anti.delta1.abs() < 1e-9);
        assert!(
            match_roots(&anti.leading_roots, &closed[1].roots, 1e-6),
            "{:?} vs {:?}",
            anti.leading_roots,
            closed[1].roots
        );
        checked += 1;
    }
}

#[test]
fn small_damping_anti_phase_roots_match_polynomial() {
    for (a, omega, gamma) in [(1.0, 0.3, 0.2), (4.0, 0.1, 0.5), (2.5, 0.45, 0.35), (0.7, 0.2, 0.6)] {
        let e = PoincareEngine::for_model(ModelKind::SmallSigma, &small_sigma(1.0, a, omega, gamma, 0.01)).unwrap();
        let s = e.solve(Seed { r0: gamma, phi0: PI }).unwrap();
        let q2 = (1.0 - omega * omega).powi(2);
        let g2 = gamma * gamma;
        let [r1, r2] = quadratic_roots(a * g2, (3.0 * g2 * g2 + 4.0 * g2 + 1.0) / q2);
        assert!(match_roots(&s.leading_roots, &[c(-a * g2, 0.0), r1, r2], 1e-8), "{:?}", s.leading_roots);
    }
}

#[test]
fn in_phase_stability_flips_at_threshold() {
    let (a, gamma) = (5.0, 0.5);
    let threshold = gamma * gamma / (2.0 * (2.0 + gamma * gamma));
    let sigma_for = |st: f64| (1.0 - (1.0 - 4.0 * a * a * st * st).sqrt()) / (2.0 * a * st);
    let max_re = |st: f64| {
        let p = three_dof(sigma_for(st), a, 0.0, gamma);
        let e = PoincareEngine::for_model(ModelKind::ThreeDof, &p).unwrap();
        let s = e.solve(Seed { r0: gamma, phi0: 0.0 }).unwrap();
        s.leading_roots.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    };
    let (mut lo, mut hi) = (threshold - 0.01, threshold + 0.01);
    assert!(max_re(lo) < 0.0 && max_re(hi) > 0.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if max_re(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - threshold).abs() < 1e-6, "crossing at {lo}, threshold {threshold}");
}

#[test]
fn vanishing_escapement_is_marginal() {
    let gamma = 1e-6;
    let e = PoincareEngine::for_model(ModelKind::SmallSigma, &small_sigma(1.0, 2.0, 0.3, gamma, 0.01)).unwrap();
    let s = e.solve(Seed { r0: gamma, phi0: PI }).unwrap();
    assert!(s.leading_roots.iter().any(|z| z.norm() < 1e-9));
    assert!(!s.stable);
}

fn flip_frame_damping(system: &mut QuasiLinearSystem, b: f64) {
    for (i, sign) in [(1, -1.0), (3, -1.0), (5, 1.0)] {
        system.phi[i] = system.phi[i].clone().with(sign * 2.0 * b, &[(5, 1)]);
    }
}

#[test]
fn nonspecial_roots_follow_frame_damping() {
    let gamma = 0.3;
    let root_for = |b: f64, flip: bool| {
        let mut s = build_system(ModelKind::SmallSigma, &small_sigma(b, 2.0, 0.3, gamma, 0.01)).unwrap();
        if flip {
            flip_frame_damping(&mut s, b);
        }
        let e = PoincareEngine::new(s).unwrap();
        let mut out = Vec::new();
        for phi0 in [0.0, PI] {
            let sol = e.solve(Seed { r0: gamma, phi0 }).unwrap();
            assert_eq!(sol.nonspecial_roots.len(), 2);
            out.push(sol.nonspecial_roots);
        }
        out
    };
    for roots in root_for(1.0, false) {
        assert!(roots.iter().all(|z| z.re < 0.0), "{roots:?}");
    }
    for roots in root_for(0.0, false) {
        assert!(roots.iter().all(|z| z.re.abs() < 1e-12), "{roots:?}");
    }
    for roots in root_for(1.0, true) {
        assert!(roots.iter().all(|z| z.re > 0.0), "{roots:?}");
    }
    let unstable = {
        let mut s = build_system(ModelKind::SmallSigma, &small_sigma(1.0, 2.0, 0.3, gamma, 0.01)).unwrap();
        flip_frame_damping(&mut s, 1.0);
        PoincareEngine::new(s).unwrap().solve(Seed { r0: gamma, phi0: 0.0 }).unwrap()
    };
    assert!(!unstable.stable);
}

#[test]
fn closed_form_examples() {
    for sigma in [0.01, 0.2, 1.5] {
        for a in [0.5, 3.0] {
            let r = closed_form_regimes(&three_dof(sigma, a, 0.2, 0.122), ModelKind::ThreeDof).unwrap();
            assert_eq!(r[1].regime, Regime::AntiPhase);
            assert!((r[1].amplitude.unwrap() - 0.244).abs() < 1e-15);
        }
    }
    assert!(closed_form_regimes(&three_dof(0.1, 1.0, 0.0, 0.0), ModelKind::ThreeDof).is_err());

    let tm = PoincareParams { mu: 0.02, a: 3.0, sigma: 0.2, omega: 0.0, gamma: 0.4, kappa: Some(1e4) };
    let two = closed_form_regimes(&tm, ModelKind::TwoMass).unwrap();
    let one = closed_form_regimes(&two_mass_rigid_limit(&tm), ModelKind::ThreeDof).unwrap();
    assert!(rel(two[0].amplitude.unwrap(), one[0].amplitude.unwrap()) < 1e-3);
    assert!(rel(two[0].period.unwrap(), one[0].period.unwrap()) < 1e-3);
    assert!(rel(two[1].amplitude.unwrap(), one[1].amplitude.unwrap()) < 1e-3);
    assert!(rel(two[1].period.unwrap(), one[1].period.unwrap()) < 1e-3);
    assert_eq!(two[0].stable, None);

    let sig = 0.2;
    let (s_in, s_an) = (sig / (3.0 * (1.0 + sig * sig)), sig / (3.0 * ((2.0 * 1e4 - 1.0f64).powi(2) + sig * sig)));
    assert!(s_an < s_in);
}

#[test]
fn two_mass_engine_matches_corrected_closed_form() {
    for (sigma, kappa, a, gamma) in
        [(0.1, 2.0, 5.0, 0.5), (0.3, 1.7, 4.0, 0.4), (0.05, 50.0, 3.0, 0.3), (0.4, 0.3, 2.0, 0.9)]
    {
        let p = PoincareParams { mu: 0.01, a, sigma, omega: 0.0, gamma, kappa: Some(kappa) };
        let e = PoincareEngine::for_model(ModelKind::TwoMass, &p).unwrap();
        let closed = closed_form_regimes(&p, ModelKind::TwoMass).unwrap();
        for (idx, phi0) in [(0, 0.0), (1, PI)] {
            let s = e.solve(Seed { r0: gamma, phi0 }).unwrap();
            assert!(
                rel(s.amplitude, closed[idx].amplitude.unwrap()) < 1e-8,
                "{} vs {:?}",
                s.amplitude,
                closed[idx].amplitude
            );
            assert!(rel(s.delta1, closed[idx].delta1.unwrap()) < 1e-8, "{} vs {:?}", s.delta1, closed[idx].delta1);
        }
    }
    let absent = PoincareParams { mu: 0.01, a: 4.0, sigma: 0.3, omega: 0.0, gamma: 0.4, kappa: Some(0.7) };
    assert!(!closed_form_regimes(&absent, ModelKind::TwoMass).unwrap()[1].exists);
    let e = PoincareEngine::for_model(ModelKind::TwoMass, &absent).unwrap();
    assert!(matches!(e.solve(Seed { r0: 0.4, phi0: PI }), Err(Error::NoSolution { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn root_sets_are_conjugate_closed(sigma in 0.02..0.5f64, a in 0.5..5.0f64, omega in 0.0..0.6f64, gamma in 0.1..0.6f64) {
        prop_assume!((sigma * sigma - 4.0 * omega * omega).abs() > 1e-3);
        let p = three_dof(sigma, a, omega, gamma);
        let e = PoincareEngine::for_model(ModelKind::ThreeDof, &p).unwrap();
        let d = e.decomposition();
        prop_assert!(d.reconstruction_error(&e.system().a_matrix()) < 1e-10);
        let s = e.solve(Seed { r0: gamma, phi0: PI }).unwrap();
        for z in &s.roots {
            prop_assert!(s.roots.iter().any(|w| (w - z.conj()).norm() < 1e-10 * (1.0 + z.norm())));
        }
        prop_assert!(s.stable);
    }

    #[test]
    fn two_mass_existence_is_monotone(sigma in 0.01..2.0f64, a in 0.2..5.0f64, gamma in 0.05..0.8f64, kappa in 0.0..10.0f64) {
        let p = PoincareParams { mu: 0.01, a, sigma, omega: 0.0, gamma, kappa: Some(kappa) };
        let r = closed_form_regimes(&p, ModelKind::TwoMass).unwrap();
        let mut q = p;
        q.sigma = sigma * 1.1;
        let r2 = closed_form_regimes(&q, ModelKind::TwoMass).unwrap();
        let m = 2.0 * kappa - 1.0;
        let sx = |s: f64| [s / (a * (1.0 + s * s)), s / (a * (m * m + s * s))];
        let (before, after) = (sx(sigma), sx(q.sigma));
        for i in 0..2 {
            if let (Some(x), Some(y)) = (r[i].amplitude, r2[i].amplitude) {
                prop_assert_eq!(after[i] > before[i], y < x);
            }
            prop_assert_eq!(r[i].exists, gamma * gamma > before[i]);
        }
        if kappa > 1.0 + sigma && r[0].exists {
            prop_assert!(r[1].exists);
        }
    }
}
