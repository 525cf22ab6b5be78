//! Characteristic polynomials and polynomial roots.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::linalg::CMatrix;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Monic characteristic polynomial `det(zI - M)` of a square matrix by the
/// Faddeev-LeVerrier recursion, highest degree first.
pub fn char_poly(m: &CMatrix) -> Vec<Complex64> {
    let n = m.rows();
    let mut coeffs = vec![ZERO; n + 1];
    coeffs[0] = ONE;
    let mut mk = CMatrix::zeros(n, n);
    let id = CMatrix::identity(n);
    for k in 1..=n {
        let mut next = m.mul(&mk);
        let c_prev = coeffs[k - 1];
        for i in 0..n {
            next[(i, i)] += c_prev * id[(i, i)];
        }
        mk = next;
        coeffs[k] = -m.mul(&mk).trace() / k as f64;
    }
    coeffs
}

/// Evaluates a polynomial (highest degree first) and its derivative.
pub fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of a polynomial given highest degree first. Leading
/// zeros are stripped. Roots come from the eigenvalues of the companion
/// matrix and are then polished by Newton's method.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let start = coeffs.iter().position(|c| *c != ZERO).unwrap_or(coeffs.len());
    let c = &coeffs[start..];
    if c.len() <= 1 {
        return Ok(Vec::new());
    }
    if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("polynomial coefficients"));
    }
    let n = c.len() - 1;
    let lead = c[0];
    let mut comp = CMatrix::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -c[j + 1] / lead;
    }
    for i in 1..n {
        comp[(i, i - 1)] = ONE;
    }
    let mut roots = hessenberg_eigenvalues(comp)?;
    for z in roots.iter_mut() {
        let mut best = *z;
        let mut best_val = horner(c, best).0.norm();
        for _ in 0..8 {
            let (p, dp) = horner(c, best);
            if dp == ZERO {
                break;
            }
            let cand = best - p / dp;
            let v = horner(c, cand).0.norm();
            if v < best_val {
                best = cand;
                best_val = v;
            } else {
                break;
            }
        }
        *z = best;
    }
    Ok(roots)
}

/// Eigenvalues of an upper Hessenberg matrix by the shifted QR algorithm
/// with Wilkinson shifts.
pub fn hessenberg_eigenvalues(mut h: CMatrix) -> Result<Vec<Complex64>> {
    let n = h.rows();
    let mut eig = Vec::with_capacity(n);
    if n == 0 {
        return Ok(eig);
    }
    let mut hi = n - 1;
    let mut iter = 0usize;
    let max_iter = 100 * n.max(1);
    loop {
        if hi == 0 {
            eig.push(h[(0, 0)]);
            break;
        }
        let mut l = hi;
        while l > 0 {
            let s = h[(l, l)].norm() + h[(l - 1, l - 1)].norm();
            if h[(l, l - 1)].norm() <= f64::EPSILON * s.max(f64::MIN_POSITIVE) {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig.push(h[(hi, hi)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > max_iter {
            return Err(Error::NoSolution { iterations: iter, residual: h[(hi, hi - 1)].norm() });
        }
        let shift = if iter % 11 == 10 {
            h[(hi, hi)] + Complex64::new(h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_step(&mut h, l, hi, shift);
    }
    Ok(eig)
}

fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn qr_step(h: &mut CMatrix, lo: usize, hi: usize, shift: Complex64) {
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let a = h[(k, k)];
        let b = h[(k + 1, k)];
        let r = libm::hypot(a.norm(), b.norm());
        let (c, s) = if r == 0.0 {
            (1.0, ZERO)
        } else if a == ZERO {
            (0.0, ONE)
        } else {
            (a.norm() / r, (a / a.norm()) * b.conj() / r)
        };
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + s * y;
            h[(k + 1, j)] = -s.conj() * x + y * c;
        }
        rots.push((c, s));
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = lo + idx;
        let last = (k + 2).min(hi);
        for i in lo..=last {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s.conj();
            h[(i, k + 1)] = -x * s + y * c;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}
