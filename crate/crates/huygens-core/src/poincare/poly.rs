//! Sparse multivariate polynomials with real coefficients.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

/// One monomial `coef * Π x[var]^pow`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub factors: Vec<(usize, u32)>,
}

/// A polynomial in `dim` variables, stored as a list of monomials.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    dim: usize,
    terms: Vec<Term>,
}

impl Poly {
    pub fn zero(dim: usize) -> Poly {
        Poly { dim, terms: Vec::new() }
    }

    /// Adds `coef * Π x[var]^pow`. Zero coefficients are dropped.
    pub fn with(mut self, coef: f64, factors: &[(usize, u32)]) -> Poly {
        self.push(coef, factors);
        self
    }

    pub fn push(&mut self, coef: f64, factors: &[(usize, u32)]) {
        assert!(factors.iter().all(|&(v, _)| v < self.dim), "variable out of range");
        if coef != 0.0 {
            self.terms.push(Term { coef, factors: factors.to_vec() });
        }
    }

    /// `self + c * other`.
    pub fn add_scaled(mut self, c: f64, other: &Poly) -> Poly {
        for t in &other.terms {
            self.push(c * t.coef, &t.factors);
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.factors.iter().map(|f| f.1).sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.factors.iter().fold(t.coef, |acc, &(v, p)| acc * ipow(x[v], p))).sum()
    }

    pub fn eval_complex(&self, x: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.factors.iter().fold(Complex64::new(t.coef, 0.0), |acc, &(v, p)| acc * x[v].powu(p)))
            .sum()
    }

    /// Exact partial derivatives at a complex point.
    pub fn gradient_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut g = vec![Complex64::new(0.0, 0.0); self.dim];
        for t in &self.terms {
            for (i, &(v, p)) in t.factors.iter().enumerate() {
                let mut d = Complex64::new(t.coef * p as f64, 0.0) * x[v].powu(p - 1);
                for (j, &(w, q)) in t.factors.iter().enumerate() {
                    if j != i {
                        d *= x[w].powu(q);
                    }
                }
                g[v] += d;
            }
        }
        g
    }
}

fn ipow(x: f64, p: u32) -> f64 {
    (0..p).fold(1.0, |acc, _| acc * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_gradient() {
        let p = Poly::zero(3).with(2.0, &[(0, 2), (2, 1)]).with(-1.0, &[(1, 1)]).with(0.0, &[(0, 1)]);
        assert_eq!(p.terms().len(), 2);
        assert_eq!(p.degree(), 3);
        let x = [1.5, -2.0, 0.5];
        assert!((p.eval(&x) - (2.0 * 2.25 * 0.5 + 2.0)).abs() < 1e-15);
        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let g = p.gradient_complex(&xc);
        assert!((g[0].re - 2.0 * 2.0 * 1.5 * 0.5).abs() < 1e-15);
        assert!((g[1].re + 1.0).abs() < 1e-15);
        assert!((g[2].re - 2.0 * 2.25).abs() < 1e-15);
        assert_eq!(p.eval_complex(&xc).re, p.eval(&x));
    }
}
