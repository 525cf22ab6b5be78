//! Small dense complex matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> CMatrix {
        CMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<CMatrix> {
        if data.len() != rows * cols {
            return Err(Error::Shape { expected: rows * cols, got: data.len() });
        }
        Ok(CMatrix { rows, cols, data: data.iter().map(|&v| Complex64::new(v, 0.0)).collect() })
    }

    pub fn from_diagonal(d: &[Complex64]) -> CMatrix {
        let mut m = CMatrix::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[Complex64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape");
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    pub fn scale(&self, c: Complex64) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * c).collect() }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "matrix difference shape");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Gauss-Jordan inverse with partial pivoting. Returns `None` for a
    /// numerically singular matrix.
    pub fn inverse(&self) -> Option<CMatrix> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = CMatrix::identity(n);
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| a[(x, c)].norm().total_cmp(&a[(y, c)].norm()))?;
            if a[(p, c)].norm() <= 1e-14 * scale {
                return None;
            }
            a.swap_rows(c, p);
            inv.swap_rows(c, p);
            let d = ONE / a[(c, c)];
            for j in 0..n {
                a[(c, j)] *= d;
                inv[(c, j)] *= d;
            }
            for i in 0..n {
                if i == c {
                    continue;
                }
                let f = a[(i, c)];
                if f == ZERO {
                    continue;
                }
                for j in 0..n {
                    let (ac, ic) = (a[(c, j)], inv[(c, j)]);
                    a[(i, j)] -= f * ac;
                    inv[(i, j)] -= f * ic;
                }
            }
        }
        Some(inv)
    }

    /// Solves `self * x = b` for a square matrix.
    pub fn solve(&self, b: &[Complex64]) -> Option<Vec<Complex64>> {
        Some(self.inverse()?.mul_vec(b))
    }

    /// Basis of the null space from the reduced row echelon form. Entries with
    /// modulus at most `tol` (relative to the largest entry) count as zero.
    /// Each basis vector has a 1 in its free coordinate.
    pub fn null_space(&self, tol: f64) -> Vec<Vec<Complex64>> {
        let mut m = self.clone();
        let thresh = tol * self.data.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r >= self.rows {
                break;
            }
            let p = (r..self.rows).max_by(|&x, &y| m[(x, c)].norm().total_cmp(&m[(y, c)].norm())).unwrap();
            if m[(p, c)].norm() <= thresh {
                continue;
            }
            m.swap_rows(r, p);
            let d = ONE / m[(r, c)];
            for j in 0..self.cols {
                m[(r, j)] *= d;
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let f = m[(i, c)];
                if f == ZERO {
                    continue;
                }
                for j in 0..self.cols {
                    let v = m[(r, j)];
                    m[(i, j)] -= f * v;
                }
            }
            pivots.push(c);
            r += 1;
        }
        (0..self.cols)
            .filter(|c| !pivots.contains(c))
            .map(|free| {
                let mut v = vec![ZERO; self.cols];
                v[free] = ONE;
                for (row, &pc) in pivots.iter().enumerate() {
                    v[pc] = -m[(row, free)];
                }
                v
            })
            .collect()
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = ONE;
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| a[(x, c)].norm().total_cmp(&a[(y, c)].norm())).unwrap();
            if a[(p, c)] == ZERO {
                return ZERO;
            }
            if p != c {
                a.swap_rows(c, p);
                det = -det;
            }
            let piv = a[(c, c)];
            det *= piv;
            for i in c + 1..n {
                let f = a[(i, c)] / piv;
                for j in c..n {
                    let v = a[(c, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        det
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Scales `v` to unit Euclidean norm and rotates it so that its first entry
/// above `tol` is positive real.
pub fn normalize(v: &mut [Complex64], tol: f64) {
    let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
    if norm == 0.0 {
        return;
    }
    let lead = v.iter().find(|z| z.norm() > tol * norm).copied().unwrap_or(ONE);
    let phase = lead.conj() / lead.norm();
    for z in v.iter_mut() {
        *z = *z * phase / norm;
    }
}
