//! Dense complex matrices at desk scale.
//!
//! Everything here operates on matrices of side at most a handful (fibre rank
//! and base dimension are tiny), so plain Gauss-Jordan and cyclic Jacobi are
//! both adequate and easy to audit.

use crate::{Error, Result};
use num_complex::Complex64;

/// A small dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> CMat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= c;
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest |A[i][j] - conj(A[j][i])| over all entries.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Inverse by Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<CMat> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = CMat::identity(n);
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = a[(col, col)].norm();
            for row in col + 1..n {
                let mag = a[(row, col)].norm();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = row;
                }
            }
            if pivot_mag < 1e-300 {
                return Err(Error::SingularMatrix { pivot: pivot_mag });
            }
            if pivot_row != col {
                for j in 0..n {
                    a.data.swap(col * n + j, pivot_row * n + j);
                    inv.data.swap(col * n + j, pivot_row * n + j);
                }
            }
            let p = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let f = a[(row, col)];
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let ac = a[(col, j)];
                    let ic = inv[(col, j)];
                    a[(row, j)] -= f * ac;
                    inv[(row, j)] -= f * ic;
                }
            }
        }
        Ok(inv)
    }

    pub fn det(&self) -> Complex64 {
        let n = self.n;
        let mut a = self.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = a[(col, col)].norm();
            for row in col + 1..n {
                let mag = a[(row, col)].norm();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = row;
                }
            }
            if pivot_mag == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if pivot_row != col {
                for j in 0..n {
                    a.data.swap(col * n + j, pivot_row * n + j);
                }
                det = -det;
            }
            let p = a[(col, col)];
            det *= p;
            for row in col + 1..n {
                let f = a[(row, col)] / p;
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in col..n {
                    let ac = a[(col, j)];
                    a[(row, j)] -= f * ac;
                }
            }
        }
        det
    }

    /// Eigenvalues of a Hermitian matrix, ascending, by cyclic Jacobi.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        self.hermitian_eigen().0
    }

    /// Eigenvalues (ascending) and the unitary of column eigenvectors.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, CMat) {
        let n = self.n;
        let mut a = self.clone();
        let mut v = CMat::identity(n);
        let scale = self.max_abs().max(1e-300);
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in p + 1..n {
                    off = off.max(a[(p, q)].norm());
                }
            }
            if off < 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag < 1e-300 {
                        continue;
                    }
                    let phase = apq / mag;
                    let alpha = a[(p, p)].re;
                    let gamma = a[(q, q)].re;
                    let tau = (gamma - alpha) / (2.0 * mag);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // J[p][p]=c, J[p][q]=s, J[q][p]=-s*conj(phase),
                    // J[q][q]=c*conj(phase); then (J^H A J)[p][q] = 0.
                    let jqp = -s * phase.conj();
                    let jqq = c * phase.conj();
                    // columns: A <- A J
                    for row in 0..n {
                        let ap = a[(row, p)];
                        let aq = a[(row, q)];
                        a[(row, p)] = ap * c + aq * jqp;
                        a[(row, q)] = ap * s + aq * jqq;
                    }
                    // rows: A <- J^H A
                    for col in 0..n {
                        let ap = a[(p, col)];
                        let aq = a[(q, col)];
                        a[(p, col)] = ap * c + aq * jqp.conj();
                        a[(q, col)] = ap * s + aq * jqq.conj();
                    }
                    // eigenvector accumulation: V <- V J
                    for row in 0..n {
                        let vp = v[(row, p)];
                        let vq = v[(row, q)];
                        v[(row, p)] = vp * c + vq * jqp;
                        v[(row, q)] = vp * s + vq * jqq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
        let eigs: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
        let vecs = CMat::from_fn(n, |row, col| v[(row, order[col])]);
        (eigs, vecs)
    }

    /// Smallest eigenvalue and its eigenvector, for definiteness reports.
    pub fn hermitian_min_eig(&self) -> (f64, Vec<Complex64>) {
        let (eigs, vecs) = self.hermitian_eigen();
        let witness = (0..self.n).map(|row| vecs[(row, 0)]).collect();
        (eigs[0], witness)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inverse_roundtrip() {
        let m = CMat::from_fn(3, |i, j| {
            c(
                if i == j { 4.0 } else { 0.7 * (i as f64 - j as f64) },
                0.3 * (i + 2 * j) as f64,
            )
        });
        let inv = m.inverse().unwrap();
        let prod = m.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (prod[(i, j)] - c(want, 0.0)).norm() < 1e-13,
                    "entry ({i},{j}) = {}",
                    prod[(i, j)]
                );
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = CMat::zeros(2);
        assert!(matches!(m.inverse(), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn hermitian_eigenvalues_of_known_matrix() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let mut m = CMat::zeros(2);
        m[(0, 0)] = c(2.0, 0.0);
        m[(0, 1)] = c(0.0, 1.0);
        m[(1, 0)] = c(0.0, -1.0);
        m[(1, 1)] = c(2.0, 0.0);
        let eigs = m.hermitian_eigenvalues();
        assert!((eigs[0] - 1.0).abs() < 1e-12);
        assert!((eigs[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvector_witness_matches_eigenvalue() {
        let mut m = CMat::zeros(3);
        for i in 0..3 {
            m[(i, i)] = c(1.0 + i as f64, 0.0);
        }
        m[(0, 1)] = c(0.2, 0.4);
        m[(1, 0)] = c(0.2, -0.4);
        m[(2, 0)] = c(0.0, -0.3);
        m[(0, 2)] = c(0.0, 0.3);
        let (min_eig, vec) = m.hermitian_min_eig();
        // residual |A x - lambda x|
        let mut worst = 0.0f64;
        for i in 0..3 {
            let mut ax = c(0.0, 0.0);
            for j in 0..3 {
                ax += m[(i, j)] * vec[j];
            }
            worst = worst.max((ax - vec[i] * min_eig).norm());
        }
        assert!(worst < 1e-10, "residual {worst}");
    }

    #[test]
    fn det_of_triangularizable_matrix() {
        let mut m = CMat::zeros(2);
        m[(0, 0)] = c(2.0, 1.0);
        m[(0, 1)] = c(1.0, 0.0);
        m[(1, 0)] = c(0.0, 0.0);
        m[(1, 1)] = c(3.0, -1.0);
        let d = m.det();
        assert!((d - c(2.0, 1.0) * c(3.0, -1.0)).norm() < 1e-14);
    }
}
