//! Dense complex square matrices and the handful of kernels the rest of the
//! crate is built on.
//!
//! Entries are stored row-major. The raw slice kernels (`gemm`, `gemm_acc`,
//! `axpy`) operate on `dim * dim` buffers and are what the engine uses in its
//! inner loops; `ComplexMatrix` wraps them for everything else.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{FrodsError, Result};

/// Hermiticity tolerance applied to every exponentiated operator.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        ComplexMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = *d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    /// Builds a matrix from row-major entries; `data.len()` must equal `dim²`.
    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(FrodsError::DimensionMismatch {
                left: dim * dim,
                right: data.len(),
            });
        }
        Ok(ComplexMatrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(FrodsError::DimensionMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(FrodsError::DimensionMismatch {
                left: self.dim,
                right: rhs.dim,
            });
        }
        let mut out = Self::zeros(self.dim);
        gemm(&mut out.data, &self.data, &rhs.data, self.dim);
        Ok(out)
    }

    /// max |a_kl - conj(a_lk)|
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest singular value, from the spectrum of `a† a`.
    pub fn op_norm_estimate(&self) -> f64 {
        let gram = &self.adjoint() * self;
        let eig = to_nalgebra(&gram).symmetric_eigen();
        eig.eigenvalues
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l))
            .max(0.0)
            .sqrt()
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Relative Frobenius deviation `‖self - reference‖ / ‖reference‖`.
    /// Falls back to the absolute deviation when the reference vanishes.
    pub fn rel_frob_diff(&self, reference: &ComplexMatrix) -> f64 {
        let diff = (self - reference).frob_norm();
        let base = reference.frob_norm();
        if base == 0.0 {
            diff
        } else {
            diff / base
        }
    }

    /// Real eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        check_hermitian(self)?;
        let mut ev: Vec<f64> = to_nalgebra(self)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok(ev)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Mul<Complex64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Complex64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.matmul(b)
}

pub fn adjoint(a: &ComplexMatrix) -> ComplexMatrix {
    a.adjoint()
}

pub fn check_hermitian(h: &ComplexMatrix) -> Result<()> {
    let max_asymmetry = h.max_asymmetry();
    if max_asymmetry > HERMITIAN_TOL {
        Err(FrodsError::NotHermitian { max_asymmetry })
    } else {
        Ok(())
    }
}

/// `exp(scale * h)` for Hermitian `h`, through `h = V D V†`.
pub fn herm_exp(h: &ComplexMatrix, scale: Complex64) -> Result<ComplexMatrix> {
    check_hermitian(h)?;
    let n = h.dim();
    let eig = to_nalgebra(h).symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&l| (scale * l).exp())
        .collect();
    Ok(ComplexMatrix::from_fn(n, |i, j| {
        (0..n).map(|k| v[(i, k)] * phases[k] * v[(j, k)].conj()).sum()
    }))
}

fn to_nalgebra(a: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(a.dim, a.dim, &a.data)
}

/// `out = a * b` on row-major `m x m` buffers.
pub fn gemm(out: &mut [Complex64], a: &[Complex64], b: &[Complex64], m: usize) {
    out.fill(Complex64::new(0.0, 0.0));
    gemm_acc(out, a, b, m);
}

/// `out += a * b` on row-major `m x m` buffers.
pub fn gemm_acc(out: &mut [Complex64], a: &[Complex64], b: &[Complex64], m: usize) {
    debug_assert!(out.len() == m * m && a.len() == m * m && b.len() == m * m);
    for i in 0..m {
        let row = &mut out[i * m..(i + 1) * m];
        for k in 0..m {
            let aik = a[i * m + k];
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let brow = &b[k * m..(k + 1) * m];
            for (o, &bkj) in row.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
}

/// `y += s * x`
pub fn axpy(y: &mut [Complex64], s: Complex64, x: &[Complex64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}
