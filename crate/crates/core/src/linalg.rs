use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 1000;

pub fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    Cholesky::new(m.clone()).ok_or_else(|| Error::Numeric("matrix is not positive definite".into()))
}

pub fn logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Solves `L x = b` for the lower Cholesky factor.
pub fn solve_lower(chol: &Cholesky<f64, Dyn>, b: &DVector<f64>) -> DVector<f64> {
    let l = chol.l_dirty();
    let n = b.len();
    let mut x = b.clone();
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= l[(i, j)] * x[j];
        }
        x[i] = acc / l[(i, i)];
    }
    x
}

/// Solves `Lᵀ x = b` for the lower Cholesky factor.
pub fn solve_upper_transposed(chol: &Cholesky<f64, Dyn>, b: &DVector<f64>) -> DVector<f64> {
    let l = chol.l_dirty();
    let n = b.len();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= l[(j, i)] * x[j];
        }
        x[i] = acc / l[(i, i)];
    }
    x
}

/// Largest singular value by power iteration on the smaller Gram matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    largest_eigenvalue_psd(&gram).max(0.0).sqrt()
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
pub fn largest_eigenvalue_psd(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // Fixed, non-symmetric start so the iteration is reproducible and
    // unlikely to be orthogonal to the leading eigenvector.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.37 * (i as f64 + 1.0).sin());
    v /= v.norm();
    let mut value = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        value = v.dot(&w);
        // Residual test: the Rayleigh quotient error is quadratic in it.
        if (&w - &v * value).norm() <= POWER_TOL * value.abs() {
            break;
        }
        v = w / norm;
    }
    value
}
