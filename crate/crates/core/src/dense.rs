//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type DenseOperator = DMatrix<f64>;

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Moore-Penrose pseudoinverse of a symmetric matrix, dropping eigenvalues
/// below `rel_cutoff * max |eigenvalue|`.
pub fn pinv_sym(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    if m.is_empty() {
        return m.clone();
    }
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.amax();
    let inv = eig.eigenvalues.map(|x| {
        if x.abs() > rel_cutoff * top {
            1.0 / x
        } else {
            0.0
        }
    });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Principal square root of a symmetric positive semidefinite matrix.
/// Eigenvalues down to `-tol * max` are clamped to zero; anything more
/// negative is an error.
pub fn sqrt_psd(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Ok(m.clone());
    }
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.amax();
    let lo = eig.eigenvalues.min();
    if lo < -tol * top.max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!(
            "matrix is not positive semidefinite (eigenvalue {lo:.3e})"
        )));
    }
    let root = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// `‖UᵀU - I‖_F`, an upper bound for the spectral-norm unitarity defect.
pub fn unitarity_defect(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    (g - DMatrix::identity(u.ncols(), u.ncols())).norm()
}

/// Kronecker product of a list of factors, the first one slowest.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a DMatrix<f64>>) -> DMatrix<f64> {
    factors
        .into_iter()
        .fold(DMatrix::from_element(1, 1, 1.0), |acc, f| acc.kronecker(f))
}

/// 0/1 matrix sending basis vector `k` to `map(k)`.
pub fn permutation_matrix(n: usize, map: impl Fn(usize) -> usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    for k in 0..n {
        p[(map(k), k)] = 1.0;
    }
    p
}

/// Real orthogonal matrix whose first column is the unit vector `target`
/// (a Householder reflection, or the identity when `target = e_0`).
pub fn householder_prep(target: &[f64]) -> DMatrix<f64> {
    let n = target.len();
    let t = DVector::from_column_slice(target);
    let mut e0 = DVector::zeros(n);
    e0[0] = 1.0;
    let w = &e0 - &t;
    let wn = w.norm_squared();
    let mut h = DMatrix::identity(n, n);
    if wn > 1e-30 {
        h -= (&w * w.transpose()) * (2.0 / wn);
    }
    h
}

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `y += a * x`.
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn householder_first_column() {
        let t = [0.6, 0.0, -0.8];
        let h = householder_prep(&t);
        for (i, v) in t.iter().enumerate() {
            assert!((h[(i, 0)] - v).abs() < 1e-15);
        }
        assert!(unitarity_defect(&h) < 1e-14);
    }

    #[test]
    fn pinv_of_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = pinv_sym(&m, 1e-12);
        assert!((&m * &p * &m - &m).norm() < 1e-14);
        assert!((p[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sqrt_rejects_negative() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(sqrt_psd(&m, 1e-12).is_err());
        let s = sqrt_psd(&DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]), 1e-12).unwrap();
        assert!((s[(1, 1)] - 3.0).abs() < 1e-14);
    }
}
