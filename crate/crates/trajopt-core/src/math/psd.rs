//! Positive-definite covariance repair.

use nalgebra::DMatrix;

/// Default minimum eigenvalue enforced on covariance matrices.
pub const DEFAULT_COV_FLOOR: f64 = 1e-9;

/// First step of the diagonal-shift schedule used by [`psd_repair`].
const GAMMA_BASE: f64 = 1e-6;
const GAMMA_FACTOR: f64 = 10.0;

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Shift a symmetric matrix onto the positive-definite cone.
///
/// Returns `sigma + gamma * I` where `gamma` is the smallest value in the
/// schedule `{0, 1e-6, 1e-5, 1e-4, ...}` for which the minimum eigenvalue
/// reaches `floor`. The input is symmetrised first, so symmetry of the
/// output is exact.
pub fn psd_repair(sigma: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = symmetrize(sigma);
    let lambda_min = min_symmetric_eigenvalue(&sym);
    if lambda_min >= floor {
        return sym;
    }
    let mut gamma = GAMMA_BASE;
    while lambda_min + gamma < floor {
        gamma *= GAMMA_FACTOR;
    }
    let n = sym.nrows();
    sym + DMatrix::identity(n, n) * gamma
}
