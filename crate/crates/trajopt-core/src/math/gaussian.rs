//! Multivariate Gaussian parameters, sampling and log-density.

use nalgebra::{DMatrix, DVector};

use super::psd::{psd_repair, symmetrize};
use crate::error::{Error, Result};
use crate::rng::RngStream;

const SYMMETRY_TOL: f64 = 1e-12;
const LN_2PI: f64 = 1.8378770664093453;

/// Mean and covariance of a multivariate normal distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianParams {
    /// Validates shapes and symmetry (to 1e-12, absolute).
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "mean has dimension {d}, covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        Ok(GaussianParams { mean, cov })
    }

    /// Symmetrise and repair the covariance onto the PD cone, then construct.
    pub fn repaired(mean: DVector<f64>, cov: DMatrix<f64>, floor: f64) -> Result<Self> {
        let repaired = psd_repair(&cov, floor);
        GaussianParams::new(mean, repaired)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower Cholesky factor of the covariance.
    pub(crate) fn cholesky_lower(&self) -> Result<DMatrix<f64>> {
        nalgebra::Cholesky::new(self.cov.clone())
            .map(|c| c.l())
            .ok_or(Error::NotPositiveDefinite)
    }
}

/// One draw `mean + L z` with `z` standard normal and `L` the lower Cholesky
/// factor of the covariance. Identical stream state gives identical draws.
pub fn sample_gaussian(rng: &mut RngStream, params: &GaussianParams) -> Result<DVector<f64>> {
    let l = params.cholesky_lower()?;
    Ok(sample_prefactored(rng, params.mean(), &l))
}

/// Sampling with a precomputed Cholesky factor (hot path for policies).
pub(crate) fn sample_prefactored(
    rng: &mut RngStream,
    mean: &DVector<f64>,
    chol_lower: &DMatrix<f64>,
) -> DVector<f64> {
    let z = rng.standard_normal_vector(mean.len());
    mean + chol_lower * z
}

/// `log N(x | mean, cov) = -1/2 (x-mean)ᵀ cov⁻¹ (x-mean) - 1/2 log det(2π cov)`.
pub fn log_density_gaussian(x: &DVector<f64>, params: &GaussianParams) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has dimension {}, distribution has {}",
            x.len(),
            params.dim()
        )));
    }
    let l = params.cholesky_lower()?;
    let log_det = 2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
    Ok(log_density_prefactored(x, params.mean(), &l, log_det))
}

/// Log-density with precomputed factorisation (hot path for policies).
pub(crate) fn log_density_prefactored(
    x: &DVector<f64>,
    mean: &DVector<f64>,
    chol_lower: &DMatrix<f64>,
    log_det_cov: f64,
) -> f64 {
    let diff = x - mean;
    // Solve L y = diff; the quadratic form is then |y|^2.
    let y = chol_lower
        .solve_lower_triangular(&diff)
        .expect("Cholesky factor has positive diagonal");
    let d = mean.len() as f64;
    -0.5 * y.norm_squared() - 0.5 * (d * LN_2PI + log_det_cov)
}

/// Log-determinant of a covariance via its Cholesky factor.
pub(crate) fn log_det_from_cholesky(chol_lower: &DMatrix<f64>) -> f64 {
    2.0 * (0..chol_lower.nrows())
        .map(|i| chol_lower[(i, i)].ln())
        .sum::<f64>()
}

/// Symmetrised covariance, repaired and factorised in one go.
pub(crate) fn repaired_cholesky(cov: &DMatrix<f64>, floor: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut fixed = psd_repair(cov, floor);
    loop {
        match nalgebra::Cholesky::new(fixed.clone()) {
            Some(c) => return (fixed, c.l()),
            // Repair guarantees the minimum eigenvalue analytically, but the
            // factorisation can still fail marginally at the floor; widen.
            None => fixed = psd_repair(&symmetrize(&fixed), floor * 10.0),
        }
    }
}
