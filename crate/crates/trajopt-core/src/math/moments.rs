//! Likelihood-weighted moment estimation and Gaussian conditioning.

use nalgebra::{DMatrix, DVector};

use super::psd::{min_symmetric_eigenvalue, symmetrize};
use crate::error::{Error, Result};

/// Joint state-action mean and covariance at one time step, state block first.
#[derive(Clone, Debug, PartialEq)]
pub struct JointMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl JointMoments {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Conditional Gaussian `a | s ~ N(offset + gain s, cov)` obtained by
/// conditioning a joint distribution on its leading state block.
#[derive(Clone, Debug)]
pub struct ConditionalGaussian {
    pub offset: DVector<f64>,
    pub gain: DMatrix<f64>,
    pub cov: DMatrix<f64>,
}

/// Weighted mean and covariance of a sample set.
///
/// `mean = Σ_j w_j x_j`, `cov = Σ_j w_j (x_j - mean)(x_j - mean)ᵀ` with the
/// covariance symmetrised against floating-point drift. Weights are expected
/// to be normalised; zero-weight entries are fine as long as the total is
/// positive.
pub fn weighted_moments(samples: &[DVector<f64>], weights: &[f64]) -> Result<JointMoments> {
    if samples.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples vs {} weights",
            samples.len(),
            weights.len()
        )));
    }
    if samples.len() < 2 {
        return Err(Error::DimensionMismatch(
            "need at least 2 samples".to_string(),
        ));
    }
    let d = samples[0].len();
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::DimensionMismatch(
            "samples of unequal dimension".to_string(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::DegenerateWeights);
    }

    let mut mean = DVector::<f64>::zeros(d);
    for (x, &w) in samples.iter().zip(weights) {
        mean.axpy(w, x, 1.0);
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for (x, &w) in samples.iter().zip(weights) {
        let diff = x - &mean;
        cov.ger(w, &diff, &diff, 1.0);
    }
    Ok(JointMoments {
        mean,
        cov: symmetrize(&cov),
    })
}

/// Minimum eigenvalue below which the state block counts as singular.
const STATE_BLOCK_EIG_TOL: f64 = 1e-10;

/// Condition a joint Gaussian on its leading `n_s` coordinates.
///
/// With blocks `Σ_ss, Σ_sa, Σ_as, Σ_aa` this returns
/// `gain = Σ_as Σ_ss⁻¹`, `offset = μ_a - gain μ_s` and
/// `cov = Σ_aa - gain Σ_ss gainᵀ`. Callers are expected to repair the joint
/// covariance first; a state block with minimum eigenvalue below 1e-10 is
/// rejected as singular.
pub fn gaussian_condition(joint: &JointMoments, n_s: usize) -> Result<ConditionalGaussian> {
    let d = joint.dim();
    if n_s == 0 || n_s >= d {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {n_s} invalid for joint dimension {d}"
        )));
    }
    let n_a = d - n_s;
    let cov_ss = joint.cov.view((0, 0), (n_s, n_s)).into_owned();
    let cov_as = joint.cov.view((n_s, 0), (n_a, n_s)).into_owned();
    let cov_aa = joint.cov.view((n_s, n_s), (n_a, n_a)).into_owned();

    if min_symmetric_eigenvalue(&symmetrize(&cov_ss)) <= STATE_BLOCK_EIG_TOL {
        return Err(Error::StateCovarianceSingular);
    }
    let chol = nalgebra::Cholesky::new(cov_ss.clone()).ok_or(Error::StateCovarianceSingular)?;
    // gain = Σ_as Σ_ss⁻¹  via  Σ_ss gainᵀ = Σ_asᵀ (Σ_ss symmetric).
    let gain = chol.solve(&cov_as.transpose()).transpose();

    let mean_s = joint.mean.rows(0, n_s).into_owned();
    let mean_a = joint.mean.rows(n_s, n_a).into_owned();
    let offset = &mean_a - &gain * &mean_s;
    let cov = symmetrize(&(cov_aa - &gain * cov_ss * gain.transpose()));

    Ok(ConditionalGaussian { offset, gain, cov })
}
