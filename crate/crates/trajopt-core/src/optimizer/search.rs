//! Generic entropic stochastic search over a static objective.
//!
//! Each iteration samples the current Gaussian belief, weighs the samples by
//! `exp(-(λ q(x) + (1 - α) log N(x | μ, Σ)))` and refits mean and covariance
//! to the weighted cloud (covariance about the new mean).

use nalgebra::{DMatrix, DVector};

use crate::env::StaticObjective;
use crate::error::{Error, Result};
use crate::math::{
    log_density_gaussian, normalize_log_weights, sample_gaussian, weighted_moments,
    GaussianParams, DEFAULT_COV_FLOOR,
};
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub samples: usize,
    pub generations: usize,
    pub seed: u64,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda {} must be > 0", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.samples < 2 {
            return Err(Error::InvalidConfig("need at least 2 samples".to_string()));
        }
        Ok(())
    }
}

/// One search iteration. Returns the refitted `(mean, covariance)`; the
/// covariance is raw (symmetric but possibly near-singular) and is repaired
/// when the next iteration rebuilds its sampling distribution.
pub fn stochastic_search_step(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    objective: &dyn StaticObjective,
    lambda: f64,
    alpha: f64,
    num_samples: usize,
    rng: &mut RngStream,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if mean.len() != objective.dim() {
        return Err(Error::DimensionMismatch(format!(
            "search mean has dimension {}, objective expects {}",
            mean.len(),
            objective.dim()
        )));
    }
    let params = GaussianParams::repaired(mean.clone(), cov.clone(), DEFAULT_COV_FLOOR)?;

    let mut xs = Vec::with_capacity(num_samples);
    let mut logw = DVector::zeros(num_samples);
    for j in 0..num_samples {
        let mut sub = rng.substream(j as u64);
        let x = sample_gaussian(&mut sub, &params)?;
        let q = objective.value(&x);
        let logpdf = log_density_gaussian(&x, &params)?;
        logw[j] = if q.is_finite() {
            -(lambda * q + (1.0 - alpha) * logpdf)
        } else {
            f64::NEG_INFINITY
        };
        xs.push(x);
    }
    let weights = normalize_log_weights(&logw).map_err(|e| match e {
        Error::NoViableSamples => Error::DegenerateWeights,
        other => other,
    })?;

    let fitted = weighted_moments(&xs, weights.as_slice())?;
    Ok((fitted.mean, fitted.cov))
}
