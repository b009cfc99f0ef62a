//! Overflow-free normalisation of log-scale weights.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Unnormalised sample weights on the natural-log scale. `-inf` marks a
/// sample that must receive zero weight (e.g. a failed trajectory).
#[derive(Clone, Debug)]
pub struct LogWeights {
    values: DVector<f64>,
}

impl LogWeights {
    pub fn new(values: DVector<f64>) -> Self {
        LogWeights { values }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn normalize(&self) -> Result<DVector<f64>> {
        normalize_log_weights(&self.values)
    }
}

/// `w_j = exp(lw_j - max lw) / Σ_j exp(lw_j - max lw)`.
///
/// The max shift keeps the computation overflow-free for any finite input.
/// Entries equal to `-inf` map to exactly zero weight; if no entry is finite
/// the weight vector is unusable and an error is returned.
pub fn normalize_log_weights(logw: &DVector<f64>) -> Result<DVector<f64>> {
    if logw.iter().any(|v| v.is_nan()) {
        return Err(Error::NanLogWeight);
    }
    let max = logw
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NoViableSamples);
    }
    let mut w = logw.map(|v| (v - max).exp());
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NoViableSamples);
    }
    w /= total;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;
    use proptest::prelude::*;

    #[test]
    fn equal_logs_give_equal_weights() {
        let w = normalize_log_weights(&dvector![0.0, 0.0, 0.0]).unwrap();
        for i in 0..3 {
            assert_relative_eq!(w[i], 1.0 / 3.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn extreme_spread_is_overflow_free() {
        let w = normalize_log_weights(&dvector![0.0, -1000.0]).unwrap();
        assert_relative_eq!(w[0], 1.0, max_relative = 1e-12);
        assert!(w[1] >= 0.0 && w[1] < 1e-300);
        assert!(w.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn huge_negative_logs_keep_exact_ratio() {
        // softmax of {-1e6, -1e6 + 1} is {1/(1+e), e/(1+e)}
        let w = normalize_log_weights(&dvector![-1e6, -1e6 + 1.0]).unwrap();
        let e = std::f64::consts::E;
        assert_relative_eq!(w[0], 1.0 / (1.0 + e), max_relative = 1e-12);
        assert_relative_eq!(w[1], e / (1.0 + e), max_relative = 1e-12);
    }

    #[test]
    fn all_minus_infinity_errors() {
        let lw = dvector![f64::NEG_INFINITY, f64::NEG_INFINITY];
        assert!(matches!(
            normalize_log_weights(&lw),
            Err(Error::NoViableSamples)
        ));
    }

    #[test]
    fn nan_is_rejected() {
        assert!(matches!(
            normalize_log_weights(&dvector![0.0, f64::NAN]),
            Err(Error::NanLogWeight)
        ));
    }

    #[test]
    fn minus_infinity_entries_get_zero_weight() {
        let w = normalize_log_weights(&dvector![f64::NEG_INFINITY, 0.3, 0.3]).unwrap();
        assert_eq!(w[0], 0.0);
        assert_relative_eq!(w.sum(), 1.0, max_relative = 1e-12);
    }

    proptest! {
        /// Adding a constant to every log-weight leaves the result unchanged.
        #[test]
        fn shift_invariance(
            logs in proptest::collection::vec(-50.0f64..50.0, 2..20),
            shift in -50.0f64..50.0,
        ) {
            let lw = DVector::from_vec(logs);
            let base = normalize_log_weights(&lw).unwrap();
            let shifted = normalize_log_weights(&lw.add_scalar(shift)).unwrap();
            for i in 0..base.len() {
                prop_assert!((base[i] - shifted[i]).abs() <= 1e-14);
            }
        }
    }
}
