//! Dense linear-algebra and statistical primitives shared by all optimisers:
//! Gaussian sampling and densities, likelihood-weighted moment estimation,
//! Gaussian conditioning, log-sum-exp weight normalisation, polynomial
//! least-squares projection of time signals, and positive-definite
//! covariance repair.
//!
//! All operations are pure functions on immutable inputs.

mod gaussian;
mod moments;
mod poly;
mod psd;
mod weights;

pub use gaussian::{log_density_gaussian, sample_gaussian, GaussianParams};
pub(crate) use gaussian::{
    log_density_prefactored, log_det_from_cholesky, repaired_cholesky, sample_prefactored,
};
pub use moments::{gaussian_condition, weighted_moments, ConditionalGaussian, JointMoments};
pub use poly::{poly_project_matrices, poly_project_vectors, PolyProjector};
pub use psd::{min_symmetric_eigenvalue, psd_repair, symmetrize, DEFAULT_COV_FLOOR};
pub use weights::{normalize_log_weights, LogWeights};
