//! Entropy-regularised sample-based trajectory optimisation.
//!
//! This crate implements three related Monte Carlo optimisers over a common
//! set of numerical primitives:
//!
//! * [`optimizer::emppi`] — entropic model predictive path integral control
//!   over time-varying linear-Gaussian policy beliefs,
//! * [`optimizer::mppi`] — the classic path-integral update over open-loop
//!   control sequences on control-affine models,
//! * [`optimizer::search`] — a generic entropic stochastic search for static
//!   objectives.
//!
//! Environments implement [`env::EnvModel`] (deterministic dynamics plus
//! running/terminal costs). The crate ships the planar 4-link arm with a
//! contact obstacle, a 1-D double integrator and a static quadratic bowl.
//!
//! All randomness flows through [`rng::RngStream`], a value-typed splittable
//! stream, so every batch and every run is reproducible bit-for-bit,
//! independent of the worker-thread count.

pub mod env;
pub mod error;
pub mod math;
pub mod optimizer;
pub mod policy;
pub mod rng;
pub mod rollout;

pub use error::{Error, Result};
pub use math::{
    gaussian_condition, log_density_gaussian, normalize_log_weights, poly_project_matrices,
    poly_project_vectors, psd_repair, sample_gaussian, weighted_moments, ConditionalGaussian,
    GaussianParams, JointMoments, LogWeights, PolyProjector,
};
pub use policy::{LinearGaussianPolicy, OpenLoopControls, PolicyCheckpoint, UpdateMask};
pub use rng::RngStream;
pub use rollout::{RolloutBatch, TrajectorySample, WeightTable};
