//! Iterative optimisers and generation-loop orchestration.
//!
//! [`emppi`] hosts the entropic path-integral update over linear-Gaussian
//! policy beliefs, [`mppi`] the open-loop path-integral baseline and
//! [`search`] the generic entropic stochastic search. [`run`] owns the
//! generation loop, metrics records and early stopping.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::UpdateMask;

pub mod emppi;
pub mod mppi;
pub mod run;
pub mod search;

pub use emppi::{emppi_generation, emppi_generation_full, EmppiConfig, EmppiGenerationOutput};
pub use mppi::{mppi_generation, MppiConfig};
pub use run::{run_emppi, run_mppi, run_search, EarlyStop, EmppiRun, MppiRun, RunHooks, SearchRun};
pub use search::{stochastic_search_step, SearchConfig};

/// Feedforward initialisation shared by the experiment presets.
pub const INIT_FEEDFORWARD: f64 = 0.5;
/// Initial (and, for version A, frozen) policy covariance scale.
pub const INIT_COV_SCALE: f64 = 0.1;

/// The three experiment versions: A freezes the covariance and drops the
/// policy-likelihood weight term (`α = 1`), B updates the covariance under
/// the pure Boltzmann posterior (`α = 0`) and collapses, C runs the full
/// update at `α = 0.95`. The feedback gain is never estimated; a fixed gain
/// (zero by default) is substituted throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VersionPreset {
    A,
    B,
    C,
}

impl VersionPreset {
    pub fn alpha(&self) -> f64 {
        match self {
            VersionPreset::A => 1.0,
            VersionPreset::B => 0.0,
            VersionPreset::C => 0.95,
        }
    }

    pub fn mask(&self) -> UpdateMask {
        match self {
            VersionPreset::A => UpdateMask::feedforward_only(),
            VersionPreset::B | VersionPreset::C => UpdateMask::feedforward_and_cov(),
        }
    }

    /// Overwrite the preset-owned fields of a config.
    pub fn apply(&self, cfg: &mut EmppiConfig) {
        cfg.alpha = self.alpha();
        cfg.mask = self.mask();
    }
}

/// Per-generation metrics.
#[derive(Clone, Debug)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Total trajectory cost per sample (`+inf` for failed samples).
    pub sample_costs: Vec<f64>,
    pub min_cost: f64,
    pub mean_cost: f64,
    pub soft_mean: f64,
    /// Cost of the deterministic mean-policy rollout after the update.
    pub det_cost: f64,
    /// Per-step `log |Σ_n|` of the updated policy.
    pub entropy_series: Vec<f64>,
    pub entropy_sum: f64,
    pub wall_time_s: f64,
    /// Set when the whole batch failed and the update was skipped.
    pub aborted: bool,
}

impl GenerationRecord {
    pub const CSV_HEADER: &'static str = "gen,min_cost,mean_cost,soft_mean,det_cost,entropy_sum";

    /// Summarise finite sample costs into min/mean.
    pub(crate) fn cost_summary(costs: &[f64]) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut sum = 0.0;
        let mut count = 0usize;
        for &c in costs {
            if c.is_finite() {
                min = min.min(c);
                sum += c;
                count += 1;
            }
        }
        if count == 0 {
            (f64::NAN, f64::NAN)
        } else {
            (min, sum / count as f64)
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.generation,
            self.min_cost,
            self.mean_cost,
            self.soft_mean,
            self.det_cost,
            self.entropy_sum
        )
    }
}

/// Minimum sample count advisable for estimating the trajectory covariance:
/// a tenth of `(N-1) * (n_τ² + n_τ/2) / 2` with `n_τ = n_s + n_a`. Callers
/// are expected to warn below this.
pub fn sample_budget_floor(n_tau: usize, horizon: usize) -> usize {
    let n_tau = n_tau as f64;
    let pairs = 0.5 * (n_tau * n_tau + 0.5 * n_tau);
    ((horizon.saturating_sub(1)) as f64 * pairs / 10.0).ceil() as usize
}

/// Shape check for an optional fixed feedback gain.
pub(crate) fn validate_fixed_gain(
    fixed_gain: &Option<DMatrix<f64>>,
    n_a: usize,
    n_s: usize,
) -> Result<()> {
    if let Some(g) = fixed_gain {
        if g.nrows() != n_a || g.ncols() != n_s {
            return Err(Error::DimensionMismatch(format!(
                "fixed gain is {}x{}, expected {n_a}x{n_s}",
                g.nrows(),
                g.ncols()
            )));
        }
    }
    Ok(())
}
