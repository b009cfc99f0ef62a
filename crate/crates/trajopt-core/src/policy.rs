//! Time-varying linear-Gaussian policy beliefs.
//!
//! A policy holds one `(k_n, K_n, Σ_n)` triple per time step: actions at
//! step `n` in state `s` are distributed `N(k_n + K_n s, Σ_n)`. Policies are
//! immutable after construction; updates produce new values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, DEFAULT_COV_FLOOR};
use crate::rng::RngStream;

/// Which policy parameters an optimiser is allowed to update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateMask {
    pub feedforward: bool,
    pub gain: bool,
    pub cov: bool,
}

impl UpdateMask {
    pub const fn all() -> Self {
        UpdateMask { feedforward: true, gain: true, cov: true }
    }

    pub const fn feedforward_only() -> Self {
        UpdateMask { feedforward: true, gain: false, cov: false }
    }

    pub const fn feedforward_and_cov() -> Self {
        UpdateMask { feedforward: true, gain: false, cov: true }
    }
}

/// Parameters of one time step, with cached Cholesky factor for the hot
/// sampling and log-density paths.
#[derive(Clone, Debug)]
pub struct PolicyStep {
    feedforward: DVector<f64>,
    gain: DMatrix<f64>,
    cov: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
    log_det_cov: f64,
}

impl PolicyStep {
    fn new(feedforward: DVector<f64>, gain: DMatrix<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n_a = feedforward.len();
        if gain.nrows() != n_a || cov.nrows() != n_a || cov.ncols() != n_a {
            return Err(Error::DimensionMismatch(format!(
                "policy step: k is {n_a}-dimensional, K is {}x{}, covariance {}x{}",
                gain.nrows(),
                gain.ncols(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let (cov, chol_lower) = math::repaired_cholesky(&cov, DEFAULT_COV_FLOOR);
        let log_det_cov = math::log_det_from_cholesky(&chol_lower);
        Ok(PolicyStep { feedforward, gain, cov, chol_lower, log_det_cov })
    }

    pub fn feedforward(&self) -> &DVector<f64> {
        &self.feedforward
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

/// A sequence of [`PolicyStep`]s sharing action and state dimensions.
#[derive(Clone, Debug)]
pub struct LinearGaussianPolicy {
    steps: Vec<PolicyStep>,
    state_dim: usize,
    action_dim: usize,
}

impl LinearGaussianPolicy {
    /// Build from per-step `(k, K, Σ)` triples. Covariances are symmetrised
    /// and repaired to the default floor.
    pub fn new(params: Vec<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidConfig("policy horizon is zero".to_string()));
        }
        let action_dim = params[0].0.len();
        let state_dim = params[0].1.ncols();
        let mut steps = Vec::with_capacity(params.len());
        for (k, gain, cov) in params {
            if k.len() != action_dim || gain.ncols() != state_dim {
                return Err(Error::DimensionMismatch(
                    "policy steps have unequal dimensions".to_string(),
                ));
            }
            steps.push(PolicyStep::new(k, gain, cov)?);
        }
        Ok(LinearGaussianPolicy { steps, state_dim, action_dim })
    }

    /// A policy with the same parameters at every step.
    pub fn constant(
        horizon: usize,
        feedforward: DVector<f64>,
        gain: DMatrix<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self> {
        LinearGaussianPolicy::new(
            (0..horizon)
                .map(|_| (feedforward.clone(), gain.clone(), cov.clone()))
                .collect(),
        )
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn step(&self, n: usize) -> Result<&PolicyStep> {
        self.steps.get(n).ok_or(Error::StepOutOfRange {
            step: n,
            horizon: self.steps.len(),
        })
    }

    pub fn steps(&self) -> &[PolicyStep] {
        &self.steps
    }

    /// Conditional mean `k_n + K_n s`.
    pub fn mean_action(&self, n: usize, state: &DVector<f64>) -> Result<DVector<f64>> {
        let step = self.step(n)?;
        Ok(step.feedforward() + step.gain() * state)
    }

    /// Draw an action from `N(k_n + K_n s, Σ_n)`.
    pub fn sample_action(
        &self,
        n: usize,
        state: &DVector<f64>,
        rng: &mut RngStream,
    ) -> Result<DVector<f64>> {
        let mean = self.mean_action(n, state)?;
        let step = &self.steps[n];
        Ok(math::sample_prefactored(rng, &mean, &step.chol_lower))
    }

    /// `log N(a | k_n + K_n s, Σ_n)`.
    pub fn log_prob(&self, n: usize, state: &DVector<f64>, action: &DVector<f64>) -> Result<f64> {
        let mean = self.mean_action(n, state)?;
        let step = &self.steps[n];
        Ok(math::log_density_prefactored(action, &mean, &step.chol_lower, step.log_det_cov))
    }

    /// Per-step entropy metric `log |Σ_n|`; the policy entropy content of the
    /// paper's figures is the sum of this series.
    pub fn entropy_series(&self) -> DVector<f64> {
        DVector::from_iterator(self.steps.len(), self.steps.iter().map(|s| s.log_det_cov))
    }

    pub fn entropy_sum(&self) -> f64 {
        self.entropy_series().sum()
    }

    /// Exponential smoothing `β · new + (1 - β) · old` applied to every
    /// parameter entry, with the covariances repaired afterwards.
    pub fn smoothed(new: &Self, old: &Self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "smoothing factor {beta} outside (0, 1]"
            )));
        }
        if new.horizon() != old.horizon()
            || new.action_dim != old.action_dim
            || new.state_dim != old.state_dim
        {
            return Err(Error::DimensionMismatch(
                "smoothing policies of different shape".to_string(),
            ));
        }
        let params = new
            .steps
            .iter()
            .zip(&old.steps)
            .map(|(n, o)| {
                (
                    &n.feedforward * beta + &o.feedforward * (1.0 - beta),
                    &n.gain * beta + &o.gain * (1.0 - beta),
                    &n.cov * beta + &o.cov * (1.0 - beta),
                )
            })
            .collect();
        LinearGaussianPolicy::new(params)
    }

    pub fn to_checkpoint(&self) -> PolicyCheckpoint {
        PolicyCheckpoint {
            steps: self
                .steps
                .iter()
                .map(|s| CheckpointStep {
                    feedforward: s.feedforward.iter().copied().collect(),
                    gain: matrix_rows(&s.gain),
                    cov: matrix_rows(&s.cov),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(checkpoint: &PolicyCheckpoint) -> Result<Self> {
        let params = checkpoint
            .steps
            .iter()
            .map(|s| {
                Ok((
                    DVector::from_vec(s.feedforward.clone()),
                    rows_to_matrix(&s.gain)?,
                    rows_to_matrix(&s.cov)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        LinearGaussianPolicy::new(params)
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(0);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Checkpoint("ragged matrix rows".to_string()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Serialisable snapshot of a policy: per-step `k`, `K`, `Σ` as nested
/// arrays. Written as JSON by the CLI for checkpointing and resume.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub steps: Vec<CheckpointStep>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointStep {
    pub feedforward: Vec<f64>,
    pub gain: Vec<Vec<f64>>,
    pub cov: Vec<Vec<f64>>,
}

impl PolicyCheckpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

/// An open-loop action sequence, the decision variable of the path-integral
/// baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenLoopControls {
    pub actions: Vec<DVector<f64>>,
}

impl OpenLoopControls {
    pub fn zeros(horizon: usize, action_dim: usize) -> Self {
        OpenLoopControls {
            actions: vec![DVector::zeros(action_dim); horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.first().map(|a| a.len()).unwrap_or(0)
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.actions
            .iter()
            .map(|a| a.iter().copied().collect())
            .collect()
    }

    pub fn from_nested(rows: &[Vec<f64>]) -> Self {
        OpenLoopControls {
            actions: rows.iter().map(|r| DVector::from_vec(r.clone())).collect(),
        }
    }
}
