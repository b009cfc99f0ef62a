//! Open-loop path-integral baseline on control-affine models.
//!
//! Each generation perturbs the nominal control sequence with Gaussian
//! noise, rolls the perturbed controls through the Euler-discretised
//! dynamics, weighs the perturbations by exponentiated cost and shifts the
//! nominal sequence by the weighted noise mean.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::GenerationRecord;
use crate::env::ControlAffineModel;
use crate::error::{Error, Result};
use crate::math::normalize_log_weights;
use crate::policy::OpenLoopControls;
use crate::rng::{derive_seed, RngStream};
use crate::rollout::soft_mean_of_costs;

#[derive(Clone, Debug)]
pub struct MppiConfig {
    /// Temperature: weights are `exp(-(1/λ) R)`.
    pub lambda: f64,
    /// Covariance of the control perturbations (must be positive definite).
    pub noise_cov: DMatrix<f64>,
    pub samples: usize,
    pub generations: usize,
    pub seed: u64,
    /// Weigh each step by the cost-to-go from that step (default). When
    /// false, every step reuses the total trajectory cost.
    pub time_indexed_weights: bool,
}

impl MppiConfig {
    pub fn new(lambda: f64, noise_cov: DMatrix<f64>, samples: usize, generations: usize, seed: u64) -> Self {
        MppiConfig {
            lambda,
            noise_cov,
            samples,
            generations,
            seed,
            time_indexed_weights: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda {} must be > 0", self.lambda)));
        }
        if self.samples < 2 {
            return Err(Error::InvalidConfig("need at least 2 samples".to_string()));
        }
        if nalgebra::Cholesky::new(self.noise_cov.clone()).is_none() {
            return Err(Error::InvalidConfig(
                "noise covariance must be positive definite".to_string(),
            ));
        }
        Ok(())
    }
}

struct PerturbedRollout {
    stage_costs: Vec<f64>,
    terminal_cost: f64,
    failed: bool,
}

/// One path-integral generation.
pub fn mppi_generation(
    controls: &OpenLoopControls,
    model: &dyn ControlAffineModel,
    cfg: &MppiConfig,
    generation: usize,
) -> Result<(OpenLoopControls, GenerationRecord)> {
    cfg.validate()?;
    let n_a = model.action_dim();
    if controls.horizon() != model.horizon() || controls.action_dim() != n_a {
        return Err(Error::DimensionMismatch(
            "controls incompatible with model".to_string(),
        ));
    }
    let chol = nalgebra::Cholesky::new(cfg.noise_cov.clone())
        .ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();

    let root = RngStream::from_seed(derive_seed(cfg.seed, generation as u64));
    let noise: Vec<Vec<DVector<f64>>> = (0..cfg.samples)
        .into_par_iter()
        .map(|j| {
            let sample_stream = root.substream(j as u64);
            (0..model.horizon())
                .map(|n| {
                    let mut rng = sample_stream.substream(n as u64);
                    &l * rng.standard_normal_vector(n_a)
                })
                .collect()
        })
        .collect();

    mppi_generation_with_noise(controls, model, cfg, generation, &noise)
}

/// Core update on externally supplied perturbations; unit tests hand-set the
/// noise to cross-check against scalar evaluation.
fn mppi_generation_with_noise(
    controls: &OpenLoopControls,
    model: &dyn ControlAffineModel,
    cfg: &MppiConfig,
    generation: usize,
    noise: &[Vec<DVector<f64>>],
) -> Result<(OpenLoopControls, GenerationRecord)> {
    let started = Instant::now();
    let n_steps = model.horizon();
    let m = noise.len();
    let noise_cov_inv = nalgebra::Cholesky::new(cfg.noise_cov.clone())
        .ok_or(Error::NotPositiveDefinite)?
        .inverse();

    let rollouts: Vec<PerturbedRollout> = noise
        .par_iter()
        .map(|xi|

 {
            let mut state = model.initial_state();
            let mut stage_costs = Vec::with_capacity(n_steps);
            let mut failed = false;
            let dt = model.dt();
            let sqrt_dt = dt.sqrt();
            for n in 0..n_steps {
                let a = &controls.actions[n];
                let b = model.input_matrix(n, &state);
                let cost = model.state_cost(n, &state) * dt
                    + 0.5 * cfg.lambda * a.dot(&(&noise_cov_inv * (a * dt + &xi[n] * (2.0 * sqrt_dt))));
                let next = &state + (model.drift(n, &state) + &b * a) * dt + b * &xi[n] * sqrt_dt;
                if !(next.iter().all(|v| v.is_finite()) && cost.is_finite()) {
                    failed = true;
                    while stage_costs.len() < n_steps {
                        stage_costs.push(0.0);
                    }
                    break;
                }
                stage_costs.push(cost);
                state = next;
            }
            let terminal_cost = if failed {
                0.0
            } else {
                model.terminal_state_cost(&state) * model.dt()
            };
            let failed = failed || !terminal_cost.is_finite();
            PerturbedRollout { stage_costs, terminal_cost, failed }
        })
        .collect();

    // Per-step cost-to-go (or total cost) log-weights.
    let mut cost_to_go = DMatrix::zeros(m, n_steps);
    for (j, r) in rollouts.iter().enumerate() {
        let mut acc = r.terminal_cost;
        for n in (0..n_steps).rev() {
            acc += r.stage_costs[n];
            cost_to_go[(j, n)] = acc;
        }
    }

    let mut actions = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let logw = DVector::from_iterator(
            m,
            rollouts.iter().enumerate().map(|(j, r)| {
                if r.failed {
                    f64::NEG_INFINITY
                } else if cfg.time_indexed_weights {
                    -cost_to_go[(j, n)] / cfg.lambda
                } else {
                    -cost_to_go[(j, 0)] / cfg.lambda
                }
            }),
        );
        let w = normalize_log_weights(&logw)?;
        let mut shift = DVector::zeros(controls.action_dim());
        for (j, xi) in noise.iter().enumerate() {
            shift.axpy(w[j], &xi[n], 1.0);
        }
        actions.push(&controls.actions[n] + shift);
    }
    let next = OpenLoopControls { actions };

    let sample_costs: Vec<f64> = rollouts
        .iter()
        .enumerate()
        .map(|(j, r)| if r.failed { f64::INFINITY } else { cost_to_go[(j, 0)] })
        .collect();
    let (min_cost, mean_cost) = GenerationRecord::cost_summary(&sample_costs);
    // The path-integral temperature enters as 1/λ.
    let soft = soft_mean_of_costs(&sample_costs, 1.0 / cfg.lambda)?;
    let det_cost = deterministic_cost(&next, model, cfg);

    let log_det_noise = {
        let l = nalgebra::Cholesky::new(cfg.noise_cov.clone()).unwrap().l();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    };
    let entropy_series = vec![log_det_noise; n_steps];

    let record = GenerationRecord {
        generation,
        sample_costs,
        min_cost,
        mean_cost,
        soft_mean: soft,
        det_cost,
        entropy_series: entropy_series.clone(),
        entropy_sum: entropy_series.iter().sum(),
        wall_time_s: started.elapsed().as_secs_f64(),
        aborted: false,
    };
    Ok((next, record))
}

/// Roll the nominal controls without noise and accumulate the generalised
/// cost.
fn deterministic_cost(
    controls: &OpenLoopControls,
    model: &dyn ControlAffineModel,
    cfg: &MppiConfig,
) -> f64 {
    let noise_cov_inv = match nalgebra::Cholesky::new(cfg.noise_cov.clone()) {
        Some(c) => c.inverse(),
        None => return f64::INFINITY,
    };
    let dt = model.dt();
    let mut state = model.initial_state();
    let mut total = 0.0;
    for n in 0..model.horizon() {
        let a = &controls.actions[n];
        total += model.state_cost(n, &state) * dt
            + 0.5 * cfg.lambda * a.dot(&(&noise_cov_inv * a)) * dt;
        let b = model.input_matrix(n, &state);
        state = &state + (model.drift(n, &state) + &b * a) * dt;
        if !state.iter().all(|v| v.is_finite()) {
            return f64::INFINITY;
        }
    }
    total + model.terminal_state_cost(&state) * dt
}
