//! Entropic path-integral policy update.
//!
//! One generation: roll the prior policy, weight every `(s, a)` pair by the
//! exponentiated augmented cost-to-go of its trajectory tail, fit weighted
//! joint Gaussians per time step, smooth the moment signals across the
//! horizon with a polynomial projection, condition on the state, and blend
//! the result into the prior by exponential smoothing.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{validate_fixed_gain, GenerationRecord};
use crate::env::EnvModel;
use crate::error::{Error, Result};
use crate::math::{
    gaussian_condition, psd_repair, symmetrize, weighted_moments, JointMoments, PolyProjector,
    DEFAULT_COV_FLOOR,
};
use crate::policy::{LinearGaussianPolicy, UpdateMask};
use crate::rng::derive_seed;
use crate::rollout::{emppi_log_weights, simulate_batch, simulate_mean, soft_mean, RolloutBatch};

#[derive(Clone, Debug)]
pub struct EmppiConfig {
    /// Inverse temperature on the cost-to-go.
    pub lambda: f64,
    /// Prior retention: 1 drops the policy-likelihood weight term, 0 keeps
    /// it in full.
    pub alpha: f64,
    /// Exponential smoothing factor on the parameter update.
    pub beta: f64,
    /// Rollouts per generation.
    pub samples: usize,
    pub generations: usize,
    /// Degree of the polynomial space the moment time-signals are projected
    /// onto.
    pub poly_degree: usize,
    /// Feedback gain substituted when the gain is not estimated
    /// (`None` means zero).
    pub fixed_gain: Option<DMatrix<f64>>,
    pub mask: UpdateMask,
    /// Use the weight column of each time step (default). When false, the
    /// step-0 weights are reused at every step, as a plain stochastic-search
    /// ablation.
    pub per_step_weights: bool,
    pub seed: u64,
}

impl EmppiConfig {
    /// The experiment defaults `(λ, α, β, M) = (0.2, 0.95, 0.1, 200)`,
    /// 200 generations, cubic signal projection, full version-C update.
    pub fn paper_defaults(seed: u64) -> Self {
        EmppiConfig {
            lambda: 0.2,
            alpha: 0.95,
            beta: 0.1,
            samples: 200,
            generations: 200,
            poly_degree: 3,
            fixed_gain: None,
            mask: UpdateMask::feedforward_and_cov(),
            per_step_weights: true,
            seed: seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda {} must be > 0", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidConfig(format!("beta {} outside (0, 1]", self.beta)));
        }
        if self.samples < 2 {
            return Err(Error::InvalidConfig("need at least 2 samples".to_string()));
        }
        Ok(())
    }

    /// Validation that needs environment shapes.
    pub fn validate_for(&self, env: &dyn EnvModel) -> Result<()> {
        self.validate()?;
        if self.poly_degree >= env.horizon() {
            return Err(Error::DegreeTooHigh {
                degree: self.poly_degree,
                len: env.horizon(),
            });
        }
        validate_fixed_gain(&self.fixed_gain, env.action_dim(), env.state_dim())
    }
}

pub struct EmppiGenerationOutput {
    pub policy: LinearGaussianPolicy,
    pub record: GenerationRecord,
    pub batch: RolloutBatch,
}

/// One generation of the entropic update; see the module docs for the
/// pipeline. Returns the smoothed posterior policy and its metrics record.
/// A batch in which every trajectory failed aborts the update: the prior
/// policy is returned unchanged with the record flagged.
pub fn emppi_generation(
    policy: &LinearGaussianPolicy,
    env: &dyn EnvModel,
    cfg: &EmppiConfig,
    generation: usize,
) -> Result<(LinearGaussianPolicy, GenerationRecord)> {
    let out = emppi_generation_full(policy, env, cfg, generation)?;
    Ok((out.policy, out.record))
}

/// As [`emppi_generation`], additionally handing back the simulated batch.
pub fn emppi_generation_full(
    policy: &LinearGaussianPolicy,
    env: &dyn EnvModel,
    cfg: &EmppiConfig,
    generation: usize,
) -> Result<EmppiGenerationOutput> {
    let started = Instant::now();
    let batch_seed = derive_seed(cfg.seed, generation as u64);
    let batch = simulate_batch(policy, env, cfg.samples, batch_seed)?;

    if batch.all_failed() {
        let record = aborted_record(policy, env, &batch, generation, started);
        return Ok(EmppiGenerationOutput {
            policy: policy.clone(),
            record,
            batch,
        });
    }

    let next = update_policy(policy, env, cfg, &batch)?;

    let sample_costs = batch.total_costs();
    let (min_cost, mean_cost) = GenerationRecord::cost_summary(&sample_costs);
    let soft = soft_mean(&batch, cfg.lambda)?;
    let det_cost = simulate_mean(&next, env).map(|(_, c)| c).unwrap_or(f64::INFINITY);
    let entropy_series: Vec<f64> = next.entropy_series().iter().copied().collect();
    let entropy_sum = entropy_series.iter().sum();

    let record = GenerationRecord {
        generation,
        sample_costs,
        min_cost,
        mean_cost,
        soft_mean: soft,
        det_cost,
        entropy_series,
        entropy_sum,
        wall_time_s: started.elapsed().as_secs_f64(),
        aborted: false,
    };
    Ok(EmppiGenerationOutput { policy: next, record, batch })
}

fn aborted_record(
    policy: &LinearGaussianPolicy,
    env: &dyn EnvModel,
    batch: &RolloutBatch,
    generation: usize,
    started: Instant,
) -> GenerationRecord {
    let entropy_series: Vec<f64> = policy.entropy_series().iter().copied().collect();
    let entropy_sum = entropy_series.iter().sum();
    GenerationRecord {
        generation,
        sample_costs: batch.total_costs(),
        min_cost: f64::NAN,
        mean_cost: f64::NAN,
        soft_mean: f64::NAN,
        det_cost: simulate_mean(policy, env).map(|(_, c)| c).unwrap_or(f64::INFINITY),
        entropy_series,
        entropy_sum,
        wall_time_s: started.elapsed().as_secs_f64(),
        aborted: true,
    }
}

fn update_policy(
    policy: &LinearGaussianPolicy,
    env: &dyn EnvModel,
    cfg: &EmppiConfig,
    batch: &RolloutBatch,
) -> Result<LinearGaussianPolicy> {
    let n_s = env.state_dim();
    let n_a = env.action_dim();
    let n_steps = env.horizon();

    let table = emppi_log_weights(batch, cfg.lambda, cfg.alpha);
    let shared_weights = if cfg.per_step_weights {
        None
    } else {
        Some(table.normalized(0)?)
    };

    // Likelihood-weighted joint (state, action) moments for every step.
    let moments: Vec<JointMoments> = (0..n_steps)
        .into_par_iter()
        .map(|n| -> Result<JointMoments> {
            let weights = match &shared_weights {
                Some(w) => w.clone(),
                None => table.normalized(n)?,
            };
            let taus: Vec<DVector<f64>> = batch
                .samples
                .iter()
                .map(|sample| {
                    let mut tau = DVector::zeros(n_s + n_a);
                    tau.rows_mut(0, n_s).copy_from(&sample.states[n]);
                    tau.rows_mut(n_s, n_a).copy_from(&sample.actions[n]);
                    tau
                })
                .collect();
            weighted_moments(&taus, weights.as_slice())
        })
        .collect::<Result<Vec<_>>>()?;

    // Project the moment time-signals onto the polynomial space.
    let projector = PolyProjector::new(n_steps, cfg.poly_degree)?;
    let means: Vec<DVector<f64>> = moments.iter().map(|m| m.mean.clone()).collect();
    let covs: Vec<DMatrix<f64>> = moments.iter().map(|m| m.cov.clone()).collect();
    let means = projector.project_vectors(&means)?;
    let covs = projector.project_matrices(&covs)?;

    let zero_gain = DMatrix::zeros(n_a, n_s);
    let fixed_gain = cfg.fixed_gain.as_ref().unwrap_or(&zero_gain);

    let mut params = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let joint = JointMoments {
            mean: means[n].clone(),
            cov: psd_repair(&symmetrize(&covs[n]), DEFAULT_COV_FLOOR),
        };
        let old = policy.step(n)?;

        let (offset, gain, cov) = if cfg.mask.gain {
            let cond = gaussian_condition(&joint, n_s)?;
            (cond.offset, cond.gain, cond.cov)
        } else {
            // Fixed-gain substitution in the conditioning formulas.
            let mean_s = joint.mean.rows(0, n_s).into_owned();
            let mean_a = joint.mean.rows(n_s, n_a).into_owned();
            let cov_ss = joint.cov.view((0, 0), (n_s, n_s)).into_owned();
            let cov_aa = joint.cov.view((n_s, n_s), (n_a, n_a)).into_owned();
            let offset = &mean_a - fixed_gain * &mean_s;
            let cov = symmetrize(&(cov_aa - fixed_gain * cov_ss * fixed_gain.transpose()));
            (offset, fixed_gain.clone(), cov)
        };

        params.push((
            if cfg.mask.feedforward { offset } else { old.feedforward().clone() },
            if cfg.mask.gain { gain } else { fixed_gain.clone() },
            if cfg.mask.cov { cov } else { old.cov().clone() },
        ));
    }

    let proposal = LinearGaussianPolicy::new(params)?;
    LinearGaussianPolicy::smoothed(&proposal, policy, cfg.beta)
}
