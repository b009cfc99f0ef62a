//! Generation-loop orchestration: run an optimiser for a configured number
//! of generations, collect records, invoke checkpoint/batch hooks and apply
//! optional early stopping.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::emppi::{emppi_generation_full, EmppiConfig};
use super::mppi::{mppi_generation, MppiConfig};
use super::search::{stochastic_search_step, SearchConfig};
use super::GenerationRecord;
use crate::env::{ControlAffineModel, EnvModel, StaticObjective};
use crate::error::Result;
use crate::math::{psd_repair, DEFAULT_COV_FLOOR};
use crate::policy::{LinearGaussianPolicy, OpenLoopControls};
use crate::rng::{derive_seed, RngStream};
use crate::rollout::{soft_mean_of_costs, RolloutBatch};

/// Optional stopping rules; both are off by default.
#[derive(Clone, Debug, Default)]
pub struct EarlyStop {
    /// Stop once the policy entropy sum falls below this floor.
    pub entropy_floor: Option<f64>,
    /// Stop when the best sampled cost has not improved by `plateau_tol`
    /// over this many generations.
    pub plateau_window: Option<usize>,
    pub plateau_tol: f64,
}

impl EarlyStop {
    fn triggers(&self, records: &[GenerationRecord]) -> bool {
        let last = match records.last() {
            Some(r) => r,
            None => return false,
        };
        if let Some(floor) = self.entropy_floor {
            if last.entropy_sum < floor {
                return true;
            }
        }
        if let Some(window) = self.plateau_window {
            if window > 0 && records.len() > window {
                let recent = &records[records.len() - window..];
                let best_recent = recent.iter().map(|r| r.min_cost).fold(f64::INFINITY, f64::min);
                let best_before = records[..records.len() - window]
                    .iter()
                    .map(|r| r.min_cost)
                    .fold(f64::INFINITY, f64::min);
                if best_recent > best_before - self.plateau_tol {
                    return true;
                }
            }
        }
        false
    }
}

/// Per-generation callbacks for persisting artifacts.
#[derive(Default)]
pub struct RunHooks<'a> {
    /// Checkpoint every `interval` generations (0 disables).
    pub checkpoint_interval: usize,
    pub on_checkpoint: Option<Box<dyn FnMut(usize, &LinearGaussianPolicy) + 'a>>,
    pub on_batch: Option<Box<dyn FnMut(usize, &RolloutBatch) + 'a>>,
}

#[derive(Debug)]
pub struct EmppiRun {
    pub records: Vec<GenerationRecord>,
    pub final_policy: LinearGaussianPolicy,
}

/// Run the entropic optimiser for `cfg.generations` generations.
pub fn run_emppi(
    env: &dyn EnvModel,
    initial: &LinearGaussianPolicy,
    cfg: &EmppiConfig,
    early: &EarlyStop,
    hooks: &mut RunHooks,
) -> Result<EmppiRun> {
    cfg.validate_for(env)?;
    let mut policy = initial.clone();
    let mut records = Vec::with_capacity(cfg.generations);
    for g in 0..cfg.generations {
        let out = emppi_generation_full(&policy, env, cfg, g).map_err(|e| e.at_generation(g))?;
        policy = out.policy;
        if let Some(cb) = hooks.on_batch.as_mut() {
            cb(g, &out.batch);
        }
        if hooks.checkpoint_interval > 0 && (g + 1) % hooks.checkpoint_interval == 0 {
            if let Some(cb) = hooks.on_checkpoint.as_mut() {
                cb(g, &policy);
            }
        }
        records.push(out.record);
        if early.triggers(&records) {
            break;
        }
    }
    Ok(EmppiRun { records, final_policy: policy })
}

#[derive(Debug)]
pub struct MppiRun {
    pub records: Vec<GenerationRecord>,
    pub final_controls: OpenLoopControls,
}

/// Run the open-loop path-integral baseline.
pub fn run_mppi(
    model: &dyn ControlAffineModel,
    initial: &OpenLoopControls,
    cfg: &MppiConfig,
    early: &EarlyStop,
) -> Result<MppiRun> {
    cfg.validate()?;
    let mut controls = initial.clone();
    let mut records = Vec::with_capacity(cfg.generations);
    for g in 0..cfg.generations {
        let (next, record) =
            mppi_generation(&controls, model, cfg, g).map_err(|e| e.at_generation(g))?;
        controls = next;
        records.push(record);
        if early.triggers(&records) {
            break;
        }
    }
    Ok(MppiRun { records, final_controls: controls })
}

#[derive(Debug)]
pub struct SearchRun {
    pub records: Vec<GenerationRecord>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Run the static stochastic search.
pub fn run_search(
    objective: &dyn StaticObjective,
    init_mean: &DVector<f64>,
    init_cov: &DMatrix<f64>,
    cfg: &SearchConfig,
    early: &EarlyStop,
) -> Result<SearchRun> {
    cfg.validate()?;
    let mut mean = init_mean.clone();
    let mut cov = init_cov.clone();
    let mut records = Vec::with_capacity(cfg.generations);
    for g in 0..cfg.generations {
        let started = Instant::now();
        let mut rng = RngStream::from_seed(derive_seed(cfg.seed, g as u64));

        // Objective values of this generation's cloud, for the record.
        let sample_costs = {
            let params = crate::math::GaussianParams::repaired(
                mean.clone(),
                cov.clone(),
                DEFAULT_COV_FLOOR,
            )
            .map_err(|e| e.at_generation(g))?;
            (0..cfg.samples)
                .map(|j| {
                    let mut sub = rng.substream(j as u64);
                    crate::math::sample_gaussian(&mut sub, &params)
                        .map(|x| objective.value(&x))
                })
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| e.at_generation(g))?
        };

        let (next_mean, next_cov) = stochastic_search_step(
            &mean,
            &cov,
            objective,
            cfg.lambda,
            cfg.alpha,
            cfg.samples,
            &mut rng,
        )
        .map_err(|e| e.at_generation(g))?;
        mean = next_mean;
        cov = psd_repair(&next_cov, DEFAULT_COV_FLOOR);

        let (min_cost, mean_cost) = GenerationRecord::cost_summary(&sample_costs);
        let soft = soft_mean_of_costs(&sample_costs, cfg.lambda).map_err(|e| e.at_generation(g))?;
        let log_det = nalgebra::Cholesky::new(cov.clone())
            .map(|c| 2.0 * (0..c.l().nrows()).map(|i| c.l()[(i, i)].ln()).sum::<f64>())
            .unwrap_or(f64::NEG_INFINITY);
        records.push(GenerationRecord {
            generation: g,
            sample_costs,
            min_cost,
            mean_cost,
            soft_mean: soft,
            det_cost: objective.value(&mean),
            entropy_series: vec![log_det],
            entropy_sum: log_det,
            wall_time_s: started.elapsed().as_secs_f64(),
            aborted: false,
        });
        if early.triggers(&records) {
            break;
        }
    }
    Ok(SearchRun { records, mean, cov })
}
