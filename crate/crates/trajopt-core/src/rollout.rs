//! Parallel Monte Carlo rollout engine: simulate a batch of trajectories
//! under a policy, and derive cost-to-go, likelihood weights and batch cost
//! summaries from it.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::env::EnvModel;
use crate::error::{Error, Result};
use crate::math::normalize_log_weights;
use crate::policy::LinearGaussianPolicy;
use crate::rng::RngStream;

/// One simulated trajectory. A sample whose dynamics produced a non-finite
/// value is marked `failed`; its arrays are padded to full length so the
/// batch stays rectangular, and downstream weighting assigns it `-inf`.
#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub states: Vec<DVector<f64>>,
    pub actions: Vec<DVector<f64>>,
    pub stage_costs: Vec<f64>,
    pub terminal_cost: f64,
    pub log_pi: Vec<f64>,
    pub failed: bool,
}

/// A generation's worth of rollouts.
#[derive(Clone, Debug)]
pub struct RolloutBatch {
    pub samples: Vec<TrajectorySample>,
    pub horizon: usize,
    pub seed: u64,
}

impl RolloutBatch {
    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn num_failed(&self) -> usize {
        self.samples.iter().filter(|s| s.failed).count()
    }

    pub fn all_failed(&self) -> bool {
        self.samples.iter().all(|s| s.failed)
    }

    /// Total trajectory costs `R_0` per sample; `+inf` for failed samples.
    pub fn total_costs(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| {
                if s.failed {
                    f64::INFINITY
                } else {
                    s.terminal_cost + s.stage_costs.iter().sum::<f64>()
                }
            })
            .collect()
    }
}

/// Simulate `num_samples` trajectories of `policy` on `env`.
///
/// The action of sample `j` at step `n` is drawn from the substream
/// `(seed, j, n)`, so the batch is bit-identical for any worker-thread
/// count and any execution order. Samples whose dynamics blow up are marked
/// failed and retained, keeping the per-generation sample budget fixed.
pub fn simulate_batch(
    policy: &LinearGaussianPolicy,
    env: &dyn EnvModel,
    num_samples: usize,
    seed: u64,
) -> Result<RolloutBatch> {
    check_compatible(policy, env)?;
    if num_samples < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 samples, got {num_samples}"
        )));
    }
    let root = RngStream::from_seed(seed);
    let samples: Vec<TrajectorySample> = (0..num_samples)
        .into_par_iter()
        .map(|j| simulate_one(policy, env, &root.substream(j as u64)))
        .collect();
    Ok(RolloutBatch {
        samples,
        horizon: env.horizon(),
        seed,
    })
}

fn check_compatible(policy: &LinearGaussianPolicy, env: &dyn EnvModel) -> Result<()> {
    if policy.state_dim() != env.state_dim()
        || policy.action_dim() != env.action_dim()
        || policy.horizon() != env.horizon()
    {
        return Err(Error::DimensionMismatch(format!(
            "policy ({}s/{}a/N={}) incompatible with environment ({}s/{}a/N={})",
            policy.state_dim(),
            policy.action_dim(),
            policy.horizon(),
            env.state_dim(),
            env.action_dim(),
            env.horizon()
        )));
    }
    Ok(())
}

fn simulate_one(
    policy: &LinearGaussianPolicy,
    env: &dyn EnvModel,
    sample_stream: &RngStream,
) -> TrajectorySample {
    let n_steps = env.horizon();
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut actions = Vec::with_capacity(n_steps);
    let mut stage_costs = Vec::with_capacity(n_steps);
    let mut log_pi = Vec::with_capacity(n_steps);
    let mut failed = false;

    let mut state = env.initial_state();
    states.push(state.clone());
    for n in 0..n_steps {
        let mut rng = sample_stream.substream(n as u64);
        let action = policy
            .sample_action(n, &state, &mut rng)
            .expect("policy/env dimensions checked");
        let lp = policy
            .log_prob(n, &state, &action)
            .expect("policy/env dimensions checked");
        let cost = env.running_cost(n, &state, &action);

        let next = match env.step(n, &state, &action) {
            Ok(s) if s.iter().all(|v| v.is_finite()) && cost.is_finite() && lp.is_finite() => s,
            _ => {
                failed = true;
                pad_failed(&mut states, &mut actions, &mut stage_costs, &mut log_pi, n_steps, &state, policy.action_dim());
                return TrajectorySample {
                    states,
                    actions,
                    stage_costs,
                    terminal_cost: 0.0,
                    log_pi,
                    failed,
                };
            }
        };
        actions.push(action);
        stage_costs.push(cost);
        log_pi.push(lp);
        state = next;
        states.push(state.clone());
    }

    let terminal_cost = env.terminal_cost(&state);
    if !terminal_cost.is_finite() {
        failed = true;
    }
    TrajectorySample {
        states,
        actions,
        stage_costs,
        terminal_cost: if failed { 0.0 } else { terminal_cost },
        log_pi,
        failed,
    }
}

fn pad_failed(
    states: &mut Vec<DVector<f64>>,
    actions: &mut Vec<DVector<f64>>,
    stage_costs: &mut Vec<f64>,
    log_pi: &mut Vec<f64>,
    n_steps: usize,
    last_state: &DVector<f64>,
    action_dim: usize,
) {
    while states.len() < n_steps + 1 {
        states.push(last_state.clone());
    }
    while actions.len() < n_steps {
        actions.push(DVector::zeros(action_dim));
        stage_costs.push(0.0);
        log_pi.push(0.0);
    }
}

/// Roll the mean policy (`a_n = k_n + K_n s_n`, no noise) and return the
/// trajectory and its total cost.
pub fn simulate_mean(
    policy: &LinearGaussianPolicy,
    env: &dyn EnvModel,
) -> Result<(Vec<DVector<f64>>, f64)> {
    check_compatible(policy, env)?;
    let mut state = env.initial_state();
    let mut states = vec![state.clone()];
    let mut total = 0.0;
    for n in 0..env.horizon() {
        let action = policy.mean_action(n, &state)?;
        total += env.running_cost(n, &state, &action);
        state = env.step(n, &state, &action)?;
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::DynamicsBlowUp { step: n });
        }
        states.push(state.clone());
    }
    total += env.terminal_cost(&state);
    Ok((states, total))
}

/// Cost-to-go matrix `R[(j, n)] = r_N,j + Σ_{n' >= n} r_{n',j}`, computed by
/// backward accumulation.
pub fn cost_to_go(batch: &RolloutBatch) -> DMatrix<f64> {
    let m = batch.num_samples();
    let n_steps = batch.horizon;
    let mut out = DMatrix::zeros(m, n_steps);
    for (j, sample) in batch.samples.iter().enumerate() {
        let mut acc = sample.terminal_cost;
        for n in (0..n_steps).rev() {
            acc += sample.stage_costs[n];
            out[(j, n)] = acc;
        }
    }
    out
}

/// Per-time-step unnormalised log-weights of a batch.
#[derive(Clone, Debug)]
pub struct WeightTable {
    /// `num_samples x horizon`.
    pub log_weights: DMatrix<f64>,
}

impl WeightTable {
    /// Normalised weight column for time step `n`.
    pub fn normalized(&self, n: usize) -> Result<DVector<f64>> {
        normalize_log_weights(&self.log_weights.column(n).into_owned())
    }
}

/// Likelihood weights of the entropic update:
/// `log w_{n,j} = -λ R_{n,j} - (1 - α) Σ_{n'=n}^{N-1} log π_{g,n'}(a_{n',j}|s_{n',j})`.
///
/// Failed trajectories receive `-inf` at every step. At `α = 1` the policy
/// term vanishes and the weights reduce to exponentiated cost-to-go.
pub fn emppi_log_weights(batch: &RolloutBatch, lambda: f64, alpha: f64) -> WeightTable {
    let m = batch.num_samples();
    let n_steps = batch.horizon;
    let costs = cost_to_go(batch);
    let mut log_weights = DMatrix::zeros(m, n_steps);
    for (j, sample) in batch.samples.iter().enumerate() {
        if sample.failed {
            for n in 0..n_steps {
                log_weights[(j, n)] = f64::NEG_INFINITY;
            }
            continue;
        }
        let mut logpi_tail = 0.0;
        for n in (0..n_steps).rev() {
            logpi_tail += sample.log_pi[n];
            log_weights[(j, n)] = -lambda * costs[(j, n)] - (1.0 - alpha) * logpi_tail;
        }
    }
    WeightTable { log_weights }
}

/// Optimism-weighted batch cost summary
/// `-(1/λ) log (1/M) Σ_j exp(-λ R_0(τ_j))`, evaluated with a shifted
/// log-sum-exp. Failed trajectories contribute zero mass (infinite cost) but
/// still count toward `M`.
pub fn soft_mean(batch: &RolloutBatch, lambda: f64) -> Result<f64> {
    soft_mean_of_costs(&batch.total_costs(), lambda)
}

/// [`soft_mean`] on a bare cost vector (`+inf` entries carry zero mass).
pub fn soft_mean_of_costs(costs: &[f64], lambda: f64) -> Result<f64> {
    let scaled: Vec<f64> = costs
        .iter()
        .map(|r| if r.is_finite() { -lambda * r } else { f64::NEG_INFINITY })
        .collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllTrajectoriesFailed);
    }
    let sum: f64 = scaled.iter().map(|v| (v - max).exp()).sum();
    let m = costs.len() as f64;
    Ok(-(max + sum.ln() - m.ln()) / lambda)
}

/// Dump a batch as columnar text, one row per `(sample, step)`:
/// sample index, step, state, action, stage cost.
pub fn dump_columns(batch: &RolloutBatch, out: &mut dyn Write) -> std::io::Result<()> {
    let n_s = batch.samples[0].states[0].len();
    let n_a = batch.samples[0].actions.first().map(|a| a.len()).unwrap_or(0);
    write!(out, "j,n")?;
    for i in 0..n_s {
        write!(out, ",s{i}")?;
    }
    for i in 0..n_a {
        write!(out, ",a{i}")?;
    }
    writeln!(out, ",stage_cost")?;
    for (j, sample) in batch.samples.iter().enumerate() {
        for n in 0..batch.horizon {
            write!(out, "{j},{n}")?;
            for v in sample.states[n].iter() {
                write!(out, ",{v}")?;
            }
            for v in sample.actions[n].iter() {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{}", sample.stage_costs[n])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{double_integrator_env, EnvModel};
    use approx::assert_relative_eq;
    use nalgebra::{dvector, DMatrix};

    fn di_policy(horizon: usize, k: f64, cov: f64) -> LinearGaussianPolicy {
        LinearGaussianPolicy::constant(
            horizon,
            dvector![k],
            DMatrix::zeros(1, 2),
            DMatrix::identity(1, 1) * cov,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_policy_gives_identical_trajectories() {
        let env = double_integrator_env(6, 0.1, 1.0);
        let policy = di_policy(6, 0.7, 0.0); // cov floored to ~0
        let batch = simulate_batch(&policy, &env, 8, 3).unwrap();
        let reference = &batch.samples[0];
        for s in &batch.samples {
            for (a, b) in s.states.iter().zip(&reference.states) {
                assert!((a - b).amax() < 1e-3);
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical_across_thread_counts() {
        let env = double_integrator_env(5, 0.1, 1.0);
        let policy = di_policy(5, 0.0, 0.3);

        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| simulate_batch(&policy, &env, 16, 42).unwrap())
        };
        let a = run(1);
        let b = run(8);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.actions, y.actions);
            assert_eq!(x.states, y.states);
            assert_eq!(x.stage_costs, y.stage_costs);
        }
    }

    #[test]
    fn zero_policy_matches_closed_form_drift() {
        let mut env = double_integrator_env(4, 0.1, 0.0);
        env.initial = nalgebra::Vector2::new(1.0, 2.0);
        let policy = di_policy(4, 0.0, 0.0);
        let batch = simulate_batch(&policy, &env, 2, 0).unwrap();
        for (n, s) in batch.samples[0].states.iter().enumerate() {
            assert!((s[0] - (1.0 + 0.2 * n as f64)).abs() < 1e-3);
        }
    }

    #[test]
    fn replay_reproduces_recorded_states_bit_exactly() {
        let env = double_integrator_env(6, 0.1, 1.0);
        let policy = di_policy(6, 0.2, 0.5);
        let batch = simulate_batch(&policy, &env, 4, 9).unwrap();
        for sample in &batch.samples {
            assert!(!sample.failed);
            let mut state = env.initial_state();
            for n in 0..batch.horizon {
                assert_eq!(sample.states[n], state);
                state = env.step(n, &state, &sample.actions[n]).unwrap();
            }
            assert_eq!(sample.states[batch.horizon], state);
        }
    }

    fn hand_batch(stage: Vec<Vec<f64>>, terminal: Vec<f64>, logpi: Vec<Vec<f64>>) -> RolloutBatch {
        let horizon = stage[0].len();
        let samples = stage
            .into_iter()
            .zip(terminal)
            .zip(logpi)
            .map(|((costs, term), lp)| TrajectorySample {
                states: vec![dvector![0.0]; horizon + 1],
                actions: vec![dvector![0.0]; horizon],
                stage_costs: costs,
                terminal_cost: term,
                log_pi: lp,
                failed: false,
            })
            .collect();
        RolloutBatch { samples, horizon, seed: 0 }
    }

    #[test]
    fn cost_to_go_counts_down() {
        let batch = hand_batch(
            vec![vec![1.0, 1.0, 1.0]],
            vec![0.0],
            vec![vec![0.0, 0.0, 0.0]],
        );
        let r = cost_to_go(&batch);
        assert_eq!(r[(0, 0)], 3.0);
        assert_eq!(r[(0, 1)], 2.0);
        assert_eq!(r[(0, 2)], 1.0);
    }

    #[test]
    fn cost_to_go_zero_costs() {
        let batch = hand_batch(vec![vec![0.0; 4]], vec![0.0], vec![vec![0.0; 4]]);
        assert_eq!(cost_to_go(&batch).amax(), 0.0);
    }

    #[test]
    fn cost_to_go_matches_forward_sum_oracle() {
        let mut rng = crate::rng::RngStream::from_seed(13);
        let m = 5;
        let n_steps = 7;
        let stage: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n_steps).map(|_| rng.uniform() * 3.0).collect())
            .collect();
        let terminal: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
        let batch = hand_batch(stage.clone(), terminal.clone(), vec![vec![0.0; n_steps]; m]);
        let r = cost_to_go(&batch);
        for j in 0..m {
            for n in 0..n_steps {
                // naive forward sum
                let mut expected = terminal[j];
                for cost in stage[j].iter().skip(n) {
                    expected += cost;
                }
                assert_relative_eq!(r[(j, n)], expected, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn alpha_one_weights_are_pure_exponentiated_cost() {
        let batch = hand_batch(
            vec![vec![1.0, 2.0], vec![0.5, 0.25]],
            vec![0.5, 0.0],
            vec![vec![-0.3, -0.7], vec![-0.2, -0.9]],
        );
        let lambda = 0.7;
        let table = emppi_log_weights(&batch, lambda, 1.0);
        let r = cost_to_go(&batch);
        for j in 0..2 {
            for n in 0..2 {
                assert_relative_eq!(
                    table.log_weights[(j, n)],
                    -lambda * r[(j, n)],
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn identical_trajectories_weigh_uniformly() {
        let batch = hand_batch(
            vec![vec![1.0, 2.0]; 3],
            vec![0.5; 3],
            vec![vec![-0.4, -0.6]; 3],
        );
        let table = emppi_log_weights(&batch, 0.2, 0.95);
        for n in 0..2 {
            let w = table.normalized(n).unwrap();
            for j in 0..3 {
                assert_relative_eq!(w[j], 1.0 / 3.0, max_relative = 1e-12);
            }
        }
    }

    /// Direct scalar-by-scalar evaluation of the weight formula on three
    /// hand-built trajectories.
    #[test]
    fn weights_match_direct_evaluation_oracle() {
        let stage = vec![
            vec![1.0, 0.5, 0.2],
            vec![0.3, 0.8, 0.1],
            vec![2.0, 0.1, 0.4],
        ];
        let terminal = vec![0.7, 1.1, 0.2];
        let logpi = vec![
            vec![-1.2, -0.4, -0.9],
            vec![-0.5, -1.5, -0.3],
            vec![-0.8, -0.6, -1.1],
        ];
        let (lambda, alpha) = (0.2, 0.95);
        let batch = hand_batch(stage.clone(), terminal.clone(), logpi.clone());
        let table = emppi_log_weights(&batch, lambda, alpha);

        for j in 0..3 {
            for n in 0..3 {
                let mut r = terminal[j];
                let mut tail = 0.0;
                for np in n..3 {
                    r += stage[j][np];
                    tail += logpi[j][np];
                }
                let expected = -lambda * r - (1.0 - alpha) * tail;
                assert_relative_eq!(table.log_weights[(j, n)], expected, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn failed_trajectories_get_zero_weight() {
        let mut batch = hand_batch(
            vec![vec![1.0, 1.0], vec![0.1, 0.1]],
            vec![0.0, 0.0],
            vec![vec![0.0, 0.0]; 2],
        );
        batch.samples[1].failed = true;
        let table = emppi_log_weights(&batch, 1.0, 1.0);
        let w = table.normalized(0).unwrap();
        assert_eq!(w[1], 0.0);
        assert_relative_eq!(w[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn weight_monotonicity_at_alpha_one() {
        let batch = hand_batch(
            vec![vec![1.0, 0.2], vec![2.0, 0.1], vec![0.5, 0.9]],
            vec![0.3, 0.1, 0.4],
            vec![vec![0.0, 0.0]; 3],
        );
        let table = emppi_log_weights(&batch, 0.5, 1.0);
        let r = cost_to_go(&batch);
        for n in 0..2 {
            let w = table.normalized(n).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    if r[(a, n)] < r[(b, n)] {
                        assert!(w[a] > w[b]);
                    }
                }
            }
        }
    }

    #[test]
    fn weight_table_invariant_to_constant_cost_shift() {
        let stage = vec![vec![1.0, 0.3], vec![0.2, 0.9], vec![1.4, 0.05]];
        let terminal = vec![0.4, 0.0, 1.0];
        let logpi = vec![vec![-0.5, -0.1], vec![-0.9, -0.2], vec![-0.3, -0.6]];
        let base = hand_batch(stage.clone(), terminal.clone(), logpi.clone());
        let shifted = hand_batch(
            stage.iter().map(|r| r.iter().map(|c| c + 5.0).collect()).collect(),
            terminal,
            logpi,
        );
        for alpha in [0.0, 0.95, 1.0] {
            let wa = emppi_log_weights(&base, 0.2, alpha);
            let wb = emppi_log_weights(&shifted, 0.2, alpha);
            for n in 0..2 {
                let a = wa.normalized(n).unwrap();
                let b = wb.normalized(n).unwrap();
                assert!((a - b).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn alpha_one_weight_table_invariant_under_cost_lambda_rescale() {
        let stage = vec![vec![1.0, 0.3], vec![0.2, 0.9]];
        let terminal = vec![0.4, 0.0];
        let logpi = vec![vec![0.0, 0.0]; 2];
        let c = 4.0;
        let base = hand_batch(stage.clone(), terminal.clone(), logpi.clone());
        let scaled = hand_batch(
            stage.iter().map(|r| r.iter().map(|v| v / c).collect()).collect(),
            terminal.iter().map(|v| v / c).collect(),
            logpi,
        );
        let wa = emppi_log_weights(&base, 0.2, 1.0);
        let wb = emppi_log_weights(&scaled, 0.2 * c, 1.0);
        for n in 0..2 {
            assert!((wa.normalized(n).unwrap() - wb.normalized(n).unwrap()).amax() < 1e-12);
        }
    }

    #[test]
    fn soft_mean_of_equal_costs_is_that_cost() {
        let batch = hand_batch(vec![vec![1.0, 2.0]; 4], vec![0.5; 4], vec![vec![0.0, 0.0]; 4]);
        assert_relative_eq!(soft_mean(&batch, 0.3).unwrap(), 3.5, max_relative = 1e-12);
    }

    #[test]
    fn soft_mean_tends_to_minimum_for_large_lambda() {
        let batch = hand_batch(
            vec![vec![1.0], vec![5.0], vec![9.0]],
            vec![0.0; 3],
            vec![vec![0.0]; 3],
        );
        let sm = soft_mean(&batch, 200.0).unwrap();
        assert!((sm - 1.0).abs() < 0.01, "soft mean {sm}");
    }

    #[test]
    fn soft_mean_analytic_two_sample_case() {
        // R_0 = {0, ln 2 / lambda} -> soft mean = -(1/lambda) log(3/4)
        let lambda = 0.7;
        let batch = hand_batch(
            vec![vec![0.0], vec![2.0f64.ln() / lambda]],
            vec![0.0; 2],
            vec![vec![0.0]; 2],
        );
        let expected = -(0.75f64.ln()) / lambda;
        assert_relative_eq!(soft_mean(&batch, lambda).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn soft_mean_bounded_by_min_and_mean() {
        let costs = [3.0, 1.0, 4.0, 1.5];
        let batch = hand_batch(
            costs.iter().map(|&c| vec![c]).collect(),
            vec![0.0; 4],
            vec![vec![0.0]; 4],
        );
        let mean = costs.iter().sum::<f64>() / 4.0;
        for lambda in [1e-3, 0.1, 1.0, 10.0] {
            let sm = soft_mean(&batch, lambda).unwrap();
            assert!(sm >= 1.0 - 1e-9 && sm <= mean + 1e-9, "lambda {lambda}: {sm}");
        }
    }

    #[test]
    fn soft_mean_all_failed_errors() {
        let mut batch = hand_batch(vec![vec![1.0]; 2], vec![0.0; 2], vec![vec![0.0]; 2]);
        batch.samples[0].failed = true;
        batch.samples[1].failed = true;
        assert!(matches!(
            soft_mean(&batch, 1.0),
            Err(Error::AllTrajectoriesFailed)
        ));
    }

    #[test]
    fn dump_has_one_row_per_sample_step() {
        let env = double_integrator_env(3, 0.1, 1.0);
        let policy = di_policy(3, 0.1, 0.2);
        let batch = simulate_batch(&policy, &env, 4, 1).unwrap();
        let mut buf = Vec::new();
        dump_columns(&batch, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 4 * 3);
        assert!(lines[0].starts_with("j,n,s0,s1,a0,stage_cost"));
    }
}
