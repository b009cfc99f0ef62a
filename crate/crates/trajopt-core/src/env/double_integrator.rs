//! 1-D double integrator with quadratic costs, the oracle environment for
//! the LQR acceptance checks.

use nalgebra::{DMatrix, DVector, Vector2};

use super::{ControlAffineModel, EnvModel};
use crate::error::{Error, Result};

/// State `(x, v)`, dynamics `x' = x + v dt`, `v' = v + a dt`.
///
/// Running cost `action_weight a^2 dt`; terminal cost
/// `terminal_pos_weight (x - goal)^2 + terminal_vel_weight v^2`. Both are
/// quadratic, so the optimal open-loop sequence is computable by a backward
/// Riccati recursion.
#[derive(Clone, Copy, Debug)]
pub struct DoubleIntegratorEnv {
    pub horizon: usize,
    pub dt: f64,
    pub goal: f64,
    pub action_weight: f64,
    pub terminal_pos_weight: f64,
    pub terminal_vel_weight: f64,
    pub initial: Vector2<f64>,
}

/// Default cost weights: cheap control, stiff terminal pull.
pub fn double_integrator_env(horizon: usize, dt: f64, goal: f64) -> DoubleIntegratorEnv {
    DoubleIntegratorEnv {
        horizon,
        dt,
        goal,
        action_weight: 1.0,
        terminal_pos_weight: 1000.0,
        terminal_vel_weight: 100.0,
        initial: Vector2::zeros(),
    }
}

impl EnvModel for DoubleIntegratorEnv {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial_state(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.initial.x, self.initial.y])
    }

    fn step(&self, n: usize, state: &DVector<f64>, action: &DVector<f64>) -> Result<DVector<f64>> {
        let x = state[0] + state[1] * self.dt;
        let v = state[1] + action[0] * self.dt;
        if !(x.is_finite() && v.is_finite()) {
            return Err(Error::DynamicsBlowUp { step: n });
        }
        Ok(DVector::from_vec(vec![x, v]))
    }

    fn running_cost(&self, _n: usize, _state: &DVector<f64>, action: &DVector<f64>) -> f64 {
        self.action_weight * action[0] * action[0] * self.dt
    }

    fn terminal_cost(&self, state: &DVector<f64>) -> f64 {
        let dx = state[0] - self.goal;
        self.terminal_pos_weight * dx * dx + self.terminal_vel_weight * state[1] * state[1]
    }
}

impl ControlAffineModel for DoubleIntegratorEnv {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn initial_state(&self) -> DVector<f64> {
        EnvModel::initial_state(self)
    }

    fn drift(&self, _n: usize, state: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![state[1], 0.0])
    }

    fn input_matrix(&self, _n: usize, _state: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_vec(2, 1, vec![0.0, 1.0])
    }

    fn state_cost(&self, _n: usize, _state: &DVector<f64>) -> f64 {
        0.0
    }

    fn terminal_state_cost(&self, state: &DVector<f64>) -> f64 {
        self.terminal_cost(state) / self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coasting_drifts_linearly() {
        let env = double_integrator_env(5, 0.1, 0.0);
        let mut s = DVector::from_vec(vec![0.0, 2.0]);
        for n in 0..5 {
            s = env.step(n, &s, &DVector::zeros(1)).unwrap();
            assert_relative_eq!(s[0], 0.2 * (n + 1) as f64, max_relative = 1e-14);
            assert_eq!(s[1], 2.0);
        }
    }

    #[test]
    fn terminal_cost_is_zero_at_goal_rest() {
        let env = double_integrator_env(5, 0.1, 1.5);
        assert_eq!(env.terminal_cost(&DVector::from_vec(vec![1.5, 0.0])), 0.0);
    }
}
