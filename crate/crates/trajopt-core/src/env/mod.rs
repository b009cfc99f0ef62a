//! Environment interfaces and the three concrete environments: the planar
//! 4-link arm with an obstacle, a 1-D double integrator, and a static
//! quadratic bowl.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

pub mod arm;
pub mod bowl;
pub mod double_integrator;

pub use arm::{ArmCostParams, ArmEnv, ContactInfo, Obstacle};
pub use bowl::{quadratic_bowl, QuadraticBowl};
pub use double_integrator::{double_integrator_env, DoubleIntegratorEnv};

/// Deterministic discrete-time optimal-control environment.
///
/// `step` must be a pure function: identical `(n, state, action)` always
/// yields an identical successor. Costs are expected to be nonnegative and
/// finite for finite inputs (the arm's logarithmic terminal cost knowingly
/// violates nonnegativity near the goal; see [`arm`]).
pub trait EnvModel: Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn initial_state(&self) -> DVector<f64>;
    fn step(&self, n: usize, state: &DVector<f64>, action: &DVector<f64>) -> Result<DVector<f64>>;
    fn running_cost(&self, n: usize, state: &DVector<f64>, action: &DVector<f64>) -> f64;
    fn terminal_cost(&self, state: &DVector<f64>) -> f64;
}

/// Control-affine model form used by the path-integral baseline:
/// `s' = s + (drift(n, s) + B(n, s) a) δt + B(n, s) ξ √δt` with state-only
/// costs; the action penalty is supplied by the algorithm itself.
pub trait ControlAffineModel: Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn dt(&self) -> f64;
    fn initial_state(&self) -> DVector<f64>;
    fn drift(&self, n: usize, state: &DVector<f64>) -> DVector<f64>;
    fn input_matrix(&self, n: usize, state: &DVector<f64>) -> DMatrix<f64>;
    fn state_cost(&self, n: usize, state: &DVector<f64>) -> f64;
    fn terminal_state_cost(&self, state: &DVector<f64>) -> f64;
}

/// A static objective for the generic stochastic search.
pub trait StaticObjective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
}
