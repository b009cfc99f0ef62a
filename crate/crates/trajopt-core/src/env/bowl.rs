//! Static quadratic objective for the stochastic-search tests.

use nalgebra::DVector;

use super::StaticObjective;

/// `q(x) = ||x - target||^2`.
#[derive(Clone, Debug)]
pub struct QuadraticBowl {
    pub target: DVector<f64>,
}

pub fn quadratic_bowl(target: DVector<f64>) -> QuadraticBowl {
    QuadraticBowl { target }
}

impl StaticObjective for QuadraticBowl {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (x - &self.target).norm_squared()
    }
}
