//! Quasi-Newton minimization and L1-regularized least squares.

mod l1;
mod line_search;
mod quasi_newton;

pub use l1::{soft_threshold, solve_l1_gram, solve_l1_linear, GramSystem, L1Config, L1Solution};
pub use quasi_newton::{minimize_quasi_newton, QuasiNewtonConfig, SolveReport, StepRecord, Termination};

use crate::error::Result;

/// A differentiable objective: parameter vector to `(loss, gradient)`.
///
/// Repeated evaluation at the same point must return identical values.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Adapter turning a closure into an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnObjective { dim, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        (self.f)(x)
    }
}
