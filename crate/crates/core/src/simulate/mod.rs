//! Burgers ground truth by implicit finite differences, and node-wise
//! adaptive Runge–Kutta rollout of pointwise (m = 0) operators.

mod burgers;
mod rk45;
mod rollout;

pub use burgers::{solve_burgers, trajectory_to_dataset, BurgersConfig, Trajectory};
pub use rk45::{integrate_rk45, Rk45Config};
pub use rollout::{rollout_mse, rollout_ode, PointwiseModel, PointwiseRhs};
