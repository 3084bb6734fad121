//! L1-regularized linear least squares by accelerated proximal gradient.
//!
//! Minimizes `½‖b − A q‖²/n + λ‖q‖₁`. Iterations run on the Gram form
//! (`AᵀA/n`, `Aᵀb/n`), so their cost is independent of the row count.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct L1Config {
    pub max_iter: usize,
    /// Stop when the largest coordinate change falls to this value.
    pub tol: f64,
}

impl Default for L1Config {
    fn default() -> Self {
        L1Config {
            max_iter: 200_000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Solution {
    pub coefficients: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every iteration, for monotonicity audits.
    pub history: Vec<f64>,
}

/// `sign(v) · max(|v| − λ, 0)`.
pub fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Normal-equation data of a least-squares problem, scaled by 1/n.
#[derive(Debug, Clone)]
pub struct GramSystem {
    pub gram: DMatrix<f64>,
    pub atb: DVector<f64>,
    pub btb: f64,
    pub rows: usize,
}

impl GramSystem {
    /// From a row-major `rows × cols` design and its target.
    pub fn from_rows(design: &[f64], cols: usize, target: &[f64]) -> Result<Self> {
        let rows = target.len();
        if design.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "design rows vs target length",
                expected: rows * cols,
                got: design.len(),
            });
        }
        if rows == 0 {
            return Err(Error::Config("empty design".into()));
        }
        let mut gram = DMatrix::<f64>::zeros(cols, cols);
        let mut atb = DVector::<f64>::zeros(cols);
        let mut btb = 0.0;
        for (r, b) in target.iter().enumerate() {
            let a = &design[r * cols..(r + 1) * cols];
            for i in 0..cols {
                atb[i] += a[i] * b;
                for j in i..cols {
                    gram[(i, j)] += a[i] * a[j];
                }
            }
            btb += b * b;
        }
        for i in 0..cols {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
        }
        let n = rows as f64;
        Ok(GramSystem {
            gram: gram / n,
            atb: atb / n,
            btb: btb / n,
            rows,
        })
    }

    pub fn cols(&self) -> usize {
        self.atb.len()
    }

    /// `½‖b − A q‖²/n`.
    pub fn half_mse(&self, q: &DVector<f64>) -> f64 {
        let gq = &self.gram * q;
        (0.5 * self.btb - self.atb.dot(q) + 0.5 * q.dot(&gq)).max(0.0)
    }

    pub fn objective(&self, q: &DVector<f64>, lambda: f64) -> f64 {
        self.half_mse(q) + lambda * q.iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Minimizes `½‖b − A q‖²/n + λ‖q‖₁` for a row-major design.
pub fn solve_l1_linear(design: &[f64], cols: usize, target: &[f64], lambda: f64, cfg: &L1Config) -> Result<L1Solution> {
    let sys = GramSystem::from_rows(design, cols, target)?;
    solve_l1_gram(&sys, lambda, cfg)
}

pub fn solve_l1_gram(sys: &GramSystem, lambda: f64, cfg: &L1Config) -> Result<L1Solution> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("L1 weight must be non-negative, got {lambda}")));
    }
    let p = sys.cols();
    if lambda == 0.0 {
        if let Some(j) = (0..p).find(|&j| sys.gram[(j, j)] == 0.0) {
            return Err(Error::RankDeficient(format!(
                "column {j} is identically zero and there is no L1 penalty"
            )));
        }
    }
    let lipschitz = SymmetricEigen::new(sys.gram.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    if lipschitz <= 0.0 {
        // all-zero design: the penalty alone decides
        let q = DVector::zeros(p);
        let objective = sys.objective(&q, lambda);
        return Ok(L1Solution {
            coefficients: q.as_slice().to_vec(),
            objective,
            iterations: 0,
            converged: true,
            history: vec![objective],
        });
    }
    let step = 1.0 / lipschitz;
    let prox_step = |y: &DVector<f64>| -> DVector<f64> {
        let grad = &sys.gram * y - &sys.atb;
        let mut z = y - grad * step;
        z.iter_mut().for_each(|v| *v = soft_threshold(*v, lambda * step));
        z
    };

    let mut q = DVector::<f64>::zeros(p);
    let mut q_prev = q.clone();
    let mut f_q = sys.objective(&q, lambda);
    let mut momentum = 1.0f64;
    let mut history = vec![f_q];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let y = &q + (&q - &q_prev) * ((momentum - 1.0) / next_momentum);
        let mut candidate = prox_step(&y);
        let mut f_c = sys.objective(&candidate, lambda);
        if f_c > f_q {
            // restart: a plain proximal step from the current iterate is a
            // descent step, so any increase it shows is rounding in the
            // objective evaluation
            momentum = 1.0;
            candidate = prox_step(&q);
            f_c = sys.objective(&candidate, lambda);
        } else {
            momentum = next_momentum;
        }
        let change = (&candidate - &q).amax();
        q_prev = std::mem::replace(&mut q, candidate);
        f_q = f_c;
        history.push(f_q);
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(L1Solution {
        coefficients: q.as_slice().to_vec(),
        objective: f_q,
        iterations,
        converged,
        history,
    })
}
