use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::line_search::strong_wolfe;
use super::Objective;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuasiNewtonConfig {
    /// 0 selects dense BFGS; a positive value is the L-BFGS history length.
    pub memory: usize,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search: usize,
    pub max_step: f64,
    /// Keep per-iteration records in the report.
    #[serde(default)]
    pub record_steps: bool,
}

impl Default for QuasiNewtonConfig {
    fn default() -> Self {
        QuasiNewtonConfig {
            memory: 0,
            grad_tol: 1e-8,
            max_iter: 5000,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search: 40,
            max_step: 1e10,
            record_steps: false,
        }
    }
}

impl QuasiNewtonConfig {
    pub fn lbfgs(memory: usize) -> Self {
        QuasiNewtonConfig {
            memory,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::Config(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if self.max_line_search == 0 {
            return Err(Error::Config("line search needs at least one evaluation".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxIterations,
    LineSearchFailure,
}

/// One accepted step, with the quantities needed to audit the Wolfe conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub alpha: f64,
    pub f_before: f64,
    pub f_after: f64,
    pub slope_before: f64,
    pub slope_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub params: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<StepRecord>,
}

enum Curvature {
    Dense(Vec<f64>),
    Limited(VecDeque<(Vec<f64>, Vec<f64>, f64)>),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Curvature {
    fn new(memory: usize, n: usize) -> Self {
        if memory == 0 {
            let mut h = vec![0.0; n * n];
            (0..n).for_each(|i| h[i * n + i] = 1.0);
            Curvature::Dense(h)
        } else {
            Curvature::Limited(VecDeque::with_capacity(memory))
        }
    }

    fn reset(&mut self, n: usize) {
        match self {
            Curvature::Dense(h) => {
                h.iter_mut().for_each(|v| *v = 0.0);
                (0..n).for_each(|i| h[i * n + i] = 1.0);
            }
            Curvature::Limited(hist) => hist.clear(),
        }
    }

    fn is_fresh(&self, n: usize) -> bool {
        match self {
            Curvature::Dense(h) => (0..n).all(|i| (0..n).all(|j| h[i * n + j] == if i == j { 1.0 } else { 0.0 })),
            Curvature::Limited(hist) => hist.is_empty(),
        }
    }

    /// Search direction `−H g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let n = g.len();
        match self {
            Curvature::Dense(h) => (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], g)).collect(),
            Curvature::Limited(hist) => {
                let mut q = g.to_vec();
                let mut alphas = Vec::with_capacity(hist.len());
                for (s, y, rho) in hist.iter().rev() {
                    let a = rho * dot(s, &q);
                    q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
                    alphas.push(a);
                }
                if let Some((s, y, _)) = hist.back() {
                    let gamma = dot(s, y) / dot(y, y);
                    q.iter_mut().for_each(|v| *v *= gamma);
                }
                for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
                    let b = rho * dot(y, &q);
                    q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
                }
                q.iter_mut().for_each(|v| *v = -*v);
                q
            }
        }
    }

    fn update(&mut self, s: Vec<f64>, y: Vec<f64>, memory: usize) {
        let sy = dot(&s, &y);
        if sy <= 1e-12 * norm(&s) * norm(&y) || sy <= 0.0 {
            return;
        }
        let rho = 1.0 / sy;
        match self {
            Curvature::Dense(h) => {
                let n = s.len();
                let fresh = (0..n).all(|i| (0..n).all(|j| h[i * n + j] == if i == j { 1.0 } else { 0.0 }));
                if fresh {
                    // initial scaling yᵀs / yᵀy
                    let gamma = sy / dot(&y, &y);
                    (0..n).for_each(|i| h[i * n + i] = gamma);
                }
                // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
                let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
                let yhy = dot(&y, &hy);
                let coef = (1.0 + rho * yhy) * rho;
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                    }
                }
            }
            Curvature::Limited(hist) => {
                if hist.len() == memory {
                    hist.pop_front();
                }
                hist.push_back((s, y, rho));
            }
        }
    }
}

/// Minimizes `obj` from `init` by BFGS (memory 0) or L-BFGS with a strong
/// Wolfe line search.
pub fn minimize_quasi_newton<O: Objective + ?Sized>(obj: &O, init: &[f64], cfg: &QuasiNewtonConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let n = obj.dim();
    if init.len() != n {
        return Err(Error::DimensionMismatch {
            context: "initial parameters",
            expected: n,
            got: init.len(),
        });
    }
    let mut x = init.to_vec();
    let (mut f, mut g) = obj.value_and_gradient(&x)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Optimizer {
            iteration: 0,
            reason: format!("non-finite objective at the initial iterate {x:?}"),
        });
    }
    let mut evaluations = 1;
    let mut curvature = Curvature::new(cfg.memory, n);
    let mut steps = Vec::new();
    let mut iterations = 0;
    let termination = loop {
        if norm(&g) <= cfg.grad_tol {
            break Termination::Tolerance;
        }
        if iterations >= cfg.max_iter {
            break Termination::MaxIterations;
        }
        let mut dir = curvature.direction(&g);
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            curvature.reset(n);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }
        let alpha0 = if curvature.is_fresh(n) {
            (1.0 / norm(&g)).min(1.0)
        } else {
            1.0
        };
        let mut found = strong_wolfe(obj, &x, f, &g, &dir, alpha0, cfg, iterations)?;
        if found.is_none() && !curvature.is_fresh(n) {
            // retry along steepest descent with a fresh curvature model
            evaluations += cfg.max_line_search;
            curvature.reset(n);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
            found = strong_wolfe(obj, &x, f, &g, &dir, (1.0 / norm(&g)).min(1.0), cfg, iterations)?;
        }
        let Some(trial) = found else {
            break Termination::LineSearchFailure;
        };
        evaluations += trial.evaluations;
        if cfg.record_steps {
            steps.push(StepRecord {
                alpha: trial.alpha,
                f_before: f,
                f_after: trial.f,
                slope_before: slope,
                slope_after: dot(&trial.g, &dir),
            });
        }
        let s: Vec<f64> = trial.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        curvature.update(s, y, cfg.memory);
        x = trial.x;
        f = trial.f;
        g = trial.g;
        iterations += 1;
    };
    Ok(SolveReport {
        grad_norm: norm(&g),
        params: x,
        loss: f,
        iterations,
        evaluations,
        termination,
        steps,
    })
}
