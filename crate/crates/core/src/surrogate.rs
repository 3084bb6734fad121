//! Stage one: fit a tanh network `û(t, x)` to the samples by minimizing
//! `½ mean ‖u − û‖² + α_p/2 ‖p‖²` with a full-batch quasi-Newton method.

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::net::{JetTable, Mlp};
use crate::optim::{minimize_quasi_newton, FnObjective, QuasiNewtonConfig, Termination};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateFitConfig {
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub alpha_p: f64,
    #[serde(default)]
    pub optimizer: QuasiNewtonConfig,
    #[serde(default)]
    pub seed: u64,
    /// Fraction of rows held out for validation, in `[0, 0.5]`.
    #[serde(default = "default_validation")]
    pub validation_fraction: f64,
    /// Train on a seeded random subset of at most this many training rows.
    #[serde(default = "default_train_rows")]
    pub max_train_rows: Option<usize>,
}

/// Default cap on training rows; keeps full-batch BFGS on the Burgers data
/// within a few minutes on one core.
pub const DEFAULT_TRAIN_ROWS: usize = 30_000;

fn default_train_rows() -> Option<usize> {
    Some(DEFAULT_TRAIN_ROWS)
}

fn default_validation() -> f64 {
    0.1
}

impl Default for SurrogateFitConfig {
    fn default() -> Self {
        SurrogateFitConfig {
            hidden: vec![10; 5],
            alpha_p: 0.0,
            optimizer: QuasiNewtonConfig::default(),
            seed: 0,
            validation_fraction: default_validation(),
            max_train_rows: Some(DEFAULT_TRAIN_ROWS),
        }
    }
}

impl SurrogateFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!("hidden widths must be positive, got {:?}", self.hidden)));
        }
        if !(self.alpha_p >= 0.0) {
            return Err(Error::Config(format!("alpha_p must be non-negative, got {}", self.alpha_p)));
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation fraction must lie in [0, 0.5], got {}",
                self.validation_fraction
            )));
        }
        if self.max_train_rows == Some(0) {
            return Err(Error::Config("max_train_rows must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    /// `½ mean ‖u − û‖²` over the training rows.
    pub data_loss: f64,
    /// `data_loss + α_p/2 ‖p‖²`.
    pub objective: f64,
    /// Mean square error per output component, training rows.
    pub train_mse: f64,
    /// Mean square error per output component, held-out rows (NaN if none).
    pub validation_mse: f64,
    pub train_rows: usize,
    pub validation_rows: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub termination: Termination,
}

/// Splits row indices into (training, validation) with a seeded draw.
fn split_rows(n: usize, cfg: &SurrogateFitConfig) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_val = (cfg.validation_fraction * n as f64).round() as usize;
    let n_val = n_val.min(n.saturating_sub(1));
    let mut is_val = vec![false; n];
    for i in sample(&mut rng, n, n_val) {
        is_val[i] = true;
    }
    let mut train: Vec<usize> = (0..n).filter(|&i| !is_val[i]).collect();
    let val: Vec<usize> = (0..n).filter(|&i| is_val[i]).collect();
    if let Some(cap) = cfg.max_train_rows {
        if cap < train.len() {
            let mut keep: Vec<usize> = sample(&mut rng, train.len(), cap).into_iter().map(|k| train[k]).collect();
            keep.sort_unstable();
            train = keep;
        }
    }
    (train, val)
}

fn gather(data: &Dataset, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n_in = data.input_width();
    let mut x = Vec::with_capacity(rows.len() * n_in);
    let mut y = Vec::with_capacity(rows.len() * data.n_out());
    for &r in rows {
        let row = data.row(r);
        x.extend_from_slice(&row[..n_in]);
        y.extend_from_slice(&row[n_in..]);
    }
    (x, y)
}

fn mse(net: &Mlp, x: &[f64], y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Ok(f64::NAN);
    }
    let pred = net.forward_batch(x)?;
    Ok(pred.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// Trains the surrogate. Deterministic for a given seed.
pub fn fit_surrogate(data: &Dataset, cfg: &SurrogateFitConfig) -> Result<(Mlp, SurrogateReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("cannot fit a surrogate to an empty dataset".into()));
    }
    let (train, val) = split_rows(data.len(), cfg);
    let (x, y) = gather(data, &train);
    let (xv, yv) = gather(data, &val);
    let n_out = data.n_out();

    let mut dims = vec![data.input_width()];
    dims.extend(&cfg.hidden);
    dims.push(n_out);
    let init = Mlp::new_seeded(&dims, cfg.seed)?;
    let inv_n = 1.0 / train.len() as f64;
    let alpha = cfg.alpha_p;
    let objective = FnObjective::new(init.n_params(), |p: &[f64]| {
        let net = init.with_params(p)?;
        let (mut loss, mut grad) = net.value_and_gradient(&x, |r, out, adj| {
            let target = &y[r * n_out..(r + 1) * n_out];
            let mut l = 0.0;
            for o in 0..n_out {
                let e = out[o] - target[o];
                adj[o] = e * inv_n;
                l += 0.5 * e * e * inv_n;
            }
            l
        })?;
        if alpha > 0.0 {
            loss += 0.5 * alpha * p.iter().map(|v| v * v).sum::<f64>();
            grad.iter_mut().zip(p).for_each(|(g, v)| *g += alpha * v);
        }
        Ok((loss, grad))
    });
    let report = minimize_quasi_newton(&objective, &init.params(), &cfg.optimizer)?;
    if report.termination != Termination::Tolerance {
        log::warn!(
            "surrogate training stopped by {:?} after {} iterations (gradient norm {:.3e})",
            report.termination,
            report.iterations,
            report.grad_norm
        );
    }
    let net = init.with_params(&report.params)?;
    let train_mse = mse(&net, &x, &y)?;
    let penalty = 0.5 * alpha * report.params.iter().map(|v| v * v).sum::<f64>();
    let out = SurrogateReport {
        data_loss: report.loss - penalty,
        objective: report.loss,
        train_mse,
        validation_mse: mse(&net, &xv, &yv)?,
        train_rows: train.len(),
        validation_rows: val.len(),
        iterations: report.iterations,
        evaluations: report.evaluations,
        grad_norm: report.grad_norm,
        termination: report.termination,
    };
    Ok((net, out))
}

/// Values and all partials up to `order` at each point; `û_t` is the entry
/// with unit order on axis 0 (present when `order ≥ 1`).
pub fn predict_with_derivatives(model: &Mlp, points: &[f64], order: u32) -> Result<Vec<JetTable>> {
    model.jets_batch(points, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_dataset(f: impl Fn(f64, f64) -> f64) -> Dataset {
        let mut rows = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                let (t, x) = (i as f64 / 11.0, j as f64 / 11.0);
                rows.extend([t, x, f(t, x)]);
            }
        }
        Dataset::with_default_names(1, 1, rows).unwrap()
    }

    fn small_cfg() -> SurrogateFitConfig {
        SurrogateFitConfig {
            hidden: vec![5],
            validation_fraction: 0.0,
            seed: 3,
            optimizer: QuasiNewtonConfig {
                grad_tol: 1e-13,
                ..QuasiNewtonConfig::default()
            },
            ..SurrogateFitConfig::default()
        }
    }

    #[test]
    fn linear_target_is_learned() {
        let data = grid_dataset(|_, x| x);
        let (net, rep) = fit_surrogate(&data, &small_cfg()).unwrap();
        assert!(rep.train_mse <= 1e-6, "{rep:?}");
        let jets = predict_with_derivatives(&net, &[0.4, 0.6], 1).unwrap();
        let ux = jets[0].partial(0, &[1]).unwrap();
        let ut = jets[0].partial(0, &[0]).unwrap();
        assert!((ux - 1.0).abs() <= 1e-3 && ut.abs() <= 1e-3, "{ux} {ut}");
    }

    #[test]
    fn constant_target_is_learned() {
        let data = grid_dataset(|_, _| 0.37);
        let (net, rep) = fit_surrogate(&data, &small_cfg()).unwrap();
        let pred = net.forward_batch(&data.inputs()).unwrap();
        let err = pred.iter().map(|p| (p - 0.37).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err:e} {rep:?}");
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let cfg = SurrogateFitConfig {
            validation_fraction: 0.2,
            max_train_rows: Some(30),
            ..SurrogateFitConfig::default()
        };
        let (a, b) = split_rows(100, &cfg);
        assert_eq!(split_rows(100, &cfg), (a.clone(), b.clone()));
        assert_eq!((a.len(), b.len()), (30, 20));
        assert!(a.iter().all(|i| !b.contains(i)));
    }
}
