use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::half_mse;
use super::CoordinateFrame;
use crate::error::{Error, Result};
use crate::features::{Column, DesignMatrix};
use crate::net::Mlp;
use crate::optim::{minimize_quasi_newton, FnObjective, QuasiNewtonConfig, Termination};
use crate::transforms::CoordinateTransform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorFitConfig {
    /// Hidden-layer widths; empty gives an affine model.
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub optimizer: QuasiNewtonConfig,
    #[serde(default)]
    pub seed: u64,
    /// Train on a seeded random subset of at most this many rows.
    #[serde(default)]
    pub max_rows: Option<usize>,
}

impl Default for OperatorFitConfig {
    fn default() -> Self {
        OperatorFitConfig {
            hidden: vec![5],
            optimizer: QuasiNewtonConfig::default(),
            seed: 0,
            max_rows: None,
        }
    }
}

/// `û_t ≈ net(library columns)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNet {
    pub network: Mlp,
    pub columns: Vec<Column>,
    pub input_names: Vec<String>,
    pub target_name: String,
    pub frame: CoordinateFrame,
    #[serde(default)]
    pub transform: Option<CoordinateTransform>,
    pub n_space: usize,
    /// `½ mean (û_t − net)²` over all rows of the fitting design.
    pub residual_loss: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl OperatorNet {
    fn check_design(&self, design: &DesignMatrix) -> Result<()> {
        if design.columns != self.columns {
            return Err(Error::Config(
                "design matrix columns do not match the operator network inputs".into(),
            ));
        }
        Ok(())
    }

    pub fn predict(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        self.check_design(design)?;
        self.network.forward_batch(&design.values)
    }

    pub fn residual(&self, design: &DesignMatrix) -> Result<f64> {
        Ok(half_mse(&design.target, &self.predict(design)?))
    }

    /// Right-hand side at one row of feature values.
    pub fn eval(&self, features: &[f64]) -> Result<f64> {
        Ok(self.network.forward(features)?[0])
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Folds input standardization `z = (x − μ)/s` and output scaling
/// `y = s_y · g + μ_y` into the weights of `net`.
fn fold_scaling(net: &Mlp, mu: &[f64], s: &[f64], mu_y: f64, s_y: f64) -> Result<Mlp> {
    let dims = net.layer_dims().to_vec();
    let layers = net.n_layers();
    let mut weights: Vec<Vec<f64>> = (0..layers).map(|l| net.weights(l).to_vec()).collect();
    let mut biases: Vec<Vec<f64>> = (0..layers).map(|l| net.biases(l).to_vec()).collect();
    let n_in = dims[0];
    for o in 0..dims[1] {
        let row = &mut weights[0][o * n_in..(o + 1) * n_in];
        let mut shift = 0.0;
        for j in 0..n_in {
            row[j] /= s[j];
            shift += row[j] * mu[j];
        }
        biases[0][o] -= shift;
    }
    let last = layers - 1;
    weights[last].iter_mut().for_each(|w| *w *= s_y);
    biases[last].iter_mut().for_each(|b| *b = *b * s_y + mu_y);
    let mut out = Mlp::from_parts(&dims, weights, biases)?;
    out.set_seed(net.seed());
    Ok(out)
}

/// Trains `û_t ≈ net(columns)` by quasi-Newton minimization of the
/// half mean-square residual. Inputs and target are standardized during
/// training; the returned network acts on raw column values.
pub fn fit_operator_net(design: &DesignMatrix, cfg: &OperatorFitConfig) -> Result<OperatorNet> {
    let p = design.cols();
    if p == 0 || design.rows() == 0 {
        return Err(Error::Config("operator network needs a non-empty design".into()));
    }
    let rows: Vec<usize> = match cfg.max_rows {
        Some(cap) if cap == 0 => return Err(Error::Config("max_rows must be positive".into())),
        Some(cap) if cap < design.rows() => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6f70_6e65_74);
            let mut idx = sample(&mut rng, design.rows(), cap).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..design.rows()).collect(),
    };
    let n = rows.len();
    let mut mu = vec![0.0; p];
    let mut s = vec![1.0; p];
    for j in 0..p {
        let (m, sd) = mean_std(rows.iter().map(|&r| design.get(r, j)));
        mu[j] = m;
        s[j] = if sd > 0.0 { sd } else { 1.0 };
        if sd == 0.0 {
            // a constant input carries no information beyond the bias
            mu[j] = 0.0;
        }
    }
    let (mu_y, sd_y) = mean_std(rows.iter().map(|&r| design.target[r]));
    let s_y = if sd_y > 0.0 { sd_y } else { 1.0 };

    let mut z = Vec::with_capacity(n * p);
    for &r in &rows {
        z.extend(design.row(r).iter().enumerate().map(|(j, v)| (v - mu[j]) / s[j]));
    }
    let y: Vec<f64> = rows.iter().map(|&r| (design.target[r] - mu_y) / s_y).collect();

    let mut dims = vec![p];
    dims.extend(&cfg.hidden);
    dims.push(1);
    let init = Mlp::new_seeded(&dims, cfg.seed)?;
    let inv_n = 1.0 / n as f64;
    let objective = FnObjective::new(init.n_params(), |params: &[f64]| {
        let net = init.with_params(params)?;
        net.value_and_gradient(&z, |r, out, adj| {
            let e = out[0] - y[r];
            adj[0] = e * inv_n;
            0.5 * e * e * inv_n
        })
    });
    let report = minimize_quasi_newton(&objective, &init.params(), &cfg.optimizer)?;
    if report.termination != Termination::Tolerance {
        log::warn!(
            "operator network training stopped by {:?} after {} iterations (gradient norm {:.3e})",
            report.termination,
            report.iterations,
            report.grad_norm
        );
    }
    let trained = init.with_params(&report.params)?;
    let network = fold_scaling(&trained, &mu, &s, mu_y, s_y)?;
    let mut op = OperatorNet {
        network,
        columns: design.columns.clone(),
        input_names: design.names.clone(),
        target_name: design.target_name.clone(),
        frame: CoordinateFrame::Physical,
        transform: None,
        n_space: design.n_space,
        residual_loss: 0.0,
        iterations: report.iterations,
        termination: report.termination,
    };
    op.residual_loss = op.residual(design)?;
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folded_network_matches_scaled_evaluation() {
        let net = Mlp::new_seeded(&[2, 3, 1], 4).unwrap();
        let mu = [0.5, -2.0];
        let s = [3.0, 0.25];
        let folded = fold_scaling(&net, &mu, &s, 1.5, 7.0).unwrap();
        let x = [1.2, -1.7];
        let z = [(x[0] - mu[0]) / s[0], (x[1] - mu[1]) / s[1]];
        let want = 7.0 * net.forward(&z).unwrap()[0] + 1.5;
        assert!((folded.forward(&x).unwrap()[0] - want).abs() < 1e-13);
    }
}
