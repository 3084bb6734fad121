use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CoordinateFrame;
use crate::error::{Error, Result};
use crate::features::{Column, DesignMatrix, Term, TermNaming};
use crate::optim::{solve_l1_gram, GramSystem, L1Config};
use crate::transforms::CoordinateTransform;

/// Column count above which least squares switches to conjugate gradients.
const DIRECT_SOLVE_MAX_COLS: usize = 2000;
/// Rows folded into the running triangular factor per step.
const QR_BLOCK_ROWS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Least squares when `alpha_q = 0`, proximal gradient otherwise.
    #[default]
    Auto,
    LeastSquares,
    Proximal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResidualConfig {
    /// L1 weight on the (column-scaled) coefficients.
    pub alpha_q: f64,
    #[serde(default)]
    pub solver: LinearSolver,
    /// Coefficients below this magnitude are zeroed after fitting.
    #[serde(default)]
    pub prune_cutoff: f64,
    #[serde(default)]
    pub l1: L1Config,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        ResidualConfig {
            alpha_q: 0.0,
            solver: LinearSolver::Auto,
            prune_cutoff: 0.0,
            l1: L1Config::default(),
        }
    }
}

/// `û_t ≈ Σ q_i · column_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPdeModel {
    pub columns: Vec<Column>,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub frame: CoordinateFrame,
    #[serde(default)]
    pub transform: Option<CoordinateTransform>,
    /// `½ mean (û_t − prediction)²` on the fitting rows, without penalty.
    /// NaN (JSON `null`) for a model that was never fitted.
    #[serde(deserialize_with = "nan_from_null")]
    pub residual_loss: f64,
    pub target_name: String,
    pub n_space: usize,
    #[serde(default)]
    pub rank_deficient: bool,
}

impl LinearPdeModel {
    /// A model over library terms with given coefficients (no fit).
    pub fn new(terms: Vec<Term>, naming: &TermNaming, coefficients: Vec<f64>, frame: CoordinateFrame, n_space: usize) -> Self {
        let names = terms.iter().map(|t| naming.term_name(t)).collect();
        LinearPdeModel {
            columns: terms.into_iter().map(Column::Term).collect(),
            names,
            coefficients,
            frame,
            transform: None,
            residual_loss: f64::NAN,
            target_name: format!("{}_t", naming.outputs.first().map(String::as_str).unwrap_or("u")),
            n_space,
            rank_deficient: false,
        }
    }

    fn check_design(&self, design: &DesignMatrix) -> Result<()> {
        if design.columns != self.columns {
            return Err(Error::Config(
                "design matrix columns do not match the model's terms".into(),
            ));
        }
        Ok(())
    }

    pub fn predict(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        self.check_design(design)?;
        Ok((0..design.rows())
            .map(|r| design.row(r).iter().zip(&self.coefficients).map(|(a, q)| a * q).sum())
            .collect())
    }

    /// `½ mean (û_t − prediction)²` on `design`.
    pub fn residual(&self, design: &DesignMatrix) -> Result<f64> {
        let pred = self.predict(design)?;
        Ok(half_mse(&design.target, &pred))
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }

    /// True when no column involves a space derivative.
    pub fn is_pointwise(&self) -> bool {
        self.columns.iter().all(|c| match c {
            Column::Term(t) => t.is_pointwise(),
            _ => true,
        })
    }
}

fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

pub(crate) fn half_mse(target: &[f64], pred: &[f64]) -> f64 {
    if target.is_empty() {
        return 0.0;
    }
    0.5 * target.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / target.len() as f64
}

/// Per-column scale used internally: standard deviation, or RMS for a
/// constant column, or 1 for an all-zero column.
pub(crate) fn column_scales(design: &DesignMatrix) -> Vec<f64> {
    (0..design.cols())
        .map(|j| {
            if design.stds[j] > 0.0 {
                design.stds[j]
            } else {
                let rms = (design.means[j] * design.means[j]).sqrt();
                if rms > 0.0 {
                    rms
                } else {
                    1.0
                }
            }
        })
        .collect()
}

/// Upper-triangular factor `R` of the `rows × (p + 1)` matrix whose rows are
/// produced by `fill(row, out)`, built block by block so the full matrix is
/// never materialized. With the target in the last column, least squares on
/// any column subset can be solved from `R` alone.
pub(crate) fn streamed_r_factor(rows: usize, p: usize, fill: impl Fn(usize, &mut [f64])) -> DMatrix<f64> {
    let width = p + 1;
    let mut r_aug = DMatrix::<f64>::zeros(0, width);
    let mut buf = vec![0.0; width];
    let mut start = 0;
    while start < rows {
        let end = (start + QR_BLOCK_ROWS).min(rows);
        let top = r_aug.nrows();
        let mut block = DMatrix::<f64>::zeros(top + (end - start), width);
        block.view_mut((0, 0), (top, width)).copy_from(&r_aug);
        for (i, r) in (start..end).enumerate() {
            fill(r, &mut buf);
            for j in 0..width {
                block[(top + i, j)] = buf[j];
            }
        }
        let r = block.qr().r();
        r_aug = r.rows(0, r.nrows().min(width)).into_owned();
        start = end;
    }
    if r_aug.nrows() < width {
        let mut padded = DMatrix::<f64>::zeros(width, width);
        padded.view_mut((0, 0), (r_aug.nrows(), width)).copy_from(&r_aug);
        r_aug = padded;
    }
    r_aug
}

/// Minimum-norm least squares on the listed columns of an augmented factor.
/// Returns the coefficients and whether the subproblem was rank deficient.
pub(crate) fn solve_from_factor(r_aug: &DMatrix<f64>, cols: &[usize], rows: usize) -> (Vec<f64>, bool) {
    let p = r_aug.ncols() - 1;
    let k = cols.len();
    let sub = DMatrix::from_fn(r_aug.nrows(), k, |i, j| r_aug[(i, cols[j])]);
    let rhs = DVector::from_fn(r_aug.nrows(), |i, _| r_aug[(i, p)]);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * f64::EPSILON * rows.max(k) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let q = svd.solve(&rhs, tol).expect("u and v requested");
    (q.as_slice().to_vec(), rank < k)
}

fn least_squares_scaled(design: &DesignMatrix, scales: &[f64]) -> (Vec<f64>, bool) {
    let p = design.cols();
    let r_aug = streamed_r_factor(design.rows(), p, |r, out| {
        for (j, (a, s)) in design.row(r).iter().zip(scales).enumerate() {
            out[j] = a / s;
        }
        out[p] = design.target[r];
    });
    let cols: Vec<usize> = (0..p).collect();
    solve_from_factor(&r_aug, &cols, design.rows())
}

/// Conjugate gradients on the scaled normal equations, for very wide libraries.
fn least_squares_iterative(design: &DesignMatrix, scales: &[f64]) -> Result<Vec<f64>> {
    let p = design.cols();
    let scaled: Vec<f64> = (0..design.rows())
        .flat_map(|r| design.row(r).iter().zip(scales).map(|(a, s)| a / s).collect::<Vec<_>>())
        .collect();
    let sys = GramSystem::from_rows(&scaled, p, &design.target)?;
    let mut x = DVector::<f64>::zeros(p);
    let mut r = sys.atb.clone();
    let mut d = r.clone();
    let mut rr = r.dot(&r);
    let stop = 1e-28 * sys.atb.dot(&sys.atb).max(f64::MIN_POSITIVE);
    for _ in 0..10 * p {
        if rr <= stop {
            break;
        }
        let gd = &sys.gram * &d;
        let alpha = rr / d.dot(&gd);
        x += &d * alpha;
        r -= gd * alpha;
        let rr_next = r.dot(&r);
        d = &r + &d * (rr_next / rr);
        rr = rr_next;
    }
    Ok(x.as_slice().to_vec())
}

/// Fits `û_t ≈ A q` minimizing the mean-square residual plus `α_q‖q̃‖₁` on
/// internally scaled columns; coefficients are returned unscaled.
pub fn fit_linear_pde(design: &DesignMatrix, cfg: &ResidualConfig) -> Result<LinearPdeModel> {
    if design.rows() == 0 {
        return Err(Error::Config("design matrix has no rows after filtering".into()));
    }
    if design.cols() == 0 {
        return Err(Error::Config("design matrix has no columns".into()));
    }
    if !(cfg.alpha_q >= 0.0) {
        return Err(Error::Config(format!("alpha_q must be non-negative, got {}", cfg.alpha_q)));
    }
    let scales = column_scales(design);
    let use_l1 = match cfg.solver {
        LinearSolver::Auto => cfg.alpha_q > 0.0,
        LinearSolver::LeastSquares => {
            if cfg.alpha_q > 0.0 {
                return Err(Error::Config("least-squares solver cannot apply an L1 penalty".into()));
            }
            false
        }
        LinearSolver::Proximal => true,
    };
    let (scaled_q, rank_deficient) = if use_l1 {
        let p = design.cols();
        let mut scaled = Vec::with_capacity(design.values.len());
        for r in 0..design.rows() {
            scaled.extend(design.row(r).iter().zip(&scales).map(|(a, s)| a / s));
        }
        let sys = GramSystem::from_rows(&scaled, p, &design.target)?;
        let sol = solve_l1_gram(&sys, cfg.alpha_q, &cfg.l1)?;
        if !sol.converged {
            log::warn!("L1 solver stopped after {} iterations without converging", sol.iterations);
        }
        (sol.coefficients, false)
    } else if design.cols() <= DIRECT_SOLVE_MAX_COLS {
        least_squares_scaled(design, &scales)
    } else {
        (least_squares_iterative(design, &scales)?, false)
    };
    if rank_deficient {
        log::warn!("design is rank deficient; returning the minimum-norm solution");
    }
    let coefficients: Vec<f64> = scaled_q.iter().zip(&scales).map(|(q, s)| q / s).collect();
    let mut model = LinearPdeModel {
        columns: design.columns.clone(),
        names: design.names.clone(),
        coefficients,
        frame: CoordinateFrame::Physical,
        transform: None,
        residual_loss: 0.0,
        target_name: design.target_name.clone(),
        n_space: design.n_space,
        rank_deficient,
    };
    model.residual_loss = model.residual(design)?;
    if cfg.prune_cutoff > 0.0 {
        model = prune(&model, design, cfg.prune_cutoff)?;
    }
    Ok(model)
}

/// Zeroes every coefficient with magnitude below `cutoff`; the residual is
/// recomputed on `design` without refitting.
pub fn prune(model: &LinearPdeModel, design: &DesignMatrix, cutoff: f64) -> Result<LinearPdeModel> {
    if !(cutoff >= 0.0) {
        return Err(Error::Config(format!("cutoff must be non-negative, got {cutoff}")));
    }
    let mut out = model.clone();
    for c in out.coefficients.iter_mut() {
        if c.abs() < cutoff {
            *c = 0.0;
        }
    }
    out.residual_loss = out.residual(design)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{enumerate_derivative_terms, enumerate_monomials, Column};

    fn toy_design(values: Vec<f64>, target: Vec<f64>, cols: usize) -> DesignMatrix {
        let naming = TermNaming::new(vec!["x".into()], vec!["u".into()]);
        let d = enumerate_derivative_terms(1, 1, 3).unwrap();
        let terms = enumerate_monomials(&d, 1).unwrap();
        let columns: Vec<Column> = terms.into_iter().take(cols).map(Column::Term).collect();
        let names = columns
            .iter()
            .map(|c| match c {
                Column::Term(t) => naming.term_name(t),
                _ => unreachable!(),
            })
            .collect();
        DesignMatrix::from_parts(columns, names, values, target, 1).unwrap()
    }

    #[test]
    fn exact_two_column_recovery() {
        let mut values = Vec::new();
        let mut target = Vec::new();
        for i in 0..50 {
            let a = (i as f64 * 0.37).sin();
            let b = (i as f64 * 0.11).cos() * 30.0;
            values.extend([a, b]);
            target.push(-1.0 * a + 0.01 * b);
        }
        let dm = toy_design(values, target, 2);
        let m = fit_linear_pde(&dm, &ResidualConfig::default()).unwrap();
        assert!((m.coefficients[0] + 1.0).abs() < 1e-12);
        assert!((m.coefficients[1] - 0.01).abs() < 1e-12);
        assert!(m.residual_loss < 1e-25);
    }

    #[test]
    fn zero_target_with_penalty_is_zero_model() {
        let values: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let dm = toy_design(values, vec![0.0; 30], 2);
        let cfg = ResidualConfig {
            alpha_q: 0.1,
            ..ResidualConfig::default()
        };
        let m = fit_linear_pde(&dm, &cfg).unwrap();
        assert!(m.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn duplicate_columns_flag_rank_deficiency() {
        let mut values = Vec::new();
        let mut target = Vec::new();
        for i in 0..20 {
            let a = i as f64 * 0.1 + 0.3;
            values.extend([a, a]);
            target.push(2.0 * a);
        }
        let dm = toy_design(values, target, 2);
        let m = fit_linear_pde(&dm, &ResidualConfig::default()).unwrap();
        assert!(m.rank_deficient);
        // minimum-norm split
        assert!((m.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn prune_cutoff_zero_is_identity_and_full_prune_gives_half_mean_square() {
        let values: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let target: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).cos()).collect();
        let dm = toy_design(values, target.clone(), 2);
        let m = fit_linear_pde(&dm, &ResidualConfig::default()).unwrap();
        assert_eq!(prune(&m, &dm, 0.0).unwrap(), m);
        let z = prune(&m, &dm, 1e9).unwrap();
        let want = 0.5 * target.iter().map(|v| v * v).sum::<f64>() / 20.0;
        assert!((z.residual_loss - want).abs() < 1e-15);
    }
}
