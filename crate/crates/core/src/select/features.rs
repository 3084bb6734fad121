use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discover::{solve_from_factor, streamed_r_factor};
use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::optim::{solve_l1_gram, GramSystem, L1Config};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureReportConfig {
    /// Number of subsampled L1 fits.
    pub subsamples: usize,
    pub fraction: f64,
    /// Column weights are drawn uniformly from `[jitter_min, 1]`.
    pub jitter_min: f64,
    /// L1 weight as a fraction of the smallest weight that zeroes every coefficient.
    pub alpha_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub l1: L1Config,
}

impl Default for FeatureReportConfig {
    fn default() -> Self {
        FeatureReportConfig {
            subsamples: 100,
            fraction: 0.5,
            jitter_min: 0.2,
            alpha_fraction: 0.1,
            seed: 0,
            l1: L1Config {
                max_iter: 20_000,
                tol: 1e-10,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub names: Vec<String>,
    /// Population variance of each raw column.
    pub variance: Vec<f64>,
    /// Selection frequency across the randomized L1 fits, in `[0, 1]`.
    pub stability: Vec<f64>,
    /// Recursive-elimination rank, 1 = eliminated last.
    pub rfe_rank: Vec<usize>,
}

impl FeatureReport {
    pub fn get(&self, name: &str) -> Option<(f64, f64, usize)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.variance[i], self.stability[i], self.rfe_rank[i]))
    }

    /// One line per term: `term,variance,stability,rfe_rank`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "term,variance,stability,rfe_rank")?;
        for i in 0..self.names.len() {
            writeln!(
                w,
                "{},{:.17e},{:.4},{}",
                self.names[i], self.variance[i], self.stability[i], self.rfe_rank[i]
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean_std(design: &DesignMatrix, rows: &[usize], col: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| design.get(r, col)).sum::<f64>() / n;
    let var = rows.iter().map(|&r| (design.get(r, col) - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Stability selection: fraction of randomized L1 fits selecting each column.
fn stability_scores(design: &DesignMatrix, cfg: &FeatureReportConfig) -> Result<Vec<f64>> {
    let p = design.cols();
    let n = design.rows();
    let take = ((cfg.fraction * n as f64).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = vec![0usize; p];
    for _ in 0..cfg.subsamples {
        let mut rows = sample(&mut rng, n, take).into_vec();
        rows.sort_unstable();
        let weights: Vec<f64> = (0..p).map(|_| rng.gen_range(cfg.jitter_min..=1.0)).collect();
        let stats: Vec<(f64, f64)> = (0..p).map(|j| mean_std(design, &rows, j)).collect();
        let t_mean = rows.iter().map(|&r| design.target[r]).sum::<f64>() / take as f64;
        let mut z = Vec::with_capacity(take * p);
        for &r in &rows {
            for j in 0..p {
                let (m, s) = stats[j];
                z.push(if s > 0.0 { weights[j] * (design.get(r, j) - m) / s } else { 0.0 });
            }
        }
        let b: Vec<f64> = rows.iter().map(|&r| design.target[r] - t_mean).collect();
        let sys = GramSystem::from_rows(&z, p, &b)?;
        let lambda_max = sys.atb.amax();
        if lambda_max == 0.0 {
            continue;
        }
        let sol = solve_l1_gram(&sys, cfg.alpha_fraction * lambda_max, &cfg.l1)?;
        for (c, q) in counts.iter_mut().zip(&sol.coefficients) {
            if *q != 0.0 {
                *c += 1;
            }
        }
    }
    Ok(counts.iter().map(|&c| c as f64 / cfg.subsamples as f64).collect())
}

/// Recursive elimination on standardized columns: refit least squares, drop
/// the smallest |coefficient| (later canonical position on ties), repeat.
fn rfe_ranks(design: &DesignMatrix) -> Vec<usize> {
    let p = design.cols();
    let n = design.rows();
    let all: Vec<usize> = (0..n).collect();
    let stats: Vec<(f64, f64)> = (0..p).map(|j| mean_std(design, &all, j)).collect();
    let t_mean = design.target.iter().sum::<f64>() / n as f64;
    let r_aug = streamed_r_factor(n, p, |r, out| {
        let row = design.row(r);
        for j in 0..p {
            let (m, s) = stats[j];
            out[j] = if s > 0.0 { (row[j] - m) / s } else { 0.0 };
        }
        out[p] = design.target[r] - t_mean;
    });
    let mut active: Vec<usize> = (0..p).collect();
    let mut rank = vec![0; p];
    while !active.is_empty() {
        let (q, _) = solve_from_factor(&r_aug, &active, n);
        let mut drop = 0;
        for i in 1..active.len() {
            if q[i].abs() <= q[drop].abs() {
                drop = i;
            }
        }
        rank[active[drop]] = active.len();
        active.remove(drop);
    }
    rank
}

/// Variance, stability score and elimination rank of every design column.
pub fn feature_report(design: &DesignMatrix, cfg: &FeatureReportConfig) -> Result<FeatureReport> {
    if design.cols() < 2 {
        return Err(Error::Config("feature report needs at least two columns".into()));
    }
    if design.rows() < 2 {
        return Err(Error::Config("feature report needs at least two rows".into()));
    }
    if cfg.subsamples == 0 || !(cfg.fraction > 0.0 && cfg.fraction <= 1.0) {
        return Err(Error::Config("stability selection needs subsamples > 0 and fraction in (0, 1]".into()));
    }
    if !(0.0 < cfg.jitter_min && cfg.jitter_min <= 1.0) || !(cfg.alpha_fraction > 0.0 && cfg.alpha_fraction < 1.0) {
        return Err(Error::Config("jitter_min must lie in (0, 1] and alpha_fraction in (0, 1)".into()));
    }
    Ok(FeatureReport {
        names: design.names.clone(),
        variance: design.stds.iter().map(|s| s * s).collect(),
        stability: stability_scores(design, cfg)?,
        rfe_rank: rfe_ranks(design),
    })
}
