use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discover::{fit_linear_pde, fit_operator_net, OperatorFitConfig, ResidualConfig};
use crate::error::{Error, Result};
use crate::features::{design_from_samples, DerivativeSamples, LibrarySpec, TermNaming};
use crate::net::Mlp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// log₁₀ of the residual loss; `None` for a failed cell.
    pub log10_cost: Option<f64>,
    pub residual_loss: f64,
    pub n_columns: usize,
    #[serde(default)]
    pub rank_deficient: bool,
    #[serde(default)]
    pub error: Option<String>,
}

impl GridCell {
    fn failed(err: Error) -> Self {
        GridCell {
            log10_cost: None,
            residual_loss: f64::NAN,
            n_columns: 0,
            rank_deficient: false,
            error: Some(err.to_string()),
        }
    }
}

/// Residual cost over two axes, row-major (`rows × cols`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostGrid {
    pub row_axis: String,
    pub col_axis: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub cells: Vec<GridCell>,
}

impl CostGrid {
    pub fn cell(&self, row: usize, col: usize) -> &GridCell {
        &self.cells[row * self.col_labels.len() + col]
    }

    /// Header `row_axis\col_axis,<col labels>`; one line per row label with
    /// log₁₀ cost per cell (`NaN` for failed cells).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{}\\{},{}", self.row_axis, self.col_axis, self.col_labels.join(","))?;
        for (i, label) in self.row_labels.iter().enumerate() {
            let vals: Vec<String> = (0..self.col_labels.len())
                .map(|j| match self.cell(i, j).log10_cost {
                    Some(v) => format!("{v:.6}"),
                    None => "NaN".to_string(),
                })
                .collect();
            writeln!(w, "{label},{}", vals.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_axes<A, B>(a: &[A], b: &[B]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("grid axes must be non-empty".into()));
    }
    Ok(())
}

/// Linear-model cost for every `(m, k)` from derivative samples computed up
/// to at least `max(m)`.
pub fn grid_search_mk_samples(samples: &DerivativeSamples, m_values: &[u32], k_values: &[u32], cfg: &ResidualConfig) -> Result<CostGrid> {
    check_axes(m_values, k_values)?;
    let mut cells = Vec::with_capacity(m_values.len() * k_values.len());
    for &m in m_values {
        for &k in k_values {
            let spec = LibrarySpec::new(m, k, samples.n_space, samples.n_out);
            let cell = design_from_samples(samples, &spec, 0)
                .and_then(|dm| fit_linear_pde(&dm, cfg))
                .map(|fit| GridCell {
                    log10_cost: Some(fit.residual_loss.log10()),
                    residual_loss: fit.residual_loss,
                    n_columns: fit.coefficients.len(),
                    rank_deficient: fit.rank_deficient,
                    error: None,
                })
                .unwrap_or_else(|e| {
                    log::warn!("grid cell m={m}, k={k} failed: {e}");
                    GridCell::failed(e)
                });
            cells.push(cell);
        }
    }
    Ok(CostGrid {
        row_axis: "m".into(),
        col_axis: "k".into(),
        row_labels: m_values.iter().map(u32::to_string).collect(),
        col_labels: k_values.iter().map(u32::to_string).collect(),
        cells,
    })
}

/// Evaluates the surrogate's jets once and runs [`grid_search_mk_samples`].
pub fn grid_search_mk(
    surrogate: &Mlp,
    points: &[f64],
    naming: TermNaming,
    m_values: &[u32],
    k_values: &[u32],
    cfg: &ResidualConfig,
) -> Result<CostGrid> {
    check_axes(m_values, k_values)?;
    let max_m = *m_values.iter().max().unwrap();
    let samples = DerivativeSamples::compute(surrogate, points, max_m, naming)?;
    grid_search_mk_samples(&samples, m_values, k_values, cfg)
}

fn arch_label(hidden: &[usize]) -> String {
    if hidden.is_empty() {
        "linear".to_string()
    } else {
        hidden.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
    }
}

/// Operator-network cost for every (architecture, m); inputs are the
/// derivative terms up to order m, plus `t, x` when `include_coords` is set.
pub fn grid_search_architecture_samples(
    samples: &DerivativeSamples,
    architectures: &[Vec<usize>],
    m_values: &[u32],
    include_coords: bool,
    cfg: &OperatorFitConfig,
) -> Result<CostGrid> {
    check_axes(architectures, m_values)?;
    let mut cells = Vec::with_capacity(architectures.len() * m_values.len());
    for arch in architectures {
        for &m in m_values {
            let mut spec = LibrarySpec::new(m, 1, samples.n_space, samples.n_out);
            spec.include_coords = include_coords;
            let cell_cfg = OperatorFitConfig {
                hidden: arch.clone(),
                ..cfg.clone()
            };
            let cell = design_from_samples(samples, &spec, 0)
                .and_then(|dm| fit_operator_net(&dm, &cell_cfg))
                .map(|op| GridCell {
                    log10_cost: Some(op.residual_loss.log10()),
                    residual_loss: op.residual_loss,
                    n_columns: op.columns.len(),
                    rank_deficient: false,
                    error: None,
                })
                .unwrap_or_else(|e| {
                    log::warn!("grid cell {}, m={m} failed: {e}", arch_label(arch));
                    GridCell::failed(e)
                });
            cells.push(cell);
        }
    }
    Ok(CostGrid {
        row_axis: "architecture".into(),
        col_axis: "m".into(),
        row_labels: architectures.iter().map(|a| arch_label(a)).collect(),
        col_labels: m_values.iter().map(u32::to_string).collect(),
        cells,
    })
}

pub fn grid_search_architecture(
    surrogate: &Mlp,
    points: &[f64],
    naming: TermNaming,
    architectures: &[Vec<usize>],
    m_values: &[u32],
    include_coords: bool,
    cfg: &OperatorFitConfig,
) -> Result<CostGrid> {
    check_axes(architectures, m_values)?;
    let max_m = *m_values.iter().max().unwrap();
    let samples = DerivativeSamples::compute(surrogate, points, max_m, naming)?;
    grid_search_architecture_samples(&samples, architectures, m_values, include_coords, cfg)
}
