use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::terms::{enumerate_derivative_terms, enumerate_monomials, DerivativeTerm, LibrarySpec, Term, TermNaming};
use crate::error::{Error, Result};
use crate::net::{JetContext, MultiIndex, Mlp};

/// One column of a design matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Column {
    Bias,
    Term(Term),
    /// Raw coordinate: 0 is `t`, 1.. are space axes.
    Coord(usize),
}

/// Surrogate derivatives at a set of points, computed once and reused by
/// every library built from them.
#[derive(Debug, Clone)]
pub struct DerivativeSamples {
    pub derivatives: Vec<DerivativeTerm>,
    /// rows × derivatives.len(), row-major.
    pub values: Vec<f64>,
    /// rows × n_out time derivatives.
    pub time_derivative: Vec<f64>,
    /// rows × (1 + n_space) coordinates.
    pub coords: Vec<f64>,
    pub n_space: usize,
    pub n_out: usize,
    pub naming: TermNaming,
    /// Points dropped because a jet entry was not finite.
    pub dropped_rows: usize,
}

impl DerivativeSamples {
    /// Evaluates all space derivatives up to `max_order` plus `û_t` at each point.
    pub fn compute(model: &Mlp, points: &[f64], max_order: u32, naming: TermNaming) -> Result<Self> {
        let n_in = model.input_dim();
        if n_in == 0 || naming.space.len() + 1 != n_in {
            return Err(Error::DimensionMismatch {
                context: "surrogate input width (1 + space axes)",
                expected: naming.space.len() + 1,
                got: n_in,
            });
        }
        if naming.outputs.len() != model.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "surrogate output width",
                expected: naming.outputs.len(),
                got: model.output_dim(),
            });
        }
        if points.len() % n_in != 0 {
            return Err(Error::DimensionMismatch {
                context: "points (not a multiple of input width)",
                expected: n_in,
                got: points.len() % n_in,
            });
        }
        let n_space = n_in - 1;
        let n_out = model.output_dim();
        let derivatives = enumerate_derivative_terms(n_space, n_out, max_order)?;
        let ctx = JetContext::new(n_in, max_order.max(1))?;
        let layout = ctx.layout();
        let positions: Vec<usize> = derivatives
            .iter()
            .map(|d| {
                let mut full = vec![0u32];
                full.extend_from_slice(d.index.orders());
                layout.position(&MultiIndex::new(full)).expect("order within layout")
            })
            .collect();
        let t_pos = layout.position(&MultiIndex::unit(n_in, 0)).expect("order ≥ 1");
        let n_d = derivatives.len();

        let per_point: Vec<Option<(Vec<f64>, Vec<f64>)>> = points
            .par_chunks(n_in)
            .map(|p| -> Result<Option<(Vec<f64>, Vec<f64>)>> {
                let table = model.input_jets_with(p, &ctx)?;
                let mut vals = Vec::with_capacity(n_d);
                for (d, &pos) in derivatives.iter().zip(&positions) {
                    vals.push(table.at(d.output, pos));
                }
                let ut: Vec<f64> = (0..n_out).map(|o| table.at(o, t_pos)).collect();
                if vals.iter().chain(&ut).all(|v| v.is_finite()) {
                    Ok(Some((vals, ut)))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;

        let mut values = Vec::with_capacity(per_point.len() * n_d);
        let mut time_derivative = Vec::with_capacity(per_point.len() * n_out);
        let mut coords = Vec::with_capacity(points.len());
        let mut dropped_rows = 0;
        for (p, entry) in points.chunks(n_in).zip(per_point) {
            match entry {
                Some((v, ut)) => {
                    values.extend(v);
                    time_derivative.extend(ut);
                    coords.extend_from_slice(p);
                }
                None => dropped_rows += 1,
            }
        }
        if dropped_rows > 0 {
            log::warn!("{dropped_rows} points dropped: non-finite derivative values");
        }
        Ok(DerivativeSamples {
            derivatives,
            values,
            time_derivative,
            coords,
            n_space,
            n_out,
            naming,
            dropped_rows,
        })
    }

    pub fn rows(&self) -> usize {
        self.coords.len() / (1 + self.n_space)
    }

    pub fn max_order(&self) -> u32 {
        self.derivatives.iter().map(|d| d.order()).max().unwrap_or(0)
    }

    /// Value of one derivative term at one row.
    pub fn derivative(&self, row: usize, which: usize) -> f64 {
        self.values[row * self.derivatives.len() + which]
    }

    /// Rows restricted to the given indices, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> DerivativeSamples {
        let nd = self.derivatives.len();
        let nc = 1 + self.n_space;
        DerivativeSamples {
            derivatives: self.derivatives.clone(),
            values: rows.iter().flat_map(|&r| self.values[r * nd..(r + 1) * nd].iter().copied()).collect(),
            time_derivative: rows
                .iter()
                .flat_map(|&r| self.time_derivative[r * self.n_out..(r + 1) * self.n_out].iter().copied())
                .collect(),
            coords: rows.iter().flat_map(|&r| self.coords[r * nc..(r + 1) * nc].iter().copied()).collect(),
            n_space: self.n_space,
            n_out: self.n_out,
            naming: self.naming.clone(),
            dropped_rows: 0,
        }
    }
}

/// Samples × library-columns matrix with the `û_t` regression target.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub columns: Vec<Column>,
    pub names: Vec<String>,
    /// rows × columns, row-major.
    pub values: Vec<f64>,
    pub target: Vec<f64>,
    pub target_name: String,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub n_space: usize,
    pub dropped_rows: usize,
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.target.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.get(r, col)).collect()
    }

    /// Builds the matrix from user-supplied values; statistics are recomputed.
    pub fn from_parts(
        columns: Vec<Column>,
        names: Vec<String>,
        values: Vec<f64>,
        target: Vec<f64>,
        n_space: usize,
    ) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                context: "column names",
                expected: columns.len(),
                got: names.len(),
            });
        }
        if values.len() != target.len() * columns.len() {
            return Err(Error::DimensionMismatch {
                context: "design values",
                expected: target.len() * columns.len(),
                got: values.len(),
            });
        }
        let mut m = DesignMatrix {
            columns,
            names,
            values,
            target,
            target_name: "u_t".to_string(),
            means: Vec::new(),
            stds: Vec::new(),
            n_space,
            dropped_rows: 0,
        };
        m.refresh_statistics();
        Ok(m)
    }

    fn refresh_statistics(&mut self) {
        let (means, stds) = column_statistics(&self.values, self.rows(), self.cols());
        self.means = means;
        self.stds = stds;
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> DesignMatrix {
        let c = self.cols();
        let values = (0..self.rows())
            .flat_map(|r| keep.iter().map(move |&j| self.values[r * c + j]))
            .collect();
        DesignMatrix {
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            values,
            target: self.target.clone(),
            target_name: self.target_name.clone(),
            means: keep.iter().map(|&j| self.means[j]).collect(),
            stds: keep.iter().map(|&j| self.stds[j]).collect(),
            n_space: self.n_space,
            dropped_rows: self.dropped_rows,
        }
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let c = self.cols();
        let mut m = DesignMatrix {
            columns: self.columns.clone(),
            names: self.names.clone(),
            values: rows.iter().flat_map(|&r| self.values[r * c..(r + 1) * c].iter().copied()).collect(),
            target: rows.iter().map(|&r| self.target[r]).collect(),
            target_name: self.target_name.clone(),
            means: Vec::new(),
            stds: Vec::new(),
            n_space: self.n_space,
            dropped_rows: self.dropped_rows,
        };
        m.refresh_statistics();
        m
    }

    /// Index of the term column with the given canonical name.
    pub fn find(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Writes the matrix as CSV: term names then the target, one row per sample.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header = self.names.clone();
        header.push(self.target_name.clone());
        writeln!(w, "{}", header.join(","))?;
        for r in 0..self.rows() {
            let mut line = String::new();
            for v in self.row(r).iter().chain(std::iter::once(&self.target[r])) {
                if !line.is_empty() {
                    line.push(',');
                }
                line.push_str(&format!("{v:.17e}"));
            }
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn column_statistics(values: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut means = vec![0.0; cols];
    let mut vars = vec![0.0; cols];
    if rows == 0 {
        return (means, vars);
    }
    for r in 0..rows {
        for (j, m) in means.iter_mut().enumerate() {
            *m += values[r * cols + j];
        }
    }
    means.iter_mut().for_each(|m| *m /= rows as f64);
    for r in 0..rows {
        for (j, v) in vars.iter_mut().enumerate() {
            let d = values[r * cols + j] - means[j];
            *v += d * d;
        }
    }
    let stds = vars.iter().map(|v| (v / rows as f64).sqrt()).collect();
    (means, stds)
}

/// Evaluates a monomial from the derivative values of one row.
#[cfg(test)]
pub(crate) fn eval_term(term: &Term, derivatives: &[DerivativeTerm], row_values: &[f64]) -> f64 {
    term.factors
        .iter()
        .map(|(d, e)| {
            let pos = derivatives.iter().position(|x| x == d).expect("factor in derivative list");
            row_values[pos].powi(*e as i32)
        })
        .product()
}

/// Builds a design matrix for `spec` from precomputed derivative samples.
pub fn design_from_samples(samples: &DerivativeSamples, spec: &LibrarySpec, target_output: usize) -> Result<DesignMatrix> {
    spec.validate()?;
    if spec.n_space != samples.n_space || spec.n_out != samples.n_out {
        return Err(Error::Config(format!(
            "library shape (N={}, M={}) does not match samples (N={}, M={})",
            spec.n_space, spec.n_out, samples.n_space, samples.n_out
        )));
    }
    if spec.max_order > samples.max_order() {
        return Err(Error::Config(format!(
            "library order {} exceeds computed derivative order {}",
            spec.max_order,
            samples.max_order()
        )));
    }
    if target_output >= samples.n_out {
        return Err(Error::Config(format!("target output {target_output} out of range")));
    }
    let derivatives = enumerate_derivative_terms(spec.n_space, spec.n_out, spec.max_order)?;
    let terms = enumerate_monomials(&derivatives, spec.max_degree)?;
    let mut columns: Vec<Column> = Vec::new();
    if spec.include_bias {
        columns.push(Column::Bias);
    }
    columns.extend(terms.iter().cloned().map(Column::Term));
    if spec.include_coords {
        columns.extend((0..=spec.n_space).map(Column::Coord));
    }
    let names = columns
        .iter()
        .map(|c| match c {
            Column::Bias => "1".to_string(),
            Column::Term(t) => samples.naming.term_name(t),
            Column::Coord(0) => "t".to_string(),
            Column::Coord(i) => samples.naming.space[i - 1].clone(),
        })
        .collect();

    // factor positions resolved once against the full sample list
    let factor_pos: Vec<Vec<(usize, i32)>> = terms
        .iter()
        .map(|t| {
            t.factors
                .iter()
                .map(|(d, e)| {
                    (
                        samples.derivatives.iter().position(|x| x == d).expect("factor computed"),
                        *e as i32,
                    )
                })
                .collect()
        })
        .collect();
    let rows = samples.rows();
    let cols = columns.len();
    let nd = samples.derivatives.len();
    let nc = 1 + samples.n_space;
    let mut values = vec![0.0; rows * cols];
    values.par_chunks_mut(cols).enumerate().for_each(|(r, out)| {
        let dv = &samples.values[r * nd..(r + 1) * nd];
        let mut j = 0;
        if spec.include_bias {
            out[0] = 1.0;
            j = 1;
        }
        for fp in &factor_pos {
            out[j] = fp.iter().map(|&(p, e)| if e == 1 { dv[p] } else { dv[p].powi(e) }).product();
            j += 1;
        }
        if spec.include_coords {
            out[j..].copy_from_slice(&samples.coords[r * nc..(r + 1) * nc]);
        }
    });
    let target: Vec<f64> = (0..rows)
        .map(|r| samples.time_derivative[r * samples.n_out + target_output])
        .collect();
    let mut m = DesignMatrix {
        columns,
        names,
        values,
        target,
        target_name: format!("{}_t", samples.naming.outputs[target_output]),
        means: Vec::new(),
        stds: Vec::new(),
        n_space: samples.n_space,
        dropped_rows: samples.dropped_rows,
    };
    m.refresh_statistics();
    Ok(m)
}

/// Evaluates the library of `spec` on a surrogate at the given points.
pub fn build_design_matrix(model: &Mlp, points: &[f64], spec: &LibrarySpec, naming: TermNaming) -> Result<DesignMatrix> {
    spec.validate()?;
    if model.input_dim() != spec.n_space + 1 {
        return Err(Error::DimensionMismatch {
            context: "surrogate input width (1 + N)",
            expected: spec.n_space + 1,
            got: model.input_dim(),
        });
    }
    let samples = DerivativeSamples::compute(model, points, spec.max_order, naming)?;
    design_from_samples(&samples, spec, 0)
}
