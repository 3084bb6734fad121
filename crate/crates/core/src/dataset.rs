use crate::error::{Error, Result};

/// Unordered samples `(t, x_1..x_N, u_1..u_M)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_space: usize,
    n_out: usize,
    names: Vec<String>,
    rows: Vec<f64>,
}

/// Default axis names: `t`, then `x`, `y`, `z` (or `x1..xN`), then `u`, `v`, `w` (or `u1..uM`).
pub fn default_names(n_space: usize, n_out: usize) -> Vec<String> {
    let mut names = vec!["t".to_string()];
    if n_space <= 3 {
        names.extend(["x", "y", "z"][..n_space].iter().map(|s| s.to_string()));
    } else {
        names.extend((1..=n_space).map(|i| format!("x{i}")));
    }
    if n_out <= 3 {
        names.extend(["u", "v", "w"][..n_out].iter().map(|s| s.to_string()));
    } else {
        names.extend((1..=n_out).map(|i| format!("u{i}")));
    }
    names
}

impl Dataset {
    pub fn new(n_space: usize, n_out: usize, names: Vec<String>, rows: Vec<f64>) -> Result<Self> {
        if n_out == 0 {
            return Err(Error::Config("a dataset needs at least one output column".into()));
        }
        let width = 1 + n_space + n_out;
        if names.len() != width {
            return Err(Error::DimensionMismatch {
                context: "dataset column names",
                expected: width,
                got: names.len(),
            });
        }
        if rows.len() % width != 0 {
            return Err(Error::DimensionMismatch {
                context: "dataset values (not a multiple of row width)",
                expected: width,
                got: rows.len() % width,
            });
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "dataset row {} column {}",
                pos / width,
                names[pos % width]
            )));
        }
        Ok(Dataset {
            n_space,
            n_out,
            names,
            rows,
        })
    }

    pub fn with_default_names(n_space: usize, n_out: usize, rows: Vec<f64>) -> Result<Self> {
        Self::new(n_space, n_out, default_names(n_space, n_out), rows)
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Columns per row: 1 + N + M.
    pub fn width(&self) -> usize {
        1 + self.n_space + self.n_out
    }

    /// Number of coordinate columns: 1 + N.
    pub fn input_width(&self) -> usize {
        1 + self.n_space
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn space_names(&self) -> &[String] {
        &self.names[1..1 + self.n_space]
    }

    pub fn output_names(&self) -> &[String] {
        &self.names[1 + self.n_space..]
    }

    pub fn values(&self) -> &[f64] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.rows[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.rows.chunks(self.width())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Coordinates `(t, x)` of every row, flat row-major.
    pub fn inputs(&self) -> Vec<f64> {
        let k = self.input_width();
        self.rows().flat_map(|r| r[..k].iter().copied()).collect()
    }

    /// Outputs `u` of every row, flat row-major.
    pub fn outputs(&self) -> Vec<f64> {
        let k = self.input_width();
        self.rows().flat_map(|r| r[k..].iter().copied()).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let rows = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Dataset {
            n_space: self.n_space,
            n_out: self.n_out,
            names: self.names.clone(),
            rows,
        }
    }

    /// Same layout with new values; used by coordinate transforms.
    pub(crate) fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Dataset {
        let w = self.width();
        Dataset {
            n_space: self.n_space,
            n_out: self.n_out,
            names: self.names.clone(),
            rows: self
                .rows
                .iter()
                .enumerate()
                .map(|(i, &v)| f(i % w, v))
                .collect(),
        }
    }
}
