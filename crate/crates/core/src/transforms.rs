//! Per-axis shift/scale coordinate transforms and the push-back of
//! discovered models from scaled to physical coordinates.
//!
//! With `τ = (t − t̄)/σ_t` and `ξ_i = (x_i − x̄_i)/σ_i` every derivative in
//! `x_i` picks up a factor `1/σ_i`, so a linear PDE fitted in `(τ, ξ)` maps
//! back to `(t, x)` by rescaling each coefficient.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discover::{CoordinateFrame, LinearPdeModel};
use crate::error::{Error, Result};
use crate::features::{Column, Term};
use crate::net::{Mlp, MultiIndex};

/// Diagonal affine map `v ↦ (v − shift)/scale` on the coordinate axes `(t, x_1..x_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub axis_names: Vec<String>,
    pub shifts: Vec<f64>,
    pub scales: Vec<f64>,
    /// Axes whose data were constant; their scale was forced to 1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constant_axes: Vec<usize>,
}

/// A coordinate transform recorded alongside a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoordinateTransform {
    ShiftScale(AffineTransform),
    /// General affine map `ξ = A (x − offset)` with row-major `A`.
    Linear {
        axis_names: Vec<String>,
        matrix: Vec<f64>,
        offset: Vec<f64>,
    },
}

impl CoordinateTransform {
    /// The per-axis form, when the map is diagonal.
    pub fn diagonal(&self) -> Result<AffineTransform> {
        match self {
            CoordinateTransform::ShiftScale(t) => Ok(t.clone()),
            CoordinateTransform::Linear {
                axis_names,
                matrix,
                offset,
            } => {
                let n = axis_names.len();
                let diag_only = (0..n)
                    .all(|i| (0..n).all(|j| i == j || matrix[i * n + j] == 0.0));
                if !diag_only {
                    return Err(Error::UnsupportedTransform(
                        "non-diagonal Jacobian; only per-axis transforms can be pushed back".into(),
                    ));
                }
                let scales: Vec<f64> = (0..n).map(|i| 1.0 / matrix[i * n + i]).collect();
                AffineTransform::new(axis_names.clone(), offset.clone(), scales)
            }
        }
    }
}

impl AffineTransform {
    pub fn new(axis_names: Vec<String>, shifts: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        if shifts.len() != axis_names.len() || scales.len() != axis_names.len() {
            return Err(Error::DimensionMismatch {
                context: "transform axes",
                expected: axis_names.len(),
                got: shifts.len().min(scales.len()),
            });
        }
        if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Config(format!("transform scales must be positive, got {s}")));
        }
        Ok(AffineTransform {
            axis_names,
            shifts,
            scales,
            constant_axes: Vec::new(),
        })
    }

    pub fn identity(axis_names: Vec<String>) -> Self {
        let n = axis_names.len();
        AffineTransform {
            axis_names,
            shifts: vec![0.0; n],
            scales: vec![1.0; n],
            constant_axes: Vec::new(),
        }
    }

    /// Per-axis mean and population standard deviation of the coordinate columns.
    pub fn fit_shift_scale(data: &Dataset) -> Self {
        let k = data.input_width();
        let n = data.len() as f64;
        let mut shifts = vec![0.0; k];
        let mut scales = vec![0.0; k];
        let mut constant_axes = Vec::new();
        for j in 0..k {
            let col = data.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            shifts[j] = if mean.is_finite() { mean } else { 0.0 };
            let distinct = col.iter().any(|&v| v != col[0]);
            if distinct && var > 0.0 {
                scales[j] = var.sqrt();
            } else {
                log::warn!("axis {} is constant; using scale 1", data.names()[j]);
                scales[j] = 1.0;
                constant_axes.push(j);
            }
        }
        AffineTransform {
            axis_names: data.names()[..k].to_vec(),
            shifts,
            scales,
            constant_axes,
        }
    }

    pub fn n_axes(&self) -> usize {
        self.scales.len()
    }

    /// σ of the time axis.
    pub fn time_scale(&self) -> f64 {
        self.scales[0]
    }

    /// σ of each space axis.
    pub fn space_scales(&self) -> &[f64] {
        &self.scales[1..]
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.input_width() != self.n_axes() {
            return Err(Error::DimensionMismatch {
                context: "transform axes vs dataset coordinates",
                expected: self.n_axes(),
                got: data.input_width(),
            });
        }
        Ok(())
    }

    /// Maps physical coordinates to scaled ones; output columns are untouched.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.check_dataset(data)?;
        let k = self.n_axes();
        Ok(data.map_values(|j, v| {
            if j < k {
                (v - self.shifts[j]) / self.scales[j]
            } else {
                v
            }
        }))
    }

    pub fn invert(&self, data: &Dataset) -> Result<Dataset> {
        self.check_dataset(data)?;
        let k = self.n_axes();
        Ok(data.map_values(|j, v| {
            if j < k {
                v * self.scales[j] + self.shifts[j]
            } else {
                v
            }
        }))
    }

    pub fn apply_point(&self, coords: &mut [f64]) {
        for (j, v) in coords.iter_mut().enumerate() {
            *v = (*v - self.shifts[j]) / self.scales[j];
        }
    }

    pub fn invert_point(&self, coords: &mut [f64]) {
        for (j, v) in coords.iter_mut().enumerate() {
            *v = *v * self.scales[j] + self.shifts[j];
        }
    }

    /// Factor `f` with `∂^α u/∂x^α = f · ∂^α u/∂ξ^α` for a space multi-index α.
    pub fn derivative_factor(&self, index: &MultiIndex) -> f64 {
        index
            .orders()
            .iter()
            .zip(self.space_scales())
            .map(|(&o, &s)| s.powi(-(o as i32)))
            .product()
    }

    /// [`AffineTransform::derivative_factor`] for a monomial: product over its factors.
    pub fn term_factor(&self, term: &Term) -> f64 {
        term.factors
            .iter()
            .map(|(d, e)| self.derivative_factor(&d.index).powi(*e as i32))
            .product()
    }

    /// Multiplier taking a scaled-frame coefficient to the physical frame.
    fn column_back_factor(&self, column: &Column) -> Result<f64> {
        match column {
            Column::Bias => Ok(1.0 / self.time_scale()),
            Column::Term(t) => Ok(1.0 / (self.time_scale() * self.term_factor(t))),
            Column::Coord(_) => Err(Error::UnsupportedTransform(
                "models with raw coordinate columns cannot be rescaled per coefficient".into(),
            )),
        }
    }

    /// Network taking scaled inputs that equals `physical` composed with the inverse map.
    pub fn network_on_transformed_inputs(&self, physical: &Mlp) -> Result<Mlp> {
        self.fold_into_first_layer(physical, |j| (self.scales[j], self.shifts[j]))
    }

    /// Network taking physical inputs that equals `transformed` composed with the map.
    pub fn network_on_physical_inputs(&self, transformed: &Mlp) -> Result<Mlp> {
        self.fold_into_first_layer(transformed, |j| {
            (1.0 / self.scales[j], -self.shifts[j] / self.scales[j])
        })
    }

    /// Rewrites the first layer for inputs `x_j = a_j · y_j + c_j`.
    fn fold_into_first_layer(&self, net: &Mlp, affine: impl Fn(usize) -> (f64, f64)) -> Result<Mlp> {
        if net.input_dim() != self.n_axes() {
            return Err(Error::DimensionMismatch {
                context: "network inputs vs transform axes",
                expected: self.n_axes(),
                got: net.input_dim(),
            });
        }
        let n_in = net.input_dim();
        let mut weights: Vec<Vec<f64>> = (0..net.n_layers()).map(|l| net.weights(l).to_vec()).collect();
        let mut biases: Vec<Vec<f64>> = (0..net.n_layers()).map(|l| net.biases(l).to_vec()).collect();
        for (o, b) in biases[0].iter_mut().enumerate() {
            for j in 0..n_in {
                let (a, c) = affine(j);
                let w = &mut weights[0][o * n_in + j];
                *b += *w * c;
                *w *= a;
            }
        }
        Mlp::from_parts(net.layer_dims(), weights, biases)
    }
}

/// Restates a model fitted in scaled coordinates in physical coordinates.
pub fn back_transform_model(model: &LinearPdeModel, transform: &CoordinateTransform) -> Result<LinearPdeModel> {
    if model.frame != CoordinateFrame::Transformed {
        return Err(Error::Config("model is not flagged as transformed-coordinate".into()));
    }
    let t = transform.diagonal()?;
    check_model_axes(model, &t)?;
    let mut out = model.clone();
    for (c, col) in out.coefficients.iter_mut().zip(&model.columns) {
        *c *= t.column_back_factor(col)?;
    }
    out.frame = CoordinateFrame::Physical;
    out.transform = Some(transform.clone());
    Ok(out)
}

/// Inverse of [`back_transform_model`]: restates a physical model in scaled coordinates.
pub fn forward_transform_model(model: &LinearPdeModel, transform: &CoordinateTransform) -> Result<LinearPdeModel> {
    if model.frame != CoordinateFrame::Physical {
        return Err(Error::Config("model is not flagged as physical-coordinate".into()));
    }
    let t = transform.diagonal()?;
    check_model_axes(model, &t)?;
    let mut out = model.clone();
    for (c, col) in out.coefficients.iter_mut().zip(&model.columns) {
        *c /= t.column_back_factor(col)?;
    }
    out.frame = CoordinateFrame::Transformed;
    out.transform = Some(transform.clone());
    Ok(out)
}

fn check_model_axes(model: &LinearPdeModel, t: &AffineTransform) -> Result<()> {
    if model.n_space + 1 != t.n_axes() {
        return Err(Error::DimensionMismatch {
            context: "model space axes vs transform axes",
            expected: t.n_axes(),
            got: model.n_space + 1,
        });
    }
    Ok(())
}
