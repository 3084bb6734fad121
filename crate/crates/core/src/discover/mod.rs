//! Regression of `û_t` on library columns: sparse linear models and small
//! operator networks, plus their symbolic and JSON forms.

mod linear;
mod operator;
mod symbolic;

pub use linear::{fit_linear_pde, prune, LinearPdeModel, LinearSolver, ResidualConfig};
pub(crate) use linear::{solve_from_factor, streamed_r_factor};
pub use operator::{fit_operator_net, OperatorFitConfig, OperatorNet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DesignMatrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Coordinates a model's derivatives are taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateFrame {
    Physical,
    Transformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscoveredModel {
    Linear(LinearPdeModel),
    Operator(OperatorNet),
}

impl DiscoveredModel {
    pub fn residual_loss(&self) -> f64 {
        match self {
            DiscoveredModel::Linear(m) => m.residual_loss,
            DiscoveredModel::Operator(m) => m.residual_loss,
        }
    }

    pub fn predict(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        match self {
            DiscoveredModel::Linear(m) => m.predict(design),
            DiscoveredModel::Operator(m) => m.predict(design),
        }
    }

    pub fn frame(&self) -> CoordinateFrame {
        match self {
            DiscoveredModel::Linear(m) => m.frame,
            DiscoveredModel::Operator(m) => m.frame,
        }
    }
}

/// Text form, e.g. `u_t = -1.0000e0*u*u_x + 1.0000e-2*u_xx`.
pub fn emit_symbolic(model: &DiscoveredModel) -> String {
    match model {
        DiscoveredModel::Linear(m) => symbolic::emit_linear(m),
        DiscoveredModel::Operator(m) => symbolic::emit_operator(m),
    }
}

/// Versioned on-disk form of a discovered model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub model: DiscoveredModel,
    pub equation: String,
    /// Hash of the configuration that produced the model.
    pub config_hash: String,
}

impl ModelArtifact {
    pub fn new(model: DiscoveredModel, config_hash: String) -> Self {
        ModelArtifact {
            version: MODEL_FORMAT_VERSION,
            equation: emit_symbolic(&model),
            model,
            config_hash,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelArtifact = serde_json::from_str(text)?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Document(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                doc.version
            )));
        }
        Ok(doc)
    }
}
