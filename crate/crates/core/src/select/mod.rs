//! Model selection grids over (m, k) and operator architectures, and
//! feature diagnostics for a design matrix.

mod features;
mod grid;

pub use features::{feature_report, FeatureReport, FeatureReportConfig};
pub use grid::{
    grid_search_architecture, grid_search_architecture_samples, grid_search_mk, grid_search_mk_samples, CostGrid,
    GridCell,
};
