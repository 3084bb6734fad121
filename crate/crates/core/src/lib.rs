//! Data-driven discovery of partial differential equations.
//!
//! The pipeline fits a smooth tanh network `û(t, x)` to unordered samples,
//! evaluates exact partial derivatives of the fit, and regresses `û_t` on a
//! library of derivative monomials (or on a small network of them). Shift/scale
//! input transforms are tracked so discovered models can be restated in
//! physical coordinates.

pub mod cli;
pub mod dataset;
pub mod discover;
pub mod error;
pub mod features;
pub mod ingest;
pub mod net;
pub mod optim;
pub mod select;
pub mod simulate;
pub mod surrogate;
pub mod transforms;

pub use dataset::Dataset;
pub use error::{Error, Result};
