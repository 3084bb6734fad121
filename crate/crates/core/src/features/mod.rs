//! Candidate library: derivative terms, their monomials, and the design matrix.

mod design;
mod terms;

pub use design::{build_design_matrix, design_from_samples, Column, DerivativeSamples, DesignMatrix};
pub use terms::{
    count_derivative_terms, count_monomials, enumerate_derivative_terms, enumerate_monomials,
    enumerate_monomials_capped, DerivativeTerm, LibrarySpec, Term, TermNaming, DEFAULT_TERM_CAP,
};
