//! Sparse polynomial chaos expansions by least angle regression, with the
//! hierarchical adaptive basis-enrichment scheme (h-LAR) driven by the
//! statistical heredity principle.
//!
//! The crate covers the whole surrogate pipeline: orthonormal univariate
//! bases and their tensor products (`polynomials`), candidate-set truncation
//! over multi-indices (`multiindex`), input models with Latin hypercube
//! sampling (`inputs`), ordinary least squares with the analytic
//! leave-one-out error (`regression`), the least-angle path solver with
//! hybrid OLS refits (`lar`), the heredity-driven adaptive variant
//! (`heredity`), and analytic benchmark functions (`benchmarks`).
//!
//! Batch evaluation and prediction are data-parallel through `rayon` when
//! the default `parallel` feature is enabled; without it every code path is
//! sequential with identical results.

pub mod benchmarks;
mod engine;
pub mod error;
pub mod heredity;
pub mod inputs;
pub mod lar;
pub mod multiindex;
mod par;
pub mod polynomials;
pub mod regression;

pub use error::{PceError, Result};
pub use heredity::{
    hlar_fit, hlar_fit_with_log, ChildTruncation, HeredityConfig, HeredityForm, HlarLog,
};
pub use inputs::{ExperimentalDesign, InputModel, Marginal};
pub use lar::{
    fit_degree_adaptive, fit_reference, lar_path, FitConfig, FitMethod, LarOptions, LarPath,
    PathTermination, SparsePceModel,
};
pub use multiindex::{generate_candidate_set, filter_rank, MultiIndex, TruncationSpec};
pub use polynomials::PolyFamily;
pub use regression::{build_design_matrix, empirical_error, loo_error, ols_solve, FitDiagnostics};
