//! Random walks with `d^{-1/p}`-scaled i.i.d. increments viewed as finite
//! `ℓ_p` metric spaces.
//!
//! The crate is `no_std` (it needs `alloc`) and carries everything that is
//! pure computation:
//!
//! * [`analytic_limits`]: the normal absolute moment `M_p`, the limit metric
//!   `σ M_p^{1/p} √|t−s|` and bivariate Gaussian absolute moments.
//! * [`increments`]: increment laws and counter-based, reproducible sampling.
//! * [`walk_engine`]: streaming walk simulation, grid snapshots, the `T/Q`
//!   decomposition of `‖S_n‖_p^p` and the sup-statistics.
//! * [`path_metrics`]: `ℓ_p` norms and finite metric spaces.
//! * [`gh_metrics`]: Gromov–Hausdorff distance for tiny spaces and bounds.
//!
//! IO, parallel experiment orchestration and the CLI live in the `lpwalk`
//! crate.
#![no_std]

extern crate alloc;

mod error;
mod numeric;
mod quadrature;

pub mod analytic_limits;
pub mod gh_metrics;
pub mod increments;
pub mod path_metrics;
pub mod walk_engine;

pub use analytic_limits::{
    bivariate_gaussian_abs_moment, bivariate_moment_mc_oracle, limit_distance, mp_closed_form,
    CovarianceMatrix2, LimitSpace,
};
pub use error::{Error, Result};
pub use gh_metrics::{
    distortion, gh_exact_small, gh_lower_bound_diameter, gh_upper_bound_to_limit, Correspondence,
    GhUpperBound,
};
pub use increments::{law_abs_moment, law_sigma, sample_xi_block, IncrementLaw, SeedSpec, XiStream};
pub use numeric::NeumaierSum;
pub use path_metrics::{limit_sample_space, lp_distance, lp_norm, path_metric_space, FiniteMetricSpace};
pub use walk_engine::{
    pointwise_norm_statistic, simulate_decomposition, simulate_grid, sup_difference_statistic,
    sup_norm_statistic, DecompositionTrace, GridSnapshot, WalkConfig,
};
