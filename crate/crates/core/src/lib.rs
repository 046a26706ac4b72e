//! Nonparametric conditional spatial depth and spatial quantile regression
//! for function-valued responses and covariates.
//!
//! Curves live on a shared uniform [`Grid`]; covariates enter through kernel
//! weights on their L2 distance to an evaluation point, and responses are
//! summarized by conditional spatial depth, spatial quantiles computed in a
//! local eigenbasis, maximal depth sets and two spread measures that expose
//! heteroscedasticity.

pub mod bandwidth;
pub mod covariance;
pub mod data_io;
pub mod depth;
pub mod error;
pub mod estimators;
pub mod function_space;
pub mod kernel;
pub mod simulation;
pub mod solver;

pub use bandwidth::{
    cv_score, loo_prediction, select_bandwidth, BandwidthGrid, CvConfig, CvPredictor, CvResult,
    CvScore,
};
pub use covariance::{
    choose_dn, eigenbasis, estimate_conditional_covariance, truncate_response, Basis,
    CovarianceEstimate,
};
pub use data_io::{
    load_panel, read_panel, read_results, write_panel, write_results, BundleKind, OutputFormat,
    Panel, PanelSchema, ResultBundle, Series,
};
pub use depth::{
    covariate_norm_ranks, d1_spread, d2_spread, maximal_depth_set, spearman_correlation,
    spread_profile, DepthSetResult, SpreadProfile,
};
pub use error::{FunqError, Result};
pub use estimators::{
    spatial_depth_hat, spatial_distribution_hat, unit_direction, FunctionalSample,
};
pub use function_space::{
    distance, inner_product, norm, project, reconstruct, CoefVector, Curve, Grid,
};
pub use kernel::{compute_weights, evaluate_kernel, neighborhood, KernelSpec, WeightVector};
pub use simulation::{generate, LocationScale, SimConfig, SimModel};
pub use solver::{
    candidate_check, conditional_quantile, gradient, newton_step, objective, solve, FitStatus,
    LocalModel, QuantileFit, QuantileProblem, SolverConfig, TauSpec,
};
