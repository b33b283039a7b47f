//! Analysis machinery for multi-arm treatment-duration trials.
//!
//! Patients are randomised across several treatment durations and a
//! fractional-polynomial logistic model of cure on duration (the
//! duration-response curve) is fitted. From that curve the crate estimates
//! the shortest acceptable duration under one of five estimation targets,
//! using one of several inference methods, and evaluates the operating
//! characteristics of the whole procedure by Monte Carlo simulation.
//!
//! Module map:
//!
//! - [`fp_model`]: fractional-polynomial transforms, grouped-binomial IRLS,
//!   and the two power-selection algorithms.
//! - [`scenarios`]: the sixteen reference duration-response curves, trial
//!   designs and dataset simulation.
//! - [`targets`]: estimation targets and the optimal-duration solver.
//! - [`inference`]: confidence bands, delta method, the two bootstrap methods
//!   and the gradient point estimate.
//! - [`mc_engine`]: seeded, parallel operating-characteristic simulation.
//! - [`cli`]: the `simulate`, `analyze` and `scenarios` commands.

pub mod cli;
pub mod error;
pub mod fp_model;
pub mod inference;
mod linalg;
pub mod mc_engine;
pub mod rng;
pub mod scenarios;
pub mod targets;

pub use error::{Error, Result};
pub use fp_model::{
    build_design_matrix, curve_eval, curve_gradient, fit_logistic_irls, fp_transform,
    pointwise_se, select_fp2_exhaustive, select_fp_closed_test, DesignMatrix, FitOptions,
    FittedCurve, FpAlgorithm, FpPowers, GroupedData, IrlsFit, Record, TrialDataset,
};
pub use inference::{
    bca_interval, bootstrap_resample, delta_diff_ci, percentile_interval, recommend_boot_diff,
    recommend_boot_duration, recommend_conf_bands, recommend_delta, recommend_gradient_point,
    BootstrapConfig, IntervalKind, Method, Recommendation,
};
pub use mc_engine::{compute_metrics, run_replicate, run_simulation, CellMetrics, SimulationConfig};
pub use rng::RngStream;
pub use scenarios::{generate_dataset, true_curve, true_optimal, ScenarioId, TrialDesign, TrueCurve};
pub use targets::{solve_dstar, DStar, DurationResponse, EstimationTarget, Frontier};
