//! Rényi-DP accounting and calibration for private hyperparameter tuning on
//! a random subset of the data, plus a small DP-SGD simulator that runs the
//! tuning protocols end to end on synthetic data.
//!
//! The [`RdpCurve`] (a bound `ε(α)` for each order of an [`AlphaGrid`]) is
//! the common currency: mechanisms produce curves, composition and
//! amplification transform them, and [`rdp_to_dp`] turns them into
//! `(ε, δ)` statements.

pub mod calibration;
pub mod error;
pub mod extrapolation;
pub mod math;
pub mod quadrature;
pub mod rdp;
pub mod simulator;
pub mod subsampling;
pub mod tuning;

pub use calibration::{
    calibrate_sigma, calibrate_sigma_alpha_line, calibrate_steps, dp_sgd_epsilon, grid_uniform_curve, steps_for_epochs,
    GridCalibration, GridEntry, GridPoint, SigmaCalibration, StepsCalibration,
};
pub use error::{Error, Result};
pub use extrapolation::{extrapolate, injected_noise_variance, optimal_lr_estimate, HyperParams, Optimizer};
pub use quadrature::renyi_quadrature_oracle;
pub use rdp::{
    compose, gaussian_curve, gaussian_rdp, parallel_compose, rdp_to_delta, rdp_to_dp, uniform_grid_bound, AlphaGrid,
    DpConversion, MechanismSpec, PrivacyTarget, RdpCurve,
};
pub use subsampling::{subsample_curve, subsample_rdp};
pub use tuning::{
    expected_cost, protocol_curve, tuning_rdp, variant1_curve, variant1_rdp, variant2_curve, CostEstimate, CostModel,
    TuningConfig, Variant,
};
