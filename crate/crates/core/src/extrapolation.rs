//! Transfer of hyperparameters found on a tuning subset of size `m` to a
//! training set of size `n`.
//!
//! Clipping constant, noise multiplier, sampling ratio and step count stay
//! fixed, so the privacy guarantee of the trained model is unchanged. For
//! SGD the learning rate scales by `n/m`, which keeps the total injected
//! noise identical; Adam keeps its learning rate.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        }
    }
}

/// DP-SGD hyperparameters of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Learning rate.
    pub eta: f64,
    /// Per-sample gradient clipping norm.
    pub clip: f64,
    /// Poisson sampling ratio of the mini-batches.
    pub gamma: f64,
    pub steps: u64,
    pub optimizer: Optimizer,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(domain(format!("learning rate must be >= 0, got {}", self.eta)));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return Err(domain(format!("clipping norm must be > 0, got {}", self.clip)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(domain(format!("sampling ratio must lie in (0, 1], got {}", self.gamma)));
        }
        if self.steps == 0 {
            return Err(domain("steps must be >= 1"));
        }
        Ok(())
    }

    /// Expected batch size `γ·n`, rounded for display.
    pub fn expected_batch(&self, n: usize) -> u64 {
        (self.gamma * n as f64).round() as u64
    }

    /// Epochs implied by `γ·T`.
    pub fn epochs(&self) -> f64 {
        self.gamma * self.steps as f64
    }
}

/// Moves `params` tuned on `m` records to a dataset of `n` records.
pub fn extrapolate(params: &HyperParams, m: usize, n: usize) -> HyperParams {
    let eta = match params.optimizer {
        Optimizer::Sgd if m != n => params.eta * (n as f64 / m.max(1) as f64),
        _ => params.eta,
    };
    HyperParams { eta, ..*params }
}

/// Learning rate minimizing the KL divergence between the stationary law of
/// noise-dominated DP-SGD and the Gaussian posterior of a quadratic loss:
/// `2γ²n / (σ²C²)`.
pub fn optimal_lr_estimate(gamma: f64, n: f64, sigma: f64, clip: f64) -> Result<f64> {
    if !(gamma > 0.0 && n > 0.0 && sigma > 0.0 && clip > 0.0) {
        return Err(domain("all inputs must be positive"));
    }
    Ok(2.0 * gamma * gamma * n / (sigma * sigma * clip * clip))
}

/// Variance per coordinate of the summed DP noise over `steps` iterations:
/// `T·η²σ²C² / (γn)²`.
pub fn injected_noise_variance(eta: f64, sigma: f64, clip: f64, gamma: f64, n: f64, steps: u64) -> f64 {
    let batch = gamma * n;
    steps as f64 * (eta * sigma * clip / batch).powi(2)
}
