//! Inverse accounting for DP-SGD: noise multipliers or training lengths
//! that meet a privacy target, and uniform bounds over a calibrated grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rdp::{compose, rdp_to_dp, uniform_grid_bound, AlphaGrid, MechanismSpec, PrivacyTarget, RdpCurve};

pub const SIGMA_MIN: f64 = 1e-2;
pub const SIGMA_MAX: f64 = 1e4;
/// Relative width at which the σ bisection stops.
pub const SIGMA_RTOL: f64 = 1e-4;
pub const MAX_BISECTION_ITERS: usize = 200;
/// Step counts beyond this are reported as unbounded.
pub const MAX_STEPS: u64 = 1 << 40;

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("sampling ratio must lie in (0, 1], got {gamma}")))
    }
}

/// One DP-SGD step (Poisson-subsampled Gaussian, unit sensitivity).
pub fn dp_sgd_step_curve(grid: &AlphaGrid, sigma: f64, gamma: f64) -> Result<RdpCurve> {
    MechanismSpec::SubsampledGaussian { sigma, gamma }.curve(grid)
}

/// ε at `delta` after `steps` DP-SGD iterations, on the default grid.
pub fn dp_sgd_epsilon(sigma: f64, gamma: f64, steps: u64, delta: f64) -> Result<f64> {
    let grid = AlphaGrid::default();
    let curve = MechanismSpec::dp_sgd(sigma, gamma, steps).curve(&grid)?;
    Ok(rdp_to_dp(&curve, delta)?.epsilon)
}

/// Outcome of a σ search together with its post-hoc check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaCalibration {
    pub sigma: f64,
    /// Accounted ε (or, for the α-line search, the largest `T·ε(α)/α`) at `sigma`.
    pub value: f64,
    /// `sigma · (1 − 10·SIGMA_RTOL)`.
    pub perturbed_sigma: f64,
    pub perturbed_value: f64,
    /// The search stopped at [`SIGMA_MIN`], so smaller σ were never tried.
    pub at_lower_bound: bool,
}

/// Smallest σ in `[SIGMA_MIN, SIGMA_MAX]` (to relative `SIGMA_RTOL`) for
/// which `value(σ) ≤ limit`, assuming `value` is non-increasing in σ.
fn bisect_sigma(limit: f64, value: impl Fn(f64) -> Result<f64>) -> Result<SigmaCalibration> {
    let perturb = |sigma: f64| sigma * (1.0 - 10.0 * SIGMA_RTOL);
    let lo_value = value(SIGMA_MIN)?;
    if lo_value <= limit {
        let p = perturb(SIGMA_MIN);
        return Ok(SigmaCalibration {
            sigma: SIGMA_MIN,
            value: lo_value,
            perturbed_sigma: p,
            perturbed_value: value(p)?,
            at_lower_bound: true,
        });
    }
    if value(SIGMA_MAX)? > limit {
        return Err(Error::NoSolution(format!("target not met even at sigma = {SIGMA_MAX}")));
    }
    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    let mut iters = 0;
    while hi / lo > 1.0 + SIGMA_RTOL && iters < MAX_BISECTION_ITERS {
        let mid = (lo * hi).sqrt();
        if value(mid)? <= limit {
            hi = mid;
        } else {
            lo = mid;
        }
        iters += 1;
    }
    let v = value(hi)?;
    let p = perturb(hi);
    let pv = value(p)?;
    if v > limit || pv <= limit {
        return Err(Error::NonMonotone("sigma".into()));
    }
    Ok(SigmaCalibration { sigma: hi, value: v, perturbed_sigma: p, perturbed_value: pv, at_lower_bound: false })
}

/// Smallest noise multiplier such that `steps` DP-SGD iterations with
/// sampling ratio `gamma` are `(ε, δ)`-DP for the target.
pub fn calibrate_sigma(gamma: f64, steps: u64, target: PrivacyTarget) -> Result<SigmaCalibration> {
    check_gamma(gamma)?;
    if steps == 0 {
        return Err(domain("steps must be >= 1"));
    }
    target.validate()?;
    bisect_sigma(target.epsilon, |sigma| dp_sgd_epsilon(sigma, gamma, steps, target.delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepsCalibration {
    /// Largest admissible step count; 0 when even one step is too many.
    pub steps: u64,
    /// ε after `steps` iterations (`None` when `steps == 0`).
    pub epsilon: Option<f64>,
    /// ε after `steps + 1` iterations.
    pub next_epsilon: f64,
}

/// Largest number of DP-SGD iterations meeting the target at fixed σ and
/// sampling ratio, by doubling then binary search.
///
/// Accounted ε must be non-decreasing in the step count; a violation seen
/// during the search is returned as [`Error::NonMonotone`].
pub fn calibrate_steps(gamma: f64, sigma: f64, target: PrivacyTarget) -> Result<StepsCalibration> {
    check_gamma(gamma)?;
    target.validate()?;
    let grid = AlphaGrid::default();
    let step = dp_sgd_step_curve(&grid, sigma, gamma)?;
    let eps_at = |t: u64| -> Result<f64> { Ok(rdp_to_dp(&compose(&step, t), target.delta)?.epsilon) };

    let first = eps_at(1)?;
    if first > target.epsilon {
        return Ok(StepsCalibration { steps: 0, epsilon: None, next_epsilon: first });
    }
    let (mut lo, mut lo_eps) = (1u64, first);
    let mut hi = 2u64;
    let mut hi_eps = eps_at(hi)?;
    while hi_eps <= target.epsilon {
        if hi_eps < lo_eps {
            return Err(Error::NonMonotone("steps".into()));
        }
        lo = hi;
        lo_eps = hi_eps;
        if hi >= MAX_STEPS {
            return Err(Error::NoSolution(format!("target still met after {MAX_STEPS} steps")));
        }
        hi *= 2;
        hi_eps = eps_at(hi)?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let e = eps_at(mid)?;
        if e < lo_eps || e > hi_eps {
            return Err(Error::NonMonotone("steps".into()));
        }
        if e <= target.epsilon {
            lo = mid;
            lo_eps = e;
        } else {
            hi = mid;
            hi_eps = e;
        }
    }
    Ok(StepsCalibration { steps: lo, epsilon: Some(lo_eps), next_epsilon: eps_at(lo + 1)? })
}

/// Smallest σ such that `T·ε_{γ,σ}(α) ≤ c·α` on every integer order
/// `2..=64`. The reported value is `max_α T·ε(α)/α`, compared against `c`.
pub fn calibrate_sigma_alpha_line(gamma: f64, steps: u64, slope: f64) -> Result<SigmaCalibration> {
    check_gamma(gamma)?;
    if steps == 0 {
        return Err(domain("steps must be >= 1"));
    }
    if !(slope > 0.0) {
        return Err(domain(format!("slope must be > 0, got {slope}")));
    }
    let grid = AlphaGrid::integers(crate::rdp::DEFAULT_MAX_ORDER)?;
    let t = steps as f64;
    bisect_sigma(slope, |sigma| {
        let c = dp_sgd_step_curve(&grid, sigma, gamma)?;
        Ok(c.iter().map(|(a, e)| t * e / a).fold(0.0, f64::max))
    })
}

/// One `(γ, T)` hyperparameter pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub gamma: f64,
    pub steps: u64,
}

/// Grid entry in the file format: steps follow from `epochs / gamma`.
/// Number of steps for `epochs` passes at sampling ratio `gamma`.
pub fn steps_for_epochs(gamma: f64, epochs: f64) -> u64 {
    (epochs / gamma).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub epochs: f64,
    /// Dataset size; only used to report the expected batch size.
    pub n: u64,
}

impl GridPoint {
    pub fn entry(&self) -> GridEntry {
        GridEntry { gamma: self.gamma, steps: steps_for_epochs(self.gamma, self.epochs) }
    }

    pub fn expected_batch(&self) -> u64 {
        (self.gamma * self.n as f64).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCalibration {
    pub entries: Vec<GridEntry>,
    pub sigmas: Vec<SigmaCalibration>,
    pub curves: Vec<RdpCurve>,
    /// Pointwise maximum of `curves`: the bound every randomly drawn
    /// candidate satisfies.
    pub uniform: RdpCurve,
}

/// Calibrates σ for every pair, then takes the pointwise maximum of the
/// resulting DP-SGD curves. Failures name the offending entry.
pub fn grid_uniform_curve(entries: &[GridEntry], target: PrivacyTarget) -> Result<GridCalibration> {
    if entries.is_empty() {
        return Err(domain("calibration grid is empty"));
    }
    let grid = AlphaGrid::default();
    let solved = entries
        .par_iter()
        .enumerate()
        .map(|(index, e)| {
            let wrap = |source: Error| Error::GridEntry { index, source: Box::new(source) };
            let cal = calibrate_sigma(e.gamma, e.steps, target).map_err(wrap)?;
            let curve = MechanismSpec::dp_sgd(cal.sigma, e.gamma, e.steps).curve(&grid).map_err(wrap)?;
            Ok((cal, curve))
        })
        .collect::<Result<Vec<_>>>()?;
    let (sigmas, curves): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let uniform = uniform_grid_bound(&curves)?;
    Ok(GridCalibration { entries: entries.to_vec(), sigmas, curves, uniform })
}
