//! Brute-force Rényi divergences by one-dimensional quadrature.
//!
//! These routines are validation oracles for the closed-form bounds. They
//! never call into the accounting code.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::math::{log_add_exp, log_sum_exp};

/// Intervals for the composite rules (Simpson uses twice this for refinement).
pub const DEFAULT_INTERVALS: usize = 1 << 15;
/// Tail half-width in units of σ.
const TAIL_SIGMAS: f64 = 14.0;
const REFINE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Composite Simpson on a uniform grid.
    Simpson,
    /// Composite 8-point Gauss–Legendre on uniform panels.
    GaussLegendre,
}

/// Which way the divergence between the neighbouring output laws is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `D_α(P ‖ Q)`, the dataset with the extra record against the one without.
    AddOne,
    /// `D_α(Q ‖ P)`.
    RemoveOne,
}

const GL8_NODES: [f64; 4] =
    [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL8_WEIGHTS: [f64; 4] =
    [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// `∫_lo^hi f` with the chosen rule on `intervals` uniform pieces.
pub fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize, rule: QuadratureRule) -> f64 {
    let h = (hi - lo) / intervals as f64;
    match rule {
        QuadratureRule::Simpson => {
            let n = intervals + intervals % 2;
            let h = (hi - lo) / n as f64;
            let mut acc = f(lo) + f(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(lo + h * i as f64);
            }
            acc * h / 3.0
        }
        QuadratureRule::GaussLegendre => {
            let mut acc = 0.0;
            for p in 0..intervals {
                let mid = lo + h * (p as f64 + 0.5);
                let half = 0.5 * h;
                for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
                    acc += w * (f(mid - half * x) + f(mid + half * x));
                }
            }
            acc * 0.5 * h
        }
    }
}

/// Like [`integrate`] for an integrand given by its logarithm; returns
/// the log of the integral.
pub fn integrate_log(ln_f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize, rule: QuadratureRule) -> f64 {
    let h = (hi - lo) / intervals as f64;
    let mut terms = Vec::new();
    match rule {
        QuadratureRule::Simpson => {
            let n = intervals + intervals % 2;
            let h = (hi - lo) / n as f64;
            terms.reserve(n + 1);
            for i in 0..=n {
                let w: f64 = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                terms.push(w.ln() + ln_f(lo + h * i as f64));
            }
            log_sum_exp(&terms) + (h / 3.0).ln()
        }
        QuadratureRule::GaussLegendre => {
            terms.reserve(8 * intervals);
            for p in 0..intervals {
                let mid = lo + h * (p as f64 + 0.5);
                let half = 0.5 * h;
                for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
                    terms.push(w.ln() + ln_f(mid - half * x));
                    terms.push(w.ln() + ln_f(mid + half * x));
                }
            }
            log_sum_exp(&terms) + (0.5 * h).ln()
        }
    }
}

fn close(a: f64, b: f64, rtol: f64) -> bool {
    a == b || (a - b).abs() <= rtol * a.abs().max(b.abs())
}

fn ln_normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
}

/// `(1+y)^β − 1 − βy` by its binomial series; valid for `|y|(|β|+1) < 1/2`.
fn binomial_remainder_series(beta: f64, y: f64) -> f64 {
    let mut coef = beta * (beta - 1.0) / 2.0;
    let mut pow = y * y;
    let mut sum = 0.0;
    let mut k = 2.0;
    loop {
        let term = coef * pow;
        sum += term;
        if term == 0.0 || term.abs() <= 1e-18 * sum.abs() || k > 400.0 {
            return sum;
        }
        coef *= (beta - k) / (k + 1.0);
        pow *= y;
        k += 1.0;
    }
}

/// Exact Rényi divergence of one step of the Poisson-subsampled Gaussian
/// with unit sensitivity, by quadrature:
/// `P = γ·N(1, σ²) + (1−γ)·N(0, σ²)` against `Q = N(0, σ²)`.
///
/// With `r = P/Q = 1 − γ + γ e^{(2x−1)/(2σ²)}` both directions are
/// `E_Q[r^β]` (`β = α` for [`Direction::AddOne`], `β = 1 − α` for
/// [`Direction::RemoveOne`]). Since `E_Q[r − 1] = 0` the integrand is
/// taken as `φ(x)((1+y)^β − 1 − βy)` with `y = r − 1`, which is nonnegative
/// and free of cancellation for small γ.
pub fn subsampled_gaussian_divergence(
    sigma: f64,
    gamma: f64,
    alpha: f64,
    direction: Direction,
    rule: QuadratureRule,
    intervals: usize,
) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain(format!("sigma must be > 0, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(domain(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(domain(format!("order must be > 1, got {alpha}")));
    }
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let beta = match direction {
        Direction::AddOne => alpha,
        Direction::RemoveOne => 1.0 - alpha,
    };
    let s2 = sigma * sigma;
    let ln_keep = (-gamma).ln_1p();
    let ln_gamma = gamma.ln();
    let series_limit = 0.5 / (beta.abs() + 1.0);
    let integrand = |x: f64| {
        let s = (2.0 * x - 1.0) / (2.0 * s2);
        let ln_phi = ln_normal_pdf(x, 0.0, sigma);
        let y = gamma * s.exp_m1();
        if y.abs() < series_limit {
            ln_phi.exp() * binomial_remainder_series(beta, y)
        } else {
            let ln_r = log_add_exp(ln_keep, ln_gamma + s);
            (ln_phi + beta * ln_r).exp() - ln_phi.exp() * (1.0 + beta * y)
        }
    };
    let lo = beta.min(0.0) - TAIL_SIGMAS * sigma;
    let hi = beta.max(1.0) + TAIL_SIGMAS * sigma;
    let excess = match rule {
        QuadratureRule::Simpson => {
            let coarse = integrate(integrand, lo, hi, intervals, rule);
            let fine = integrate(integrand, lo, hi, 2 * intervals, rule);
            if !close(coarse, fine, REFINE_RTOL) {
                return Err(Error::NonConvergence(format!("Simpson refinements disagree: {coarse:e} vs {fine:e}")));
            }
            fine
        }
        QuadratureRule::GaussLegendre => integrate(integrand, lo, hi, intervals, rule),
    };
    if !excess.is_finite() || excess < -1.0 {
        return Err(Error::NonConvergence(format!("integral is {excess}")));
    }
    Ok(excess.max(0.0).ln_1p() / (alpha - 1.0))
}

/// Oracle for the one-step subsampled Gaussian under add/remove adjacency:
/// the larger of the two directed divergences, by refined Simpson.
pub fn renyi_quadrature_oracle(sigma: f64, gamma: f64, alpha: f64) -> Result<f64> {
    let add = subsampled_gaussian_divergence(
        sigma,
        gamma,
        alpha,
        Direction::AddOne,
        QuadratureRule::Simpson,
        DEFAULT_INTERVALS,
    )?;
    let remove = subsampled_gaussian_divergence(
        sigma,
        gamma,
        alpha,
        Direction::RemoveOne,
        QuadratureRule::Simpson,
        DEFAULT_INTERVALS,
    )?;
    Ok(add.max(remove))
}

/// `D_α(P ‖ Q)` for two densities on the real line given by their log
/// densities, integrated over `[lo, hi]` in log space.
///
/// Checks that Simpson at `intervals` and `2·intervals` agree to `1e-9`
/// relative on the log-integral.
pub fn renyi_divergence_1d(
    ln_p: impl Fn(f64) -> f64,
    ln_q: impl Fn(f64) -> f64,
    alpha: f64,
    lo: f64,
    hi: f64,
    intervals: usize,
) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(domain(format!("order must be > 1, got {alpha}")));
    }
    let ln_f = |x: f64| alpha * ln_p(x) + (1.0 - alpha) * ln_q(x);
    let coarse = integrate_log(ln_f, lo, hi, intervals, QuadratureRule::Simpson);
    let fine = integrate_log(ln_f, lo, hi, 2 * intervals, QuadratureRule::Simpson);
    if !(close(coarse, fine, REFINE_RTOL) || (coarse - fine).abs() < 1e-14) {
        return Err(Error::NonConvergence(format!("{coarse} vs {fine}")));
    }
    Ok((fine / (alpha - 1.0)).max(0.0))
}

/// Log density of a finite Gaussian mixture `Σ w_i N(mean_i, sd_i²)`.
pub fn ln_gaussian_mixture(x: f64, components: &[(f64, f64, f64)]) -> f64 {
    let terms: Vec<f64> = components.iter().map(|&(w, mean, sd)| w.ln() + ln_normal_pdf(x, mean, sd)).collect();
    log_sum_exp(&terms)
}
