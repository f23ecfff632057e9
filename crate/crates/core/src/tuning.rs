//! Privacy of hyperparameter tuning with a Poisson-distributed number of
//! candidates: the full-data baseline, and tuning on a Poisson subset
//! followed by a final training run on the rest of the data (variant 1) or
//! on all of it (variant 2). Also the expected gradient-evaluation cost of
//! each protocol.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::math::{ln_binomial, log_sum_exp, scaled, xln1m, xlnx};
use crate::rdp::{is_integer, rdp_to_delta, MechanismSpec, RdpCurve};
use crate::subsampling::{check_integer_order, check_ratio, subsample_curve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Tune on the full dataset.
    Baseline,
    /// Tune on a Poisson subset `X₁`, train the final model on `X ∖ X₁`.
    Variant1,
    /// Tune on a Poisson subset `X₁`, train the final model on `X`.
    Variant2,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::Variant1, Variant::Variant2];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Variant1 => "variant1",
            Variant::Variant2 => "variant2",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "variant1" => Ok(Variant::Variant1),
            "variant2" => Ok(Variant::Variant2),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Expected candidate count, tuning-subset ratio, protocol, and the
/// mechanism each candidate (and the final model) is trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub mu: f64,
    pub q: f64,
    pub variant: Variant,
    pub base: MechanismSpec,
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu)?;
        check_ratio(self.q)?;
        self.base.validate()
    }

    /// The RDP curve of the whole protocol with `base` as both the
    /// candidate and final-model bound.
    pub fn curve(&self, grid: &crate::AlphaGrid) -> Result<RdpCurve> {
        self.validate()?;
        let base = self.base.curve(grid)?;
        protocol_curve(self.variant, &base, self.mu, self.q)
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("expected candidate count must be > 0, got {mu}")))
    }
}

/// RDP of random search with `K ~ Poisson(μ)` candidates, each satisfying
/// the `base` curve.
///
/// At each order `α` the candidate's `(ε̂, δ̂)`-DP guarantee is taken on the
/// validity boundary `ε̂ = log(1 + 1/(α−1))`, with `δ̂` the best conversion
/// of `base` at that ε̂. The bound is `ε(α) + μ·δ̂ + log(μ)/(α−1)`; orders
/// with `δ̂ ≥ 1` get the sentinel.
pub fn tuning_rdp(base: &RdpCurve, mu: f64) -> Result<RdpCurve> {
    check_mu(mu)?;
    let ln_mu = mu.ln();
    RdpCurve::try_from_fn(base.grid().clone(), |alpha| {
        let eps = base.require(alpha)?;
        let eps_hat = (1.0 / (alpha - 1.0)).ln_1p();
        let delta_hat = rdp_to_delta(base, eps_hat)?.delta;
        if !(delta_hat < 1.0) || !eps.is_finite() {
            return Ok(f64::INFINITY);
        }
        Ok((eps + mu * delta_hat + ln_mu / (alpha - 1.0)).max(0.0))
    })
}

/// Tailored RDP bound for tuning on a Poisson(q) subset `X₁` (mechanism
/// with curve `eps1`) followed by a final run on `X ∖ X₁` (curve `eps2`),
/// at integer order `α`.
///
/// Evaluates both directed bounds and returns the larger:
///
/// ```text
/// D(M(Y)‖M(X)) ≤ 1/(α−1) log( q^α e^{(α−1)ε₁(α)} + (1−q)^α e^{(α−1)ε₂(α)}
///     + Σ_{j=1}^{α−1} C(α,j) q^{α−j} (1−q)^j e^{(α−j−1)ε₁(α−j)} e^{(j−1)ε₂(j)} )
/// D(M(X)‖M(Y)) ≤ 1/(α−1) log( (1−q)^{α−1} e^{(α−1)ε₂(α)}
///     + Σ_{j=1}^{α−1} C(α−1,j) q^j (1−q)^{α−1−j} e^{jε₁(j+1)} e^{(α−j−1)ε₂(α−j)} )
/// ```
///
/// Exponents of the form `0·ε(1)` are zero; order 1 is never read.
pub fn variant1_rdp(eps1: &RdpCurve, eps2: &RdpCurve, q: f64, alpha: u32) -> Result<f64> {
    check_ratio(q)?;
    check_integer_order(alpha)?;
    let a = f64::from(alpha);
    let e1 = |k: f64| if k < 2.0 { Ok(0.0) } else { eps1.require(k) };
    let e2 = |k: f64| if k < 2.0 { Ok(0.0) } else { eps2.require(k) };

    // Each term is (log coefficient, log exponential factor); a term whose
    // coefficient vanishes is dropped before the factor is added.
    let push = |terms: &mut Vec<f64>, coef: f64, factor: f64| {
        if coef != f64::NEG_INFINITY {
            terms.push(coef + factor);
        }
    };

    let mut fwd = Vec::with_capacity(alpha as usize + 1);
    push(&mut fwd, xlnx(a, q), scaled(a - 1.0, e1(a)?));
    push(&mut fwd, xln1m(a, q), scaled(a - 1.0, e2(a)?));
    for j in 1..alpha {
        let jf = f64::from(j);
        let coef = ln_binomial(alpha, j) + xlnx(a - jf, q) + xln1m(jf, q);
        if coef == f64::NEG_INFINITY {
            continue;
        }
        let factor = scaled(a - jf - 1.0, e1(a - jf)?) + scaled(jf - 1.0, e2(jf)?);
        push(&mut fwd, coef, factor);
    }

    let mut rev = Vec::with_capacity(alpha as usize);
    push(&mut rev, xln1m(a - 1.0, q), scaled(a - 1.0, e2(a)?));
    for j in 1..alpha {
        let jf = f64::from(j);
        let coef = ln_binomial(alpha - 1, j) + xlnx(jf, q) + xln1m(a - 1.0 - jf, q);
        if coef == f64::NEG_INFINITY {
            continue;
        }
        let factor = scaled(jf, e1(jf + 1.0)?) + scaled(a - jf - 1.0, e2(a - jf)?);
        push(&mut rev, coef, factor);
    }

    let fwd = log_sum_exp(&fwd) / (a - 1.0);
    let rev = log_sum_exp(&rev) / (a - 1.0);
    Ok(fwd.max(rev).max(0.0))
}

/// [`variant1_rdp`] on each integer order; fractional orders get the
/// sentinel. Both curves must share one grid.
pub fn variant1_curve(eps1: &RdpCurve, eps2: &RdpCurve, q: f64) -> Result<RdpCurve> {
    if eps1.grid() != eps2.grid() {
        return Err(Error::GridMismatch);
    }
    check_ratio(q)?;
    RdpCurve::try_from_fn(eps1.grid().clone(), |alpha| {
        if is_integer(alpha) {
            variant1_rdp(eps1, eps2, q, alpha as u32)
        } else {
            Ok(f64::INFINITY)
        }
    })
}

/// Variant 2: the tuning curve amplified by Poisson(q) subsampling,
/// composed with the final training run on all data.
pub fn variant2_curve(tuning_curve: &RdpCurve, base: &RdpCurve, q: f64) -> Result<RdpCurve> {
    subsample_curve(tuning_curve, q)?.add(base)
}

/// The RDP curve of a whole protocol when every candidate and the final
/// model satisfy `base`.
pub fn protocol_curve(variant: Variant, base: &RdpCurve, mu: f64, q: f64) -> Result<RdpCurve> {
    let tuning = tuning_rdp(base, mu)?;
    match variant {
        Variant::Baseline => Ok(tuning),
        Variant::Variant1 => variant1_curve(&tuning, base, q),
        Variant::Variant2 => variant2_curve(&tuning, base, q),
    }
}

/// Inputs of the gradient-evaluation cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Dataset size.
    pub n: f64,
    /// Training epochs per model.
    pub epochs: f64,
    pub mu: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    /// Expected gradient evaluations of the requested protocol.
    pub gradient_evals: f64,
    /// Expected gradient evaluations of the baseline.
    pub baseline_evals: f64,
    /// `baseline_evals / gradient_evals`.
    pub ratio: f64,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0 && self.epochs > 0.0 && self.mu > 0.0) {
            return Err(domain("dataset size, epochs and mu must be positive"));
        }
        check_ratio(self.q)
    }
}

/// Expected gradient evaluations:
/// baseline `μ·n·E`, variant 1 `(μ·q·n + (1−q)·n)·E`, variant 2
/// `(μ·q·n + n)·E`.
pub fn expected_cost(model: &CostModel, variant: Variant) -> Result<CostEstimate> {
    model.validate()?;
    let CostModel { n, epochs, mu, q } = *model;
    let baseline = mu * n * epochs;
    let evals = match variant {
        Variant::Baseline => baseline,
        Variant::Variant1 => (mu * q * n + (1.0 - q) * n) * epochs,
        Variant::Variant2 => (mu * q * n + n) * epochs,
    };
    Ok(CostEstimate { gradient_evals: evals, baseline_evals: baseline, ratio: baseline / evals })
}
