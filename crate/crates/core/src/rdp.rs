//! Rényi-DP curves: order grids, the Gaussian mechanism, composition and
//! conversion to approximate `(ε, δ)`-DP.
//!
//! Every ε value is in nats. `f64::INFINITY` is the explicit "no bound at this
//! order" sentinel and propagates through composition, maxima and conversion.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::subsampling;

/// Fractional orders added to the default grid. They only help conversion;
/// integer-only bounds leave them at the sentinel.
pub const DEFAULT_FRACTIONAL_ORDERS: [f64; 3] = [1.25, 1.5, 1.75];
pub const DEFAULT_MAX_ORDER: u32 = 64;

/// A strictly increasing list of Rényi orders, all greater than one.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid {
    orders: Vec<f64>,
}

impl AlphaGrid {
    pub fn new(orders: Vec<f64>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidGrid("empty".into()));
        }
        if let Some(bad) = orders.iter().find(|a| !(a.is_finite() && **a > 1.0)) {
            return Err(Error::InvalidGrid(format!("order {bad} is not a finite value > 1")));
        }
        if orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("orders must be strictly increasing".into()));
        }
        if !orders.iter().any(|&a| is_integer(a)) {
            return Err(Error::InvalidGrid("needs at least one integer order >= 2".into()));
        }
        Ok(Self { orders })
    }

    /// Integer orders `2..=max` (requires `max >= 2`).
    pub fn integers(max: u32) -> Result<Self> {
        if max < 2 {
            return Err(Error::InvalidGrid(format!("max order {max} < 2")));
        }
        Self::new((2..=max).map(f64::from).collect())
    }

    /// The default fractional orders followed by integers `2..=max`.
    pub fn with_max(max: u32) -> Result<Self> {
        if max < 2 {
            return Err(Error::InvalidGrid(format!("max order {max} < 2")));
        }
        let mut orders = DEFAULT_FRACTIONAL_ORDERS.to_vec();
        orders.extend((2..=max).map(f64::from));
        Self::new(orders)
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn position(&self, alpha: f64) -> Option<usize> {
        self.orders.iter().position(|&a| a == alpha)
    }

    /// Largest integer order on the grid.
    pub fn max_integer_order(&self) -> u32 {
        self.orders
            .iter()
            .rev()
            .find(|&&a| is_integer(a))
            .map(|&a| a as u32)
            .expect("grid invariant: holds an integer order")
    }
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self::with_max(DEFAULT_MAX_ORDER).expect("default grid is valid")
    }
}

pub(crate) fn is_integer(alpha: f64) -> bool {
    alpha >= 2.0 && alpha.fract() == 0.0 && alpha <= f64::from(u32::MAX)
}

/// An RDP bound `ε(α)` for every order of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RdpCurve {
    grid: AlphaGrid,
    eps: Vec<f64>,
}

impl RdpCurve {
    pub fn new(grid: AlphaGrid, eps: Vec<f64>) -> Result<Self> {
        if eps.len() != grid.len() {
            return Err(domain(format!("curve has {} values for {} orders", eps.len(), grid.len())));
        }
        if let Some(bad) = eps.iter().find(|e| e.is_nan() || **e < 0.0) {
            return Err(domain(format!("invalid RDP value {bad}")));
        }
        Ok(Self { grid, eps })
    }

    pub fn zero(grid: AlphaGrid) -> Self {
        let eps = vec![0.0; grid.len()];
        Self { grid, eps }
    }

    /// Builds a curve by evaluating `f` at each order.
    pub fn try_from_fn(grid: AlphaGrid, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let eps = grid.orders().iter().map(|&a| f(a)).collect::<Result<Vec<_>>>()?;
        Self::new(grid, eps)
    }

    pub fn grid(&self) -> &AlphaGrid {
        &self.grid
    }

    pub fn orders(&self) -> &[f64] {
        self.grid.orders()
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn at(&self, alpha: f64) -> Option<f64> {
        self.grid.position(alpha).map(|i| self.eps[i])
    }

    /// `ε(α)`, or [`Error::MissingOrder`] when the grid lacks `α`.
    pub fn require(&self, alpha: f64) -> Result<f64> {
        self.at(alpha).ok_or(Error::MissingOrder(alpha))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.orders().iter().copied().zip(self.eps.iter().copied())
    }

    /// Pointwise sum, i.e. sequential composition of two mechanisms.
    pub fn add(&self, other: &RdpCurve) -> Result<RdpCurve> {
        self.zip_with(other, |a, b| a + b)
    }

    pub(crate) fn zip_with(&self, other: &RdpCurve, f: impl Fn(f64, f64) -> f64) -> Result<RdpCurve> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let eps = self.eps.iter().zip(&other.eps).map(|(&a, &b)| f(a, b)).collect();
        Ok(RdpCurve { grid: self.grid.clone(), eps })
    }

    pub fn is_finite(&self) -> bool {
        self.eps.iter().all(|e| e.is_finite())
    }

    /// CSV with header `alpha,eps`; the sentinel is written as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,eps\n");
        for (a, e) in self.iter() {
            out.push_str(&format!("{a},{e}\n"));
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    orders: Vec<f64>,
    eps: Vec<Option<f64>>,
}

// JSON has no infinity; the sentinel is written as `null`.
impl Serialize for RdpCurve {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CurveRepr {
            orders: self.grid.orders.clone(),
            eps: self.eps.iter().map(|&e| e.is_finite().then_some(e)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RdpCurve {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = CurveRepr::deserialize(d)?;
        let grid = AlphaGrid::new(repr.orders).map_err(serde::de::Error::custom)?;
        let eps = repr.eps.into_iter().map(|e| e.unwrap_or(f64::INFINITY)).collect();
        RdpCurve::new(grid, eps).map_err(serde::de::Error::custom)
    }
}

/// Declarative description of a base mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismSpec {
    Gaussian { sigma: f64, sensitivity: f64 },
    SubsampledGaussian { sigma: f64, gamma: f64 },
    Composed { inner: Box<MechanismSpec>, steps: u64 },
}

impl MechanismSpec {
    /// DP-SGD: `steps` compositions of the Poisson-subsampled Gaussian.
    pub fn dp_sgd(sigma: f64, gamma: f64, steps: u64) -> Self {
        MechanismSpec::Composed { inner: Box::new(MechanismSpec::SubsampledGaussian { sigma, gamma }), steps }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MechanismSpec::Gaussian { sigma, sensitivity } => {
                check_sigma(*sigma)?;
                if !(*sensitivity >= 0.0 && sensitivity.is_finite()) {
                    return Err(domain(format!("sensitivity must be >= 0, got {sensitivity}")));
                }
                Ok(())
            }
            MechanismSpec::SubsampledGaussian { sigma, gamma } => {
                check_sigma(*sigma)?;
                subsampling::check_ratio(*gamma)
            }
            MechanismSpec::Composed { inner, steps } => {
                if *steps == 0 {
                    return Err(domain("steps must be >= 1"));
                }
                inner.validate()
            }
        }
    }

    /// The RDP curve of this mechanism on `grid`.
    ///
    /// A subsampled Gaussian with ratio 1 is the plain Gaussian with unit
    /// sensitivity. For other ratios, fractional orders carry the sentinel.
    pub fn curve(&self, grid: &AlphaGrid) -> Result<RdpCurve> {
        self.validate()?;
        match self {
            MechanismSpec::Gaussian { sigma, sensitivity } => gaussian_curve(grid, *sigma, *sensitivity),
            MechanismSpec::SubsampledGaussian { sigma, gamma } => {
                let base = gaussian_curve(grid, *sigma, 1.0)?;
                if *gamma == 1.0 {
                    Ok(base)
                } else {
                    subsampling::subsample_curve(&base, *gamma)
                }
            }
            MechanismSpec::Composed { inner, steps } => Ok(compose(&inner.curve(grid)?, *steps)),
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("sigma must be > 0, got {sigma}")))
    }
}

/// An `(ε, δ)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyTarget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyTarget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let t = Self { epsilon, delta };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(domain(format!("target epsilon must be >= 0, got {}", self.epsilon)));
        }
        check_delta(self.delta)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Gaussian mechanism: `ε(α) = α Δ² / (2σ²)`.
pub fn gaussian_rdp(sigma: f64, sensitivity: f64, alpha: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(alpha > 1.0) {
        return Err(domain(format!("order must be > 1, got {alpha}")));
    }
    if !(sensitivity >= 0.0) {
        return Err(domain(format!("sensitivity must be >= 0, got {sensitivity}")));
    }
    Ok(alpha * sensitivity * sensitivity / (2.0 * sigma * sigma))
}

pub fn gaussian_curve(grid: &AlphaGrid, sigma: f64, sensitivity: f64) -> Result<RdpCurve> {
    RdpCurve::try_from_fn(grid.clone(), |a| gaussian_rdp(sigma, sensitivity, a))
}

/// `steps`-fold adaptive composition: `T · ε(α)` pointwise.
///
/// # Panics
/// If `steps == 0`.
pub fn compose(curve: &RdpCurve, steps: u64) -> RdpCurve {
    assert!(steps >= 1, "composition needs at least one step");
    let t = steps as f64;
    RdpCurve { grid: curve.grid.clone(), eps: curve.eps.iter().map(|&e| t * e).collect() }
}

/// Result of converting an RDP curve to approximate DP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConversion {
    pub epsilon: f64,
    pub delta: f64,
    /// Order attaining the optimum; `None` when no order gave a finite bound.
    pub order: Option<f64>,
}

/// `ln δ` from a single order: `(α−1)(ε′−ε) − ln α + (α−1) ln(1−1/α)`.
pub fn ln_delta_at_order(alpha: f64, rdp_eps: f64, epsilon: f64) -> f64 {
    let am1 = alpha - 1.0;
    am1 * (rdp_eps - epsilon) - alpha.ln() + am1 * (-1.0 / alpha).ln_1p()
}

/// The ε solving the single-order conversion for a given δ.
pub fn epsilon_at_order(alpha: f64, rdp_eps: f64, delta: f64) -> f64 {
    let am1 = alpha - 1.0;
    rdp_eps + (-delta.ln() - alpha.ln()) / am1 + (-1.0 / alpha).ln_1p()
}

// A zero Rényi divergence at any order forces identical output
// distributions, i.e. (0, 0)-DP.
fn zero_order(curve: &RdpCurve) -> Option<f64> {
    curve.iter().find(|&(_, e)| e == 0.0).map(|(a, _)| a)
}

/// Smallest ε over the grid such that the curve implies `(ε, δ)`-DP.
///
/// The result is clamped at zero. If every order is at the sentinel the
/// epsilon is `+inf` and `order` is `None`.
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<DpConversion> {
    check_delta(delta)?;
    if let Some(order) = zero_order(curve) {
        return Ok(DpConversion { epsilon: 0.0, delta, order: Some(order) });
    }
    let mut best = DpConversion { epsilon: f64::INFINITY, delta, order: None };
    for (alpha, e) in curve.iter() {
        let eps = epsilon_at_order(alpha, e, delta);
        if eps.is_finite() && eps < best.epsilon {
            best.epsilon = eps;
            best.order = Some(alpha);
        }
    }
    best.epsilon = best.epsilon.max(0.0);
    Ok(best)
}

/// Smallest δ over the grid such that the curve implies `(ε, δ)`-DP.
///
/// The value is not clamped at one; callers that need a meaningful δ
/// check `delta < 1` themselves.
pub fn rdp_to_delta(curve: &RdpCurve, epsilon: f64) -> Result<DpConversion> {
    if !(epsilon >= 0.0) {
        return Err(domain(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if let Some(order) = zero_order(curve) {
        return Ok(DpConversion { epsilon, delta: 0.0, order: Some(order) });
    }
    let mut best = DpConversion { epsilon, delta: f64::INFINITY, order: None };
    for (alpha, e) in curve.iter() {
        let d = ln_delta_at_order(alpha, e, epsilon).exp();
        if d < best.delta {
            best.delta = d;
            best.order = Some(alpha);
        }
    }
    Ok(best)
}

/// Mechanisms on disjoint shards: pointwise maximum of their curves.
pub fn parallel_compose(curves: &[RdpCurve]) -> Result<RdpCurve> {
    let (first, rest) = curves.split_first().ok_or_else(|| domain("need at least one curve"))?;
    rest.iter().try_fold(first.clone(), |acc, c| acc.zip_with(c, f64::max))
}

/// Uniform bound over a set of candidate mechanisms: pointwise maximum.
///
/// Same arithmetic as [`parallel_compose`]; this is the bound a randomly
/// picked candidate satisfies.
pub fn uniform_grid_bound(curves: &[RdpCurve]) -> Result<RdpCurve> {
    parallel_compose(curves)
}
