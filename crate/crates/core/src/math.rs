//! Log-space helpers shared by the binomial-expansion bounds.

/// `log(sum(exp(x)))` over the given terms, in one pass over a slice.
///
/// `-inf` terms are ignored, a `+inf` term makes the result `+inf`, and an
/// empty or all `-inf` input yields `-inf`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = terms.iter().map(|&t| (t - max).exp()).sum();
    max + sum.ln()
}

/// Stable `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Natural log of the binomial coefficient `C(n, k)`, via log-gamma.
pub fn ln_binomial(n: u32, k: u32) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    let n = f64::from(n);
    let k = f64::from(k);
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

/// `k * ln(x)` with the convention `0 * ln(0) = 0`.
pub fn xlnx(k: f64, x: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * x.ln()
    }
}

/// `k * ln(1 - x)` with the convention `0 * ln(0) = 0`.
pub fn xln1m(k: f64, x: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * (-x).ln_1p()
    }
}

/// `k * eps` with the convention that a zero multiplier never reads `eps`.
pub fn scaled(k: f64, eps: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * eps
    }
}
