//! Privacy amplification by Poisson subsampling for integer-order RDP
//! bounds, under add/remove adjacency.

use crate::error::{domain, Result};
use crate::math::{ln_binomial, log_sum_exp, scaled, xln1m, xlnx};
use crate::rdp::{is_integer, RdpCurve};

pub(crate) fn check_ratio(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(domain(format!("sampling ratio must lie in [0, 1], got {gamma}")))
    }
}

pub(crate) fn check_integer_order(alpha: u32) -> Result<()> {
    if alpha >= 2 {
        Ok(())
    } else {
        Err(domain(format!("order must be an integer >= 2, got {alpha}")))
    }
}

/// RDP of `M ∘ subsample_Poisson(γ)` at integer order `α`, given the RDP
/// curve of `M` on every integer order `2..=α`.
///
/// ```text
/// ε′(α) = 1/(α−1) · log( (1−γ)^{α−1}(αγ−γ+1)
///                      + C(α,2) γ² (1−γ)^{α−2} e^{ε(2)}
///                      + 3 Σ_{j=3..α} C(α,j) γ^j (1−γ)^{α−j} e^{(j−1)ε(j)} )
/// ```
///
/// The first term is the `j = 0, 1` part of the binomial expansion of
/// `((1−γ) + γ)^α = 1`, so the argument of the logarithm is `1 + S` with
/// `S = Σ_{j≥2} C(α,j) γ^j (1−γ)^{α−j} (w_j e^{(j−1)ε(j)} − 1)`, `w_2 = 1`,
/// `w_j = 3`. Every term of `S` is nonnegative; `log S` is assembled with one
/// log-sum-exp and the result is `log1p(S)/(α−1)`. This keeps tiny bounds
/// (small γ) from rounding to zero.
pub fn subsample_rdp(base: &RdpCurve, gamma: f64, alpha: u32) -> Result<f64> {
    check_ratio(gamma)?;
    check_integer_order(alpha)?;
    let a = f64::from(alpha);

    let mut terms = Vec::with_capacity(alpha as usize);
    for j in 2..=alpha {
        let jf = f64::from(j);
        let ej = base.require(jf)?;
        let coef = ln_binomial(alpha, j) + xlnx(jf, gamma) + xln1m(a - jf, gamma);
        // A vanishing coefficient kills the term even against an infinite bound.
        if coef == f64::NEG_INFINITY {
            continue;
        }
        let x = scaled(jf - 1.0, ej);
        // log(w e^x − 1)
        let excess = if j > 2 {
            x + (3.0 - (-x).exp()).ln()
        } else if x > 1.0 {
            x + (-(-x).exp()).ln_1p()
        } else {
            x.exp_m1().ln()
        };
        terms.push(coef + excess);
    }
    let ln_s = log_sum_exp(&terms);
    if ln_s == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let ln_total = if ln_s > 0.0 { ln_s + (-ln_s).exp().ln_1p() } else { ln_s.exp().ln_1p() };
    // Never report an exact zero for a positive excess; a zero bound means
    // perfect privacy downstream.
    Ok((ln_total / (a - 1.0)).max(f64::MIN_POSITIVE))
}

/// [`subsample_rdp`] on every integer order of the base grid; fractional
/// orders carry the `+inf` sentinel.
pub fn subsample_curve(base: &RdpCurve, gamma: f64) -> Result<RdpCurve> {
    check_ratio(gamma)?;
    RdpCurve::try_from_fn(base.grid().clone(), |alpha| {
        if is_integer(alpha) {
            subsample_rdp(base, gamma, alpha as u32)
        } else {
            Ok(f64::INFINITY)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdp::{gaussian_curve, AlphaGrid};

    fn gauss(sigma: f64) -> RdpCurve {
        gaussian_curve(&AlphaGrid::default(), sigma, 1.0).unwrap()
    }

    #[test]
    fn large_bounds_stay_finite() {
        let grid = AlphaGrid::integers(64).unwrap();
        let base = gaussian_curve(&grid, 0.01, 1.0).unwrap();
        let sub = subsample_curve(&base, 0.01).unwrap();
        assert!(sub.is_finite());
        assert!(sub.eps().iter().zip(base.eps()).all(|(s, b)| s <= b));
    }

    #[test]
    fn gamma_zero_is_free() {
        assert_eq!(subsample_rdp(&gauss(1.0), 0.0, 5).unwrap(), 0.0);
        let c = subsample_curve(&gauss(1.0), 0.0).unwrap();
        for (a, e) in c.iter() {
            if is_integer(a) {
                assert_eq!(e, 0.0);
            } else {
                assert_eq!(e, f64::INFINITY);
            }
        }
    }

    #[test]
    fn gamma_one_at_order_two_is_identity() {
        let b = gauss(1.3);
        let v = subsample_rdp(&b, 1.0, 2).unwrap();
        assert!((v - b.at(2.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn gamma_one_curve_dominates_base() {
        let b = gauss(2.0);
        let c = subsample_curve(&b, 1.0).unwrap();
        for (a, e) in c.iter().filter(|(a, _)| is_integer(*a)) {
            assert!(e >= b.at(a).unwrap() - 1e-12, "order {a}");
        }
    }

    #[test]
    fn missing_orders_and_bad_ratio() {
        let short = gaussian_curve(&AlphaGrid::integers(4).unwrap(), 1.0, 1.0).unwrap();
        assert!(subsample_rdp(&short, 0.1, 4).is_ok());
        assert!(matches!(subsample_rdp(&short, 0.1, 5), Err(crate::Error::MissingOrder(_))));
        assert!(subsample_rdp(&short, 1.1, 2).is_err());
        assert!(subsample_rdp(&short, -0.1, 2).is_err());
        assert!(subsample_rdp(&short, 0.1, 1).is_err());
    }

    #[test]
    fn stays_finite_at_extreme_orders() {
        let b = gauss(0.5);
        for &g in &[1e-4, 0.5, 1.0 - 1e-12] {
            let v = subsample_rdp(&b, g, 64).unwrap();
            assert!(v.is_finite() && v >= 0.0, "gamma {g}: {v}");
        }
    }

    #[test]
    fn infinite_base_propagates() {
        let grid = AlphaGrid::integers(4).unwrap();
        let b = RdpCurve::new(grid, vec![0.1, f64::INFINITY, 0.3]).unwrap();
        assert_eq!(subsample_rdp(&b, 0.1, 4).unwrap(), f64::INFINITY);
        // a zero coefficient never reads the bound
        assert_eq!(subsample_rdp(&b, 0.0, 4).unwrap(), 0.0);
    }
}
