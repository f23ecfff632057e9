//! Frozen reference values. The constants were produced by an independent
//! 40-digit evaluation (mpmath) and are compared against the library here.

// Constants keep every digit the oracle printed.
#![allow(clippy::excessive_precision)]

use dptune_core::calibration::{dp_sgd_epsilon, SIGMA_RTOL};
use dptune_core::quadrature::{subsampled_gaussian_divergence, Direction, QuadratureRule, DEFAULT_INTERVALS};
use dptune_core::*;

fn quarter_grid() -> AlphaGrid {
    // 1.25, 1.5, ..., 256
    AlphaGrid::new((0..=1019).map(|i| 1.25 + 0.25 * f64::from(i)).collect()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn gaussian_epsilon_on_quarter_grid() {
    const ON_GRID: f64 = 4.728_924_276_256_027_3;
    // Minimum over a 10x denser grid; the quarter grid can only be worse.
    const DENSE: f64 = 4.728_387_034_632_618_8;
    let curve = gaussian_curve(&quarter_grid(), 1.0, 1.0).unwrap();
    let conv = rdp_to_dp(&curve, 1e-5).unwrap();
    assert!(rel(conv.epsilon, ON_GRID) < 1e-12, "{}", conv.epsilon);
    assert!(conv.epsilon >= DENSE && conv.epsilon - DENSE < 1e-3);
}

#[test]
fn gaussian_delta_on_quarter_grid() {
    const ON_GRID: f64 = 0.018_002_777_549_420_014;
    const DENSE: f64 = 0.017_985_450_696_608_473;
    let curve = gaussian_curve(&quarter_grid(), 2.0, 1.0).unwrap();
    let conv = rdp_to_delta(&curve, 1.0).unwrap();
    assert!(rel(conv.delta, ON_GRID) < 1e-11, "{}", conv.delta);
    assert!(conv.delta >= DENSE);
}

#[test]
fn oracle_at_order_four() {
    const ADD: f64 = 5.715_580_737_173_408_6e-5;
    const REMOVE: f64 = 5.595_180_238_088_260_2e-5;
    let simpson = renyi_quadrature_oracle(2.0, 0.01, 4.0).unwrap();
    assert!(rel(simpson, ADD) < 1e-9, "{simpson}");
    for (dir, want) in [(Direction::AddOne, ADD), (Direction::RemoveOne, REMOVE)] {
        let s =
            subsampled_gaussian_divergence(2.0, 0.01, 4.0, dir, QuadratureRule::Simpson, DEFAULT_INTERVALS).unwrap();
        let gl = subsampled_gaussian_divergence(2.0, 0.01, 4.0, dir, QuadratureRule::GaussLegendre, 4096).unwrap();
        assert!(rel(s, gl) < 1e-9, "{dir:?}: {s} vs {gl}");
        assert!(rel(s, want) < 1e-9, "{dir:?}: {s} vs {want}");
    }
}

#[test]
fn subsampled_bound_at_order_eight() {
    const ORACLE: f64 = 1.157_561_479_299_103_2e-4;
    const BOUND: f64 = 1.488_177_229_280_095_3e-4;
    const CEILING: f64 = 1.156_944_612_666_872_8;
    let grid = AlphaGrid::integers(8).unwrap();
    let base = gaussian_curve(&grid, 2.0, 1.0).unwrap();
    let v = subsample_rdp(&base, 0.01, 8).unwrap();
    assert!(rel(v, BOUND) < 1e-10, "{v}");
    assert!((ORACLE..=CEILING).contains(&v));
    let q = renyi_quadrature_oracle(2.0, 0.01, 8.0).unwrap();
    assert!(rel(q, ORACLE) < 1e-9, "{q}");
}

#[test]
fn subsampled_curve_dominates_oracle_per_order() {
    let grid = AlphaGrid::integers(32).unwrap();
    let base = gaussian_curve(&grid, 2.0, 1.0).unwrap();
    let sub = subsample_curve(&base, 0.01).unwrap();
    for (alpha, v) in sub.iter() {
        let oracle = renyi_quadrature_oracle(2.0, 0.01, alpha).unwrap();
        assert!(v >= oracle, "order {alpha}: {v} < {oracle}");
    }
}

#[test]
fn sigma_for_fifty_epochs_at_four() {
    let target = PrivacyTarget::new(4.0, 1e-5).unwrap();
    let c = calibrate_sigma(0.01, 5000, target).unwrap();
    // Scan the forward accountant around the returned σ: every point below
    // the tolerance band fails the target, every point at or above meets it.
    for i in 0..100 {
        let s = c.sigma * (0.95 + 0.1 * f64::from(i) / 99.0);
        let eps = dp_sgd_epsilon(s, 0.01, 5000, 1e-5).unwrap();
        if s >= c.sigma {
            assert!(eps <= 4.0, "σ={s}: {eps}");
        } else if s < c.sigma * (1.0 - 2.0 * SIGMA_RTOL) {
            assert!(eps > 4.0, "σ={s}: {eps}");
        }
    }
    assert!(rel(c.sigma, 1.146_4) < 1e-3, "{}", c.sigma);
}

#[test]
fn steps_at_sigma_two() {
    let target = PrivacyTarget::new(2.0, 1e-5).unwrap();
    let s = calibrate_steps(0.01, 2.0, target).unwrap();
    assert!(dp_sgd_epsilon(2.0, 0.01, s.steps, 1e-5).unwrap() <= 2.0);
    assert!(dp_sgd_epsilon(2.0, 0.01, s.steps + 1, 1e-5).unwrap() > 2.0);
    assert_eq!(s.steps, 5_484);
}

#[test]
fn alpha_line_at_two_thousand_steps() {
    // With the factor 3 on the j >= 3 tail the bound keeps
    // 2·Σ C(α,j)γ^j(1−γ)^{α−j} as σ → ∞; at γ = 0.01, T = 2000 the smallest
    // reachable slope over orders 2..=64 is 0.025628 (attained at α = 64).
    const SLOPE_FLOOR: f64 = 0.025_628_262_496_779_533;
    assert!(matches!(calibrate_sigma_alpha_line(0.01, 2000, 1e-3), Err(Error::NoSolution(_))));
    assert!(calibrate_sigma_alpha_line(0.01, 2000, SLOPE_FLOOR * 0.999).is_err());

    let c = calibrate_sigma_alpha_line(0.01, 2000, 0.1).unwrap();
    let grid = AlphaGrid::integers(64).unwrap();
    let line = |sigma: f64| {
        let step = MechanismSpec::dp_sgd(sigma, 0.01, 1).curve(&grid).unwrap();
        step.iter().map(|(a, e)| 2000.0 * e / a).fold(0.0, f64::max)
    };
    assert!(line(c.sigma) <= 0.1);
    assert!(line(c.sigma * (1.0 - 1e-3)) > 0.1);
}
