use dptune_core::calibration::dp_sgd_epsilon;
use dptune_core::*;
use proptest::prelude::*;

fn grid() -> AlphaGrid {
    AlphaGrid::default()
}

/// Nondecreasing positive finite curve on the default grid.
fn finite_curve() -> impl Strategy<Value = RdpCurve> {
    let n = grid().len();
    (0.01f64..2.0, prop::collection::vec(0.0f64..0.2, n)).prop_map(|(start, steps)| {
        let eps = steps
            .iter()
            .scan(start, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect();
        RdpCurve::new(grid(), eps).unwrap()
    })
}

fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaussian_scales(sigma in 0.05f64..50.0, sens in 0.0f64..10.0, alpha in 1.01f64..256.0, k in 0.1f64..10.0) {
        let e = gaussian_rdp(sigma, sens, alpha).unwrap();
        prop_assert!(close(gaussian_rdp(sigma, sens, k * alpha).unwrap(), k * e, 1e-14));
        prop_assert!(close(gaussian_rdp(sigma, k.sqrt() * sens, alpha).unwrap(), k * e, 1e-14));
        prop_assert!(close(gaussian_rdp(k.sqrt() * sigma, sens, alpha).unwrap(), e / k, 1e-14));
    }

    #[test]
    fn composition_adds(c in finite_curve(), a in 1u64..10_000, b in 1u64..10_000) {
        let sum = compose(&c, a).add(&compose(&c, b)).unwrap();
        let whole = compose(&c, a + b);
        for (x, y) in sum.eps().iter().zip(whole.eps()) {
            prop_assert!(close(*x, *y, 1e-12));
        }
    }

    #[test]
    fn conversion_monotone(c in finite_curve(), d1 in 1e-12f64..0.5, d2 in 1e-12f64..0.5, e1 in 0.0f64..8.0, e2 in 0.0f64..8.0) {
        let (lo, hi) = (d1.min(d2), d1.max(d2));
        prop_assert!(rdp_to_dp(&c, hi).unwrap().epsilon <= rdp_to_dp(&c, lo).unwrap().epsilon);
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        if hi > lo {
            prop_assert!(rdp_to_delta(&c, hi).unwrap().delta < rdp_to_delta(&c, lo).unwrap().delta);
        }
    }

    #[test]
    fn conversion_round_trip(c in finite_curve(), delta in 1e-12f64..0.5) {
        let eps = rdp_to_dp(&c, delta).unwrap().epsilon;
        let back = rdp_to_delta(&c, eps).unwrap().delta;
        prop_assert!(back <= delta * (1.0 + 1e-9), "{back} > {delta}");
    }

    #[test]
    fn max_composition_is_a_semilattice(a in finite_curve(), b in finite_curve(), c in finite_curve()) {
        let pc = |xs: &[RdpCurve]| parallel_compose(xs).unwrap();
        prop_assert_eq!(pc(&[a.clone(), a.clone()]), a.clone());
        prop_assert_eq!(pc(&[a.clone(), b.clone()]), pc(&[b.clone(), a.clone()]));
        let left = pc(&[pc(&[a.clone(), b.clone()]), c.clone()]);
        let right = pc(&[a.clone(), pc(&[b.clone(), c.clone()])]);
        prop_assert_eq!(left, right);
    }

    #[test]
    fn subsampling_between_zero_and_cap(sigma in 0.3f64..20.0, g1 in 0.0f64..=1.0, g2 in 0.0f64..=1.0, alpha in 2u32..=64) {
        let base = gaussian_curve(&AlphaGrid::integers(64).unwrap(), sigma, 1.0).unwrap();
        let (lo, hi) = (g1.min(g2), g1.max(g2));
        let v_lo = subsample_rdp(&base, lo, alpha).unwrap();
        let v_hi = subsample_rdp(&base, hi, alpha).unwrap();
        prop_assert!(v_lo <= v_hi * (1.0 + 1e-12), "{v_lo} > {v_hi}");
        let cap = base.require(f64::from(alpha)).unwrap() + 3f64.ln() / f64::from(alpha - 1);
        prop_assert!(v_hi <= cap * (1.0 + 1e-12));
        prop_assert!(v_hi.is_finite());
    }

    #[test]
    fn tuning_dominates_base(c in finite_curve(), mu in 1.0f64..100.0) {
        let t = tuning_rdp(&c, mu).unwrap();
        for (x, y) in t.eps().iter().zip(c.eps()) {
            prop_assert!(x >= y);
        }
    }

    #[test]
    fn variant1_continuous_in_q(a in finite_curve(), b in finite_curve(), q in 0.0f64..0.999, alpha in 2u32..=64) {
        let v = variant1_rdp(&a, &b, q, alpha).unwrap();
        let w = variant1_rdp(&a, &b, q + 1e-7, alpha).unwrap();
        prop_assert!(v.is_finite());
        prop_assert!((v - w).abs() < 1e-3, "{v} vs {w}");
    }

    #[test]
    fn protocol_epsilon_monotone(mu1 in 0.5f64..60.0, mu2 in 0.5f64..60.0, t1 in 100u64..6000, t2 in 100u64..6000, q in 0.05f64..0.95) {
        let (mu_lo, mu_hi) = (mu1.min(mu2), mu1.max(mu2));
        let (t_lo, t_hi) = (t1.min(t2), t1.max(t2));
        let g = grid();
        let base = |t| MechanismSpec::dp_sgd(2.0, 0.01, t).curve(&g).unwrap();
        let eps = |v, b: &RdpCurve, mu| rdp_to_dp(&protocol_curve(v, b, mu, q).unwrap(), 1e-5).unwrap().epsilon;
        for v in Variant::ALL {
            let b = base(t_lo);
            prop_assert!(eps(v, &b, mu_lo) <= eps(v, &b, mu_hi) + 1e-12);
            prop_assert!(eps(v, &b, mu_lo) <= eps(v, &base(t_hi), mu_lo) + 1e-12);
        }
    }

    #[test]
    fn extrapolation_keeps_noise_and_privacy(eta in 1e-4f64..10.0, sigma in 0.1f64..10.0, clip in 0.01f64..10.0,
                                              gamma in 1e-3f64..=1.0, steps in 1u64..100_000, m in 10usize..100_000, n in 10usize..100_000) {
        let p = HyperParams { eta, clip, gamma, steps, optimizer: Optimizer::Sgd };
        let e = extrapolate(&p, m, n);
        let before = injected_noise_variance(p.eta, sigma, clip, gamma, m as f64, steps);
        let after = injected_noise_variance(e.eta, sigma, clip, e.gamma, n as f64, e.steps);
        prop_assert!(close(before, after, 1e-12));
        prop_assert_eq!((e.gamma, e.steps), (p.gamma, p.steps));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn subsampling_bounds_oracle(sigma in 0.7f64..6.0, gamma in 1e-3f64..0.3, alpha in 2u32..=12) {
        let base = gaussian_curve(&AlphaGrid::integers(12).unwrap(), sigma, 1.0).unwrap();
        let bound = subsample_rdp(&base, gamma, alpha).unwrap();
        let oracle = renyi_quadrature_oracle(sigma, gamma, f64::from(alpha)).unwrap();
        prop_assert!(bound >= oracle, "{bound} < {oracle}");
    }

    #[test]
    fn calibrated_sigma_monotone(gamma in 0.002f64..0.2, steps in 10u64..3000, eps in 0.5f64..8.0, f in 1.05f64..3.0) {
        let target = |e| PrivacyTarget::new(e, 1e-5).unwrap();
        // An unreachable target needs unbounded noise.
        let s = |g: f64, t: u64, e: f64| match calibrate_sigma(g, t, target(e)) {
            Ok(c) => c.sigma,
            Err(Error::NoSolution(_)) => f64::INFINITY,
            Err(e) => panic!("{e}"),
        };
        let here = s(gamma, steps, eps);
        prop_assume!(here.is_finite());
        // within one bisection tolerance
        let slack = 1.0 + 2.0 * dptune_core::calibration::SIGMA_RTOL;
        prop_assert!(s(gamma, steps, eps * f) <= here * slack);
        prop_assert!(s(gamma, (steps as f64 * f) as u64, eps) * slack >= here);
        prop_assert!(s((gamma * f).min(1.0), steps, eps) * slack >= here);
        prop_assert!(dp_sgd_epsilon(here, gamma, steps, 1e-5).unwrap() <= eps);
    }
}

#[test]
fn grid_bound_dominates_members() {
    // Two batch sizes on 60k examples, 10..40 epochs.
    let n = 60_000.0;
    let mut entries = Vec::new();
    for b in [128.0, 256.0] {
        for epochs in [10.0, 20.0, 30.0, 40.0] {
            let gamma = b / n;
            entries.push(GridEntry { gamma, steps: (epochs / gamma).round() as u64 });
        }
    }
    let cal = grid_uniform_curve(&entries, PrivacyTarget::new(2.0, 1e-5).unwrap()).unwrap();
    for c in &cal.curves {
        for (u, e) in cal.uniform.eps().iter().zip(c.eps()) {
            assert!(u >= e);
        }
        assert!(rdp_to_dp(c, 1e-5).unwrap().epsilon <= 2.0);
    }
}
