use lbkde::numerics::{integrate, Grid};
use lbkde::resampling::{resample, BootstrapScheme, SchemeKind};
use lbkde::seed::rng_for;
use lbkde::selectors::{cv_score, h_cv, h_rt, leave_one_out_term, BracketPolicy};
use lbkde::{curvature_functional, jones_estimate, JonesEstimator, Kernel, Sample};
use proptest::prelude::*;

fn kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![Just(Kernel::Epanechnikov), Just(Kernel::Gaussian)]
}

fn positive_values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..5.0, 5..max_len)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimate_is_scale_equivariant(
        ys in positive_values(40),
        h in 0.05f64..1.0,
        lambda in 0.1f64..10.0,
        t in 0.0f64..1.0,
        k in kernel(),
    ) {
        let s = Sample::new(ys.clone()).unwrap();
        let scaled = s.scaled(lambda).unwrap();
        let base = JonesEstimator::new(&s, h, k).unwrap();
        let big = JonesEstimator::new(&scaled, lambda * h, k).unwrap();
        let y = s.min() + t * (s.max() - s.min());
        let a = base.eval(y);
        let b = lambda * big.eval(lambda * y);
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn estimate_has_unit_mass(ys in positive_values(30), h in 0.05f64..1.0, k in kernel()) {
        let s = Sample::new(ys).unwrap();
        let reach = k.effective_radius() * h;
        let grid = Grid::new(s.min() - reach, s.max() + reach, 8193).unwrap();
        let est = jones_estimate(&s, h, k, &grid).unwrap();
        prop_assert!((est.integral() - 1.0).abs() < 1e-4, "mass {}", est.integral());
    }

    #[test]
    fn cv_score_splits_into_square_and_loo(ys in positive_values(25), h in 0.1f64..1.0, k in kernel()) {
        let s = Sample::new(ys).unwrap();
        let est = JonesEstimator::new(&s, h, k).unwrap();
        let reach = k.effective_radius() * h;
        let grid = Grid::new(s.min() - reach, s.max() + reach, 16385).unwrap();
        let sq: Vec<f64> = grid.iter().map(|y| est.eval(y).powi(2)).collect();
        let square = integrate(&sq, &grid);
        let expected = square - 2.0 * leave_one_out_term(&s, h, k).unwrap();
        let got = cv_score(&s, h, k).unwrap();
        prop_assert!((got - expected).abs() < 1e-5 * square.max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn rule_of_thumb_scales(ys in positive_values(40), lambda in 0.1f64..10.0, k in kernel()) {
        let s = Sample::new(ys).unwrap();
        let a = h_rt(&s, k).unwrap().h;
        let b = h_rt(&s.scaled(lambda).unwrap(), k).unwrap().h;
        prop_assert!(rel(b, lambda * a) < 1e-10);
    }

    #[test]
    fn curvature_is_nonnegative(ys in positive_values(30), g in 0.05f64..2.0) {
        let s = Sample::new(ys).unwrap();
        let r = curvature_functional(&s, g, Kernel::Gaussian).unwrap();
        prop_assert!(r >= 0.0 && r.is_finite());
    }

    #[test]
    fn resampled_values_are_positive(ys in positive_values(30), g in 0.05f64..2.0, seed in any::<u64>()) {
        let s = Sample::new(ys).unwrap();
        for kind in [SchemeKind::JonesPilot, SchemeKind::CommonKdePilot] {
            let scheme = BootstrapScheme::new(kind, g, Kernel::Gaussian).unwrap();
            let r = resample(&s, &scheme, &mut rng_for(seed, &[1])).unwrap();
            prop_assert_eq!(r.len(), s.len());
            prop_assert!(r.values().iter().all(|&y| y > 0.0 && y.is_finite()));
        }
    }

    #[test]
    fn resampling_is_reproducible(ys in positive_values(30), seed in any::<u64>()) {
        let s = Sample::new(ys).unwrap();
        let scheme = BootstrapScheme::new(SchemeKind::CommonKdePilot, 0.3, Kernel::Gaussian).unwrap();
        let a = resample(&s, &scheme, &mut rng_for(seed, &[2, 7])).unwrap();
        let b = resample(&s, &scheme, &mut rng_for(seed, &[2, 7])).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cv_minimiser_scales(ys in positive_values(30), lambda in 0.2f64..5.0) {
        let s = Sample::new(ys).unwrap();
        let policy = BracketPolicy::default();
        let k = Kernel::Epanechnikov;
        let a = h_cv(&s, k, None, &policy).unwrap().h;
        let b = h_cv(&s.scaled(lambda).unwrap(), k, None, &policy).unwrap().h;
        prop_assert!(rel(b, lambda * a) < 1e-3, "{b} vs {}", lambda * a);
    }
}
