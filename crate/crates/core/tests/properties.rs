//! Randomized invariants over the transform catalog and the reflection
//! machinery.

use corv::interval::Interval;
use corv::samplers::{reflect_into, MAX_FOLDS};
use corv::transforms::{Transform, TransformKind, ALL_KINDS};
use proptest::prelude::*;

fn any_kind() -> impl Strategy<Value = TransformKind> {
    prop::sample::select(ALL_KINDS.to_vec())
}

proptest! {
    /// f(f^{-1}(theta)) recovers theta across each codomain interior.
    #[test]
    fn inverse_then_forward_recovers_theta(kind in any_kind(), u in 1e-6f64..1.0) {
        let t = Transform::new(kind);
        let cod = t.codomain();
        let theta = match (cod.lower_finite(), cod.upper_finite()) {
            (true, true) => cod.lower + (cod.upper - cod.lower) * (0.999_998 * u + 1e-6),
            (true, false) => cod.lower + 20.0 * u + 1e-9,
            _ => 40.0 * u - 20.0,
        };
        let back = t.eval(t.inverse(theta));
        prop_assert!((back - theta).abs() <= 1e-9 * theta.abs().max(1.0),
            "{}: {theta} -> {back}", t.name());
    }

    /// Transforms are strictly increasing wherever f64 can resolve it.
    #[test]
    fn strictly_increasing(kind in any_kind(), phi in -30.0f64..29.0) {
        let t = Transform::new(kind);
        prop_assert!(t.eval(phi + 0.5) > t.eval(phi));
    }

    /// The closed-form ratio always matches the derivative quotient where
    /// the denominator is healthy.
    #[test]
    fn ratio_vs_quotient(kind in any_kind(), phi in -25.0f64..25.0) {
        let t = Transform::new(kind);
        let d1 = t.deriv1(phi);
        prop_assume!(d1 > 1e-12);
        let quotient = t.deriv2(phi) / d1;
        let ratio = t.log_deriv_ratio(phi);
        let denom = ratio.abs().max(quotient.abs()).max(1e-8);
        prop_assert!(((ratio - quotient) / denom).abs() <= 1e-8);
    }

    /// Reflection always lands inside the closed interval and agrees with
    /// the closed-form fold (modular arithmetic with period 2*width).
    #[test]
    fn reflection_lands_inside(x in -50.0f64..50.0, lo in -3.0f64..0.0, w in 0.5f64..4.0) {
        let domain = Interval::new(lo, lo + w).unwrap();
        let (folded, _) = reflect_into(x, &domain, 10_000).unwrap();
        prop_assert!(domain.contains_closed(folded));
        let y = (x - lo).rem_euclid(2.0 * w);
        let oracle = lo + y.min(2.0 * w - y);
        prop_assert!((folded - oracle).abs() <= 1e-9 * (1.0 + x.abs()), "{folded} vs {oracle}");
    }

    /// Half-line reflection is the absolute value.
    #[test]
    fn half_line_reflection_is_abs(x in -100.0f64..100.0) {
        let domain = Interval::positive_half_line();
        let (folded, folds) = reflect_into(x, &domain, MAX_FOLDS).unwrap();
        prop_assert_eq!(folded, x.abs());
        prop_assert_eq!(folds, u32::from(x < 0.0));
    }

    /// Rescaled unit-codomain transforms stay consistent with their base.
    #[test]
    fn rescaling_is_affine(u in 0.01f64..0.99, phi in -10.0f64..10.0) {
        let lo = -2.0 + u;
        let hi = 1.0 + 2.0 * u;
        for kind in [TransformKind::Sigmoid, TransformKind::Arctan, TransformKind::Softsign] {
            let base = Transform::new(kind);
            let scaled = base.rescaled_to(lo, hi).unwrap();
            let expect = lo + (hi - lo) * base.eval(phi);
            prop_assert!((scaled.eval(phi) - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            prop_assert!((scaled.deriv1(phi) - (hi - lo) * base.deriv1(phi)).abs() <= 1e-12);
            prop_assert_eq!(scaled.log_deriv_ratio(phi), base.log_deriv_ratio(phi));
        }
    }
}
