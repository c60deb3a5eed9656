use mcshoot_core::numeric::integrate;
use mcshoot_core::regularization::{phi, primitive, RegularizedOperator};
use proptest::prelude::*;

const SLACK: f64 = 1e-12;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn flux_ordering_in_n(n in 1u32..=16, s in -50.0f64..50.0) {
        let a = RegularizedOperator::new(n);
        let b = RegularizedOperator::new(n + 1);
        let (pa, pb, p) = (a.phi(s) * s, b.phi(s) * s, phi(s) * s);
        prop_assert!(pa >= pb - SLACK, "n={n} s={s}: {pa} < {pb}");
        prop_assert!(pb >= p - SLACK);
        prop_assert!(p >= 0.0);
    }

    #[test]
    fn flux_increasing_primitive_convex(n in 1u32..=16, s in -50.0f64..50.0, h in 1e-3f64..0.5) {
        let a = RegularizedOperator::new(n);
        prop_assert!(a.phi(s + h) > a.phi(s));
        let second = a.primitive(s + h) - 2.0 * a.primitive(s) + a.primitive(s - h);
        prop_assert!(second >= -SLACK);
    }

    #[test]
    fn primitive_dominates_exact(n in 1u32..=16, s in -50.0f64..50.0) {
        let a = RegularizedOperator::new(n);
        prop_assert!(a.primitive(s) >= primitive(s) - SLACK);
    }

    #[test]
    fn primitive_below_work(n in 1u32..=16, s in -50.0f64..50.0) {
        let a = RegularizedOperator::new(n);
        prop_assert!(a.primitive(s) <= a.phi(s) * s + SLACK);
        prop_assert!(a.k(s) >= -SLACK);
    }

    #[test]
    fn inverse_grows_faster_than_identity(n in 1u32..=16, v in -50.0f64..50.0) {
        let a = RegularizedOperator::new(n);
        prop_assert!(v * a.phi_inv(v) >= v * v - SLACK);
        prop_assert!((a.phi(a.phi_inv(v)) - v).abs() <= SLACK * v.abs().max(1.0));
    }

    #[test]
    fn kernel_matches_definition(n in 1u32..=16, s in -50.0f64..50.0) {
        let a = RegularizedOperator::new(n);
        let direct = s * a.phi(s) - a.primitive(s);
        prop_assert!((a.k(s) - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }
}

#[test]
fn kernel_grows_along_dyadic_points() {
    for n in 1..=16 {
        let a = RegularizedOperator::new(n);
        for sign in [-1.0, 1.0] {
            let vals: Vec<f64> = (0..40).map(|j| a.k(sign * 2f64.powi(j))).collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]), "n={n}");
            assert!(*vals.last().unwrap() > 1e6);
        }
    }
}

#[test]
fn primitive_matches_quadrature() {
    for n in [1, 2, 5, 16] {
        let a = RegularizedOperator::new(n);
        for s in [-37.5, -3.0, -0.4, 0.9, 2.0, 16.5, 50.0] {
            let q = integrate(|t| a.phi(t), 0.0, s, 1e-14, 1e-15);
            assert!((q - a.primitive(s)).abs() < 1e-10, "n={n} s={s}");
        }
    }
}
