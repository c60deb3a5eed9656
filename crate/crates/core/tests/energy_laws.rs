use mcshoot_core::integrator::{energy_profile, flux_identity_residual, theta_rate};
use mcshoot_core::{integrate_cauchy, Nonlinearity, Problem, RegularizedOperator, WeightFamily, WeightFunction};
use proptest::prelude::*;

fn problem(w: WeightFamily, lambda: f64, p: f64) -> Problem {
    Problem::new(WeightFunction::new(w).unwrap(), Nonlinearity::prototype(lambda, p).unwrap())
}

fn spread(e: &[(f64, f64)]) -> f64 {
    let (lo, hi) = e.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
    hi - lo
}

#[test]
fn autonomous_energy_is_conserved() {
    let cases = [(1.0, 3.0, 8, 0.5), (1.0, 3.0, 8, 0.9), (1.5, 11.0, 8, 0.6), (2.5, 11.0, 64, 0.3)];
    for (lambda, p, n, d) in cases {
        let pr = problem(WeightFamily::Constant { a0: 1.0 }, lambda, p);
        let t = integrate_cauchy(&RegularizedOperator::new(n), &pr, d, 1e-10).unwrap();
        let s = spread(&energy_profile(&t));
        assert!(s <= 1e-8, "λ={lambda} p={p} n={n} d={d}: spread {s:e}");
    }
    let pr = problem(WeightFamily::Constant { a0: 1.0 }, 1.0, 3.0);
    let t = integrate_cauchy(&RegularizedOperator::new(8), &pr, 0.5, 1e-10).unwrap();
    assert!(spread(&energy_profile(&t)) <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gronwall_bound_holds(d_frac in 0.0f64..1.4, n in prop::sample::select(vec![2u32, 8, 32]), proto in any::<bool>()) {
        let (lambda, p) = if proto { (1.0, 3.0) } else { (1.5, 11.0) };
        let pr = problem(WeightFamily::Affine { a0: 1.0, a1: 1.0 }, lambda, p);
        let d = d_frac * pr.u0();
        let t = integrate_cauchy(&RegularizedOperator::new(n), &pr, d, 1e-10).unwrap();
        let e = energy_profile(&t);
        let bound = pr.weight.c_gronwall.exp() * e[0].1 * (1.0 + 1e-6);
        prop_assert!(e.iter().all(|&(_, v)| v <= bound && v >= -1e-12));
    }

    #[test]
    fn angle_is_increasing(d_frac in 0.01f64..1.3, affine in any::<bool>()) {
        prop_assume!((d_frac - 1.0).abs() > 1e-3);
        let w = if affine { WeightFamily::Affine { a0: 1.0, a1: 1.0 } } else { WeightFamily::Constant { a0: 1.0 } };
        let pr = problem(w, 1.5, 11.0);
        let t = integrate_cauchy(&RegularizedOperator::new(8), &pr, d_frac * pr.u0(), 1e-10).unwrap();
        prop_assert!(t.theta.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(flux_identity_residual(&t) <= 1e-8);
    }
}

#[test]
fn halving_tolerance_barely_moves_the_endpoint() {
    let pr = problem(WeightFamily::Constant { a0: 1.0 }, 1.0, 3.0);
    let op = RegularizedOperator::new(8);
    let tol = 1e-10;
    let a = integrate_cauchy(&op, &pr, 0.9, tol).unwrap();
    let b = integrate_cauchy(&op, &pr, 0.9, 0.5 * tol).unwrap();
    let k = a.x.len() - 1;
    let l = b.x.len() - 1;
    assert!((a.u[k] - b.u[l]).abs() < 10.0 * tol);
    assert!((a.v[k] - b.v[l]).abs() < 10.0 * tol);
    assert!((a.theta[k] - b.theta[l]).abs() < 10.0 * tol);
    let reference = integrate_cauchy(&op, &pr, 0.9, 1e-13).unwrap();
    assert!((a.rotation() - reference.rotation()).abs() < 1e-8);
    assert!(a.rotation() > 0.0);
}

#[test]
fn nearby_data_give_nearby_trajectories() {
    let pr = problem(WeightFamily::Affine { a0: 1.0, a1: 1.0 }, 1.5, 11.0);
    let op = RegularizedOperator::new(8);
    let mut worst = 0.0f64;
    for d in [0.2, 0.5, 0.9, 1.05] {
        let a = integrate_cauchy(&op, &pr, d, 1e-12).unwrap();
        let b = integrate_cauchy(&op, &pr, d + 1e-6, 1e-12).unwrap();
        let dist = (0..=1000)
            .map(|i| {
                let x = i as f64 / 1000.0;
                (a.dense_eval(x).0 - b.dense_eval(x).0).abs()
            })
            .fold(0.0, f64::max);
        worst = worst.max(dist / 1e-6);
    }
    assert!(worst.is_finite() && worst < 1e3, "K = {worst}");
}

#[test]
fn angle_rate_matches_lifted_angle() {
    let pr = problem(WeightFamily::Affine { a0: 1.0, a1: 1.0 }, 1.5, 11.0);
    let t = integrate_cauchy(&RegularizedOperator::new(8), &pr, 0.7, 1e-12).unwrap();
    for x in [0.1, 0.33, 0.5, 0.77, 0.9] {
        let h = 1e-5;
        let fd = (t.theta_at(x + h) - t.theta_at(x - h)) / (2.0 * h);
        let r = theta_rate(&t, x);
        assert!(r > 0.0);
        assert!((fd - r).abs() < 1e-5 * r.max(1.0), "x={x}: {fd} vs {r}");
    }
}

#[test]
fn trivial_starts() {
    let pr = problem(WeightFamily::Affine { a0: 1.0, a1: 1.0 }, 1.0, 3.0);
    let op = RegularizedOperator::new(4);
    let c = integrate_cauchy(&op, &pr, pr.u0(), 1e-10).unwrap();
    assert!(c.degenerate);
    assert!(energy_profile(&c).iter().all(|&(_, e)| e == 0.0));
    assert_eq!(flux_identity_residual(&c), 0.0);
    let z = integrate_cauchy(&op, &pr, 0.0, 1e-10).unwrap();
    assert!(z.u.iter().all(|&u| u == 0.0));
    assert_eq!(flux_identity_residual(&z), 0.0);
    assert!((z.energy[0] - pr.weight.eval(0.0) * pr.nl.primitive_hat(0.0)).abs() < 1e-15);
}
