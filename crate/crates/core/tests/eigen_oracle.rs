mod common;

use mcshoot_core::eigen::{eigenvalue, prufer_terminal_angle, DEFAULT_TOL};
use mcshoot_core::{WeightFamily, WeightFunction};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn affine_weight_matches_finite_differences() {
    let a = WeightFunction::new(WeightFamily::Affine { a0: 1.0, a1: 1.0 }).unwrap();
    for k in [2, 3] {
        let shoot = eigenvalue(&a, k, DEFAULT_TOL).unwrap().lambda_k;
        let fd = common::fd_neumann_eigenvalue(|x| 1.0 + x, k, 10_000);
        assert!((shoot / fd - 1.0).abs() < 1e-5, "k={k}: {shoot} vs {fd}");
    }
}

#[test]
fn fd_oracle_recovers_unweighted_spectrum() {
    let fd = common::fd_neumann_eigenvalue(|_| 1.0, 3, 10_000);
    assert!((fd / (4.0 * PI * PI) - 1.0).abs() < 1e-6);
}

#[test]
fn exponential_and_cosine_weights_match_finite_differences() {
    let fams = [
        WeightFamily::Exponential { a0: 1.0, sigma: 0.7 },
        WeightFamily::CosinePerturbed { a0: 2.0, eps: 0.3 },
    ];
    for fam in fams {
        let a = WeightFunction::new(fam).unwrap();
        let shoot = eigenvalue(&a, 2, DEFAULT_TOL).unwrap().lambda_k;
        let fd = common::fd_neumann_eigenvalue(|x| fam.eval(x), 2, 10_000);
        assert!((shoot / fd - 1.0).abs() < 1e-5, "{fam:?}: {shoot} vs {fd}");
    }
}

fn weight(affine: bool) -> WeightFunction {
    if affine {
        WeightFunction::new(WeightFamily::Affine { a0: 1.0, a1: 1.0 }).unwrap()
    } else {
        WeightFunction::constant(1.0).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn terminal_angle_strictly_increasing(affine in any::<bool>(), lam in 0.0f64..400.0, gap in 1e-3f64..50.0) {
        let a = weight(affine);
        let lo = prufer_terminal_angle(&a, lam, 1e-12).unwrap();
        let hi = prufer_terminal_angle(&a, lam + gap, 1e-12).unwrap();
        prop_assert!(hi > lo, "λ={lam} μ={}: {lo} ≥ {hi}", lam + gap);
    }

    #[test]
    fn eigenvalue_scales_inversely_with_weight(k in 2usize..5, c in prop::sample::select(vec![0.5, 2.0])) {
        let a = WeightFunction::new(WeightFamily::Affine { a0: 1.0, a1: 0.5 }).unwrap();
        let ca = WeightFunction::new(WeightFamily::Affine { a0: c, a1: 0.5 * c }).unwrap();
        let l = eigenvalue(&a, k, DEFAULT_TOL).unwrap().lambda_k;
        let lc = eigenvalue(&ca, k, DEFAULT_TOL).unwrap().lambda_k;
        prop_assert!((lc * c / l - 1.0).abs() < 1e-9);
    }
}
