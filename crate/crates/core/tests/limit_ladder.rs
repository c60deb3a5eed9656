use mcshoot_core::bv_limit::{
    classical_criteria, energy_continuity_check, solve_limit, track_family, BvError, Classification,
    IntersectionKind, LimitParams,
};
use mcshoot_core::regularization::dyadic_ladder;
use mcshoot_core::shooting::{solve_one, Side};
use mcshoot_core::{Nonlinearity, Problem, RegularizedOperator, WeightFunction};

fn unit(lambda: f64, p: f64) -> Problem {
    Problem::new(WeightFunction::constant(1.0).unwrap(), Nonlinearity::prototype(lambda, p).unwrap())
}

#[test]
fn classical_regime_settles() {
    let pr = unit(1.5, 11.0);
    let params = LimitParams::default();
    for side in [Side::Below, Side::Above] {
        let r = solve_limit(&pr, 1, side, &dyadic_ladder(10), &params).unwrap();
        assert_eq!(r.classification, Classification::Classical);
        assert!(r.windows.is_empty() && r.jumps.is_empty());
        assert_eq!(r.intersections.len(), 1);
        assert_eq!(r.intersections[0].kind, IntersectionKind::Regular);
        assert!(r.diagnostics.limit_residual <= 1e-4);
        assert!(r.diagnostics.limit_flux_identity <= 1e-6);
        for &(n, slope) in &r.diagnostics.sup_slopes {
            if n >= 4 {
                assert!(slope < n as f64);
            }
        }
        let last: Vec<f64> = r.diagnostics.sup_slopes.iter().rev().take(3).map(|s| s.1).collect();
        assert!((last[0] - last[2]).abs() < 1e-6);
        assert!(r.v_limit.iter().all(|v| v.abs() < 1.0 - params.delta_jump));
        assert!(energy_continuity_check(&r, params.energy_tol).pass);
        let c = &r.criteria;
        assert!(c.autonomous.unwrap().suff_auton.holds);
        assert!(c.lgo_value.is_some());
    }
}

#[test]
fn jump_regime_has_matched_generalized_intersection() {
    let pr = unit(2.5, 11.0);
    let params = LimitParams::default();
    let r = solve_limit(&pr, 1, Side::Below, &dyadic_ladder(10), &params).unwrap();
    assert_ne!(r.classification, Classification::Classical);
    assert_eq!(r.intersections.len(), 1);
    assert_eq!(r.jumps.len(), 1);
    let j = r.jumps[0];
    let u0 = pr.u0();
    // below side: u − u0 < 0 before the crossing
    assert!(j.u_minus <= u0 && u0 <= j.u_plus);
    assert!(j.parity_ok);
    let fm = pr.nl.primitive(j.u_minus);
    let fp = pr.nl.primitive(j.u_plus);
    assert!((fm - fp).abs() <= 1e-3);
    assert!(j.energy_mismatch <= params.energy_tol);
    assert_eq!(r.intersections[0].kind, IntersectionKind::Generalized);
    let e = energy_continuity_check(&r, params.energy_tol);
    assert!(e.pass, "{e:?}");

    let d = &r.diagnostics;
    assert!(d.limit_residual <= 1e-4);
    assert!(d.limit_flux_identity <= 1e-6);
    assert!(d.sign_pattern_ok);
    assert!(d.intersection_separation > 0.05);
    assert!(d.intersection_shift.windows(2).all(|w| w[1] < w[0]));
    assert!(d.extremum_gaps.iter().all(|&(_, g)| g > 0.1));
    // sup|u′ₙ| grows without bound while sup|vₙ| drops to 1
    assert!(d.sup_slopes.windows(2).all(|w| w[1].1 > w[0].1));
    assert!(d.sup_fluxes.windows(2).all(|w| w[1].1 < w[0].1));
    assert!(r.v_limit.iter().all(|v| v.abs() <= 1.0 + 1e-6));
    for (x, v) in r.x_grid.iter().zip(&r.v_limit) {
        if (x - j.x).abs() > 0.01 {
            assert!(v.abs() < 1.0 - params.delta_jump);
        }
    }
    let c = &r.criteria;
    assert!(!c.autonomous.unwrap().suff_auton.holds);
    assert!(!c.classical_below.holds);
    assert!(c.n_min_classical.is_none());
}

#[test]
fn sides_mirror_each_other_for_constant_weight() {
    let pr = unit(2.5, 11.0);
    let params = LimitParams::default();
    let b = solve_limit(&pr, 1, Side::Below, &dyadic_ladder(10), &params).unwrap();
    let a = solve_limit(&pr, 1, Side::Above, &dyadic_ladder(10), &params).unwrap();
    assert!((a.intersections[0].x - (1.0 - b.intersections[0].x)).abs() < 1e-6);
    assert!((a.jumps[0].u_minus - b.jumps[0].u_plus).abs() < 1e-6);
}

#[test]
fn cold_start_reproduces_warm_start() {
    let pr = unit(2.5, 11.0);
    let params = LimitParams { early_stop: false, ..LimitParams::default() };
    let t = track_family(&pr, 1, Side::Below, &dyadic_ladder(6), &params).unwrap();
    for s in t.rungs.iter().skip(3) {
        let cold = solve_one(&RegularizedOperator::new(s.n), &pr, 1, Side::Below, params.tol, None).unwrap();
        assert!((cold.d - s.d).abs() < 1e-9 * pr.u0(), "n={}", s.n);
    }
}

#[test]
fn short_ladders_are_rejected_or_not_cauchy() {
    let pr = unit(2.5, 11.0);
    let params = LimitParams::default();
    assert!(matches!(solve_limit(&pr, 1, Side::Below, &[2, 4], &params), Err(BvError::TooFewRungs(2))));
    match solve_limit(&pr, 1, Side::Below, &[2, 4, 8], &params) {
        Err(BvError::NoConvergence { distance, tol }) => assert!(distance > tol),
        other => panic!("expected NoConvergence, got {:?}", other.map(|r| r.classification)),
    }
    assert!(matches!(solve_limit(&pr, 0, Side::Below, &[2, 4, 8], &params), Err(BvError::InvalidInput(_))));
}

#[test]
fn missing_hypothesis_loses_the_family() {
    let pr = unit(1.0, 3.0);
    let params = LimitParams::default();
    assert!(matches!(track_family(&pr, 1, Side::Below, &dyadic_ladder(5), &params), Err(BvError::FamilyLost { .. })));
}

#[test]
fn criteria_for_closed_form_cases() {
    let c = classical_criteria(&unit(1.0, 3.0), None);
    assert!((c.ubar.unwrap() - 2f64.sqrt()).abs() < 1e-10);
    assert!((c.eta - 0.75).abs() < 1e-12);
    assert!((c.n_min_classical.unwrap() - 7f64.sqrt() / 3.0).abs() < 1e-12);
    assert!(c.lgo_value.is_none());
    let c = classical_criteria(&unit(2.5, 11.0), None);
    assert!((c.autonomous.unwrap().suff_auton.value - 1.2512).abs() < 1e-3);
}
