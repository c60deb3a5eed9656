mod common;

use mcshoot_core::integrator::{energy_profile, flux_identity_residual};
use mcshoot_core::shooting::{
    equation_residual, probe_near_u0, rotation_number, solve_approx, upper_shoot_bound, ApproxSolution, ShootError,
    Side,
};
use mcshoot_core::{Nonlinearity, Problem, RegularizedOperator, WeightFamily, WeightFunction};

fn problem(w: WeightFamily, lambda: f64, p: f64) -> Problem {
    Problem::new(WeightFunction::new(w).unwrap(), Nonlinearity::prototype(lambda, p).unwrap())
}

fn unit(lambda: f64, p: f64) -> Problem {
    problem(WeightFamily::Constant { a0: 1.0 }, lambda, p)
}

fn check_invariants(s: &ApproxSolution) {
    let t = &s.trajectory;
    let pr = t.problem();
    let u0 = pr.u0();
    assert!((s.rotation - s.j as f64).abs() <= 1e-8, "rotation {}", s.rotation);
    assert_eq!(s.zeros.len(), s.j);
    assert!(s.zeros.windows(2).all(|w| w[1] > w[0]));
    assert!(s.zeros.iter().all(|&z| z > 0.0 && z < 1.0));
    assert!(s.boundary_residual <= 1e-8, "v(1) = {}", s.boundary_residual);
    assert!(s.extremum_gap > 0.0);
    assert!(flux_identity_residual(t) <= 1e-8);
    assert!(equation_residual(t, 2000) <= 1e-5, "residual {}", equation_residual(t, 2000));
    assert!(t.u.iter().all(|&u| u > 0.0));

    // sign of u − u0 between consecutive zeros
    let mut cuts = vec![0.0];
    cuts.extend(&s.zeros);
    cuts.push(1.0);
    for (i, w) in cuts.windows(2).enumerate() {
        let mid = 0.5 * (w[0] + w[1]);
        let expect = s.side.sign() * if i % 2 == 0 { 1.0 } else { -1.0 };
        assert!(expect * (t.dense_eval(mid).0 - u0) > 0.0);
    }

    // u″ has the sign of −a f̂(u)
    let op = t.op();
    for i in 1..400 {
        let x = i as f64 / 400.0;
        let (u, v) = t.dense_eval(x);
        let dv = -pr.weight.eval(x) * pr.nl.f_hat(u);
        let upp = dv / op.phi_prime(op.phi_inv(v));
        if (u - u0).abs() > 1e-6 {
            assert!(upp * (u - u0).signum() <= 1e-9, "x={x}");
        }
    }

    let e = energy_profile(t);
    let bound = pr.weight.c_gronwall.exp() * e[0].1 * (1.0 + 1e-6);
    assert!(e.iter().all(|&(_, v)| v <= bound));
}

#[test]
fn one_solution_per_side_for_k1() {
    let pr = unit(1.5, 11.0);
    let op = RegularizedOperator::new(8);
    let r = solve_approx(&op, &pr, 1, 1e-10).unwrap();
    assert_eq!(r.solutions.len(), 2);
    assert_eq!(r.solutions[0].side, Side::Below);
    assert_eq!(r.solutions[1].side, Side::Above);
    let u0 = pr.u0();
    assert!(r.solutions[0].d > 0.0 && r.solutions[0].d < u0);
    assert!(r.solutions[1].d > u0 && r.solutions[1].d < r.upper_bound);
    for s in &r.solutions {
        check_invariants(s);
    }
}

#[test]
fn shooting_matches_finite_difference_newton() {
    let pr = unit(1.5, 11.0);
    let op = RegularizedOperator::new(8);
    let r = solve_approx(&op, &pr, 1, 1e-10).unwrap();
    let (f, fp) = common::proto(1.5, 11.0);
    for s in &r.solutions {
        let m = 4096;
        let init: Vec<f64> = (0..m).map(|i| s.trajectory.dense_eval(i as f64 / (m - 1) as f64).0).collect();
        let (u, res) = common::fd_newton(8.0, |_| 1.0, &f, &fp, &init, 30);
        assert!(res < 1e-10, "Newton residual {res}");
        let dist = u.iter().zip(&init).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dist < 1e-4, "{:?}: {dist}", s.side);
    }
}

#[test]
fn weighted_solutions_match_finite_difference_newton() {
    let pr = problem(WeightFamily::Affine { a0: 1.0, a1: 1.0 }, 1.5, 11.0);
    let op = RegularizedOperator::new(8);
    let r = solve_approx(&op, &pr, 1, 1e-10).unwrap();
    assert_eq!(r.solutions.len(), 2);
    let (f, fp) = common::proto(1.5, 11.0);
    for s in &r.solutions {
        check_invariants(s);
        let m = 4096;
        let init: Vec<f64> = (0..m).map(|i| s.trajectory.dense_eval(i as f64 / (m - 1) as f64).0).collect();
        let (u, res) = common::fd_newton(8.0, |x| 1.0 + x, &f, &fp, &init, 30);
        assert!(res < 1e-10);
        let dist = u.iter().zip(&init).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dist < 1e-4, "{dist}");
    }
}

#[test]
fn k1_succeeds_but_k2_is_not_reached_below_third_eigenvalue() {
    let pr = unit(3.0, 11.0);
    let op = RegularizedOperator::new(8);
    let r = solve_approx(&op, &pr, 1, 1e-10).unwrap();
    assert_eq!(r.solutions.len(), 2);
    for s in &r.solutions {
        check_invariants(s);
    }
    match probe_near_u0(&op, &pr, 2, 1e-10) {
        Err(ShootError::NotReached { k: 2, .. }) => {}
        other => panic!("expected NotReached, got {other:?}"),
    }
}

#[test]
fn hypothesis_failure_reports_missing_solution() {
    let pr = unit(1.0, 3.0);
    let op = RegularizedOperator::new(8);
    match solve_approx(&op, &pr, 1, 1e-10) {
        Err(ShootError::MissingSolution { j: 1, .. }) => {}
        other => panic!("expected MissingSolution, got {:?}", other.map(|r| r.solutions.len())),
    }
    let rot = rotation_number(&op, &pr, 0.999 * pr.u0(), 1e-10).unwrap();
    assert!(rot > 0.0 && rot < 1.0);
    assert!((upper_shoot_bound(&op, &pr, 1e-10).unwrap() - 2f64.sqrt()).abs() < 1e-10);
}

#[test]
fn three_turns_when_fourth_eigenvalue_is_exceeded() {
    // f′(u0) = 10λ = 100 > 9π²
    let pr = unit(10.0, 11.0);
    let op = RegularizedOperator::new(8);
    let r = solve_approx(&op, &pr, 3, 1e-10).unwrap();
    assert_eq!(r.solutions.len(), 6);
    for s in &r.solutions {
        check_invariants(s);
    }
    let three: Vec<_> = r.solutions.iter().filter(|s| s.j == 3).collect();
    assert_eq!(three.len(), 2);
    assert!(three.iter().all(|s| s.zeros.len() == 3));
}
