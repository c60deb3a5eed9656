use mcshoot_core::phase::{hamiltonian, level_set, orbit_period, phase_portrait, unweighted_period, PhaseError};
use mcshoot_core::shooting::{solve_approx, Side};
use mcshoot_core::{integrate_cauchy, Nonlinearity, Problem, RegularizedOperator, WeightFunction};
use std::f64::consts::PI;

#[test]
fn small_orbits_approach_linear_period() {
    let nl = Nonlinearity::prototype(1.0, 3.0).unwrap();
    let target = 2.0 * PI / 2f64.sqrt();
    let p3 = orbit_period(1.0, &nl, 1e-3, 1e-12).unwrap();
    let p4 = orbit_period(1.0, &nl, 1e-4, 1e-12).unwrap();
    assert!((p3 / target - 1.0).abs() < 1e-3);
    assert!((p3 / p4 - 1.0).abs() < 1e-4);
    assert!((unweighted_period(&nl) - target).abs() < 1e-14);
    assert!(matches!(orbit_period(1.0, &nl, 0.9, 1e-10), Err(PhaseError::NotClosed(_))));
}

#[test]
fn shooting_solution_is_half_an_orbit() {
    for (a0, lambda) in [(1.0, 1.5), (0.8, 1.5), (1.0, 2.0)] {
        let nl = Nonlinearity::prototype(lambda, 11.0).unwrap();
        let pr = Problem::new(WeightFunction::constant(a0).unwrap(), nl.clone());
        let r = solve_approx(&RegularizedOperator::new(64), &pr, 1, 1e-10).unwrap();
        for s in &r.solutions {
            let t = &s.trajectory;
            let amplitude = t.u[0] - pr.u0();
            let period = orbit_period(a0, &nl, amplitude, 1e-11).unwrap();
            // one half-turn on [0, 1]
            assert!((0.5 * period - 1.0).abs() < 5e-3, "a={a0} λ={lambda} {:?}: {period}", s.side);
        }
    }
}

#[test]
fn hamiltonian_is_conserved_along_regularized_orbits() {
    let nl = Nonlinearity::prototype(1.0, 3.0).unwrap();
    let pr = Problem::new(WeightFunction::constant(1.0).unwrap(), nl.clone());
    let t = integrate_cauchy(&RegularizedOperator::new(64), &pr, 0.4, 1e-11).unwrap();
    let h0 = hamiltonian(1.0, &nl, t.u[0], t.v[0]).unwrap();
    for (u, v) in t.u.iter().zip(&t.v) {
        assert!((hamiltonian(1.0, &nl, *u, *v).unwrap() - h0).abs() < 1e-8);
    }
}

#[test]
fn level_sets_follow_the_figure() {
    let nl = Nonlinearity::prototype(1.0, 3.0).unwrap();
    assert_eq!(hamiltonian(1.0, &nl, 1.0, 0.0).unwrap(), 0.0);
    assert_eq!(hamiltonian(1.0, &nl, 1.0, 1.0).unwrap(), 1.0);
    assert!(hamiltonian(1.0, &nl, 1.0, 1.0 + 1e-9).is_err());

    let ls = level_set(1.0, &nl, 0.1, (0.0, 3.0), 400).unwrap();
    assert_eq!(ls.components.len(), 1);
    assert!(ls.components[0].closed);
    for &(u, v) in &ls.components[0].points {
        assert!((hamiltonian(1.0, &nl, u, v).unwrap() - 0.1).abs() < 1e-10);
        let mirror = ls.components[0].points.iter().any(|&(u2, v2)| (u2 - u).abs() < 1e-12 && (v2 + v).abs() < 1e-12);
        assert!(mirror);
    }
    let (first, last) = (ls.components[0].points[0], *ls.components[0].points.last().unwrap());
    assert!((first.0 - last.0).hypot(first.1 - last.1) < 1e-8);

    let broken = level_set(5.0, &nl, 1.05, (0.0, 3.0), 400).unwrap();
    assert!(broken.disconnected);

    let pp = phase_portrait(5.0, &nl, &[0.5, 1.05], (0.0, 3.0), 200).unwrap();
    assert_eq!(pp.breakdown_levels, vec![1.05]);
    assert!(!pp.homoclinic.holds);
    let pp = phase_portrait(1.0, &nl, &[0.05, 0.2], (0.0, 3.0), 200).unwrap();
    assert!(pp.homoclinic.holds && pp.breakdown_levels.is_empty());
}

#[test]
fn side_labels_round_trip() {
    assert_eq!("below".parse::<Side>().unwrap(), Side::Below);
    assert!("left".parse::<Side>().is_err());
}
