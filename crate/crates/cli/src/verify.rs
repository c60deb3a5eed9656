//! Invariant suite run by `mcshoot verify`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mcshoot_core::bv_limit::classical_criteria;
use mcshoot_core::eigen::{eigenvalue, prufer_terminal_angle};
use mcshoot_core::integrator::flux_identity_residual;
use mcshoot_core::phase::{linearized_period, orbit_period};
use mcshoot_core::problem::{check_structural, compute_ubar};
use mcshoot_core::regularization::{self as reg, RegularizedOperator};
use mcshoot_core::shooting::{equation_residual, solve_approx, ShootError};
use mcshoot_core::{integrate_cauchy, Nonlinearity, Problem, WeightFamily, WeightFunction};

use crate::run::hypothesis_report;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

fn row(name: &str, ok: bool, detail: String) -> CheckRow {
    CheckRow { name: name.into(), status: if ok { Status::Pass } else { Status::Fail }, detail }
}

pub fn table(rows: &[CheckRow]) -> String {
    let w = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in rows {
        let tag = match r.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        s.push_str(&format!("{tag}  {:<w$}  {}\n", r.name, r.detail));
    }
    let failed = rows.iter().filter(|r| r.status == Status::Fail).count();
    s.push_str(&format!("{} checks, {failed} failed", rows.len()));
    s
}

fn regularization() -> CheckRow {
    let mut worst = 0.0f64;
    let mut bad = 0usize;
    let samples = 10_001;
    for n in 1..=16u32 {
        let op = RegularizedOperator::new(n);
        let next = RegularizedOperator::new(n + 1);
        for i in 0..samples {
            let s = -50.0 + 100.0 * i as f64 / (samples - 1) as f64;
            let sl = 1e-12 * (1.0 + s * s);
            let (a, b, c) = (op.phi(s) * s, next.phi(s) * s, reg::phi(s) * s);
            let ok = a >= b - sl
                && b >= c - sl
                && c >= -sl
                && op.primitive(s) >= reg::primitive(s) - sl
                && op.primitive(s) <= a + sl
                && s * op.phi_inv(s) >= s * s - sl;
            let inv = (op.phi_inv(op.phi(s)) - s).abs() / s.abs().max(1.0);
            worst = worst.max(inv);
            if !ok || inv > 1e-12 {
                bad += 1;
            }
        }
    }
    row("regularization inequalities", bad == 0, format!("{bad} violations, inverse error {worst:.1e}"))
}

fn unweighted_spectrum(tol: f64) -> CheckRow {
    let w = WeightFunction::constant(1.0).expect("constant weight");
    let mut worst = 0.0f64;
    for k in 1..=6 {
        match eigenvalue(&w, k, tol) {
            Ok(e) => {
                let exact = ((k - 1) as f64 * PI).powi(2);
                let err = if k == 1 { e.lambda_k.abs() } else { (e.lambda_k / exact - 1.0).abs() };
                worst = worst.max(err);
            }
            Err(e) => return row("eigenvalues of a = 1", false, e.to_string()),
        }
    }
    row("eigenvalues of a = 1", worst <= 1e-8, format!("max relative error {worst:.1e}"))
}

fn prufer_monotone(problem: &Problem, tol: f64) -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut bad = 0;
    for _ in 0..20 {
        let (x, y): (f64, f64) = (rng.gen_range(0.0..200.0), rng.gen_range(0.0..200.0));
        let (l, m) = if x < y { (x, y) } else { (y, x) };
        if m - l < 1e-6 {
            continue;
        }
        match (prufer_terminal_angle(&problem.weight, l, tol), prufer_terminal_angle(&problem.weight, m, tol)) {
            (Ok(a), Ok(b)) if a < b => {}
            _ => bad += 1,
        }
    }
    row("Prufer angle monotone in lambda", bad == 0, format!("{bad} of 20 pairs out of order"))
}

fn structural(problem: &Problem) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    match check_structural(&problem.nl, 1024) {
        Ok(r) => rows.push(row(
            "structural conditions on f",
            r.f_eq_ok && r.f_sgn_ok && r.f_monotone_ok,
            format!("equilibrium {}, sign {}, monotone primitive {}", r.f_eq_ok, r.f_sgn_ok, r.f_monotone_ok),
        )),
        Err(e) => rows.push(row("structural conditions on f", false, e.to_string())),
    }
    let w = &problem.weight;
    let ok = w.c_a >= 1.0 - 1e-12 && w.norm_l1 >= w.min_a * (1.0 - 1e-12) && w.norm_l1 <= w.max_a * (1.0 + 1e-12);
    rows.push(row("weight constants", ok, format!("C_a = {:.6}, |a|_1 = {:.6}", w.c_a, w.norm_l1)));
    rows
}

fn energy(problem: &Problem, tol: f64) -> Vec<CheckRow> {
    let op = RegularizedOperator::new(8);
    let d = 0.5 * problem.u0();
    let t = match integrate_cauchy(&op, problem, d, tol) {
        Ok(t) => t,
        Err(e) => return vec![row("energy law", false, e.to_string())],
    };
    let e0 = t.energy[0];
    let mut rows = Vec::new();
    if problem.weight.is_constant() {
        let spread = t.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
        rows.push(row("energy conserved (constant a)", spread <= 1e-8, format!("spread {spread:.1e}")));
    } else {
        let bound = problem.weight.c_gronwall.exp() * e0 * (1.0 + 1e-6);
        let max = t.energy.iter().copied().fold(f64::MIN, f64::max);
        rows.push(row("energy Gronwall bound", max <= bound, format!("max {max:.6e} vs bound {bound:.6e}")));
    }
    let monotone = t.theta.windows(2).all(|w| w[1] > w[0]);
    rows.push(row("angle strictly increasing", monotone, format!("{} nodes", t.theta.len())));
    let fr = flux_identity_residual(&t);
    rows.push(row("flux identity", fr <= 1e-8, format!("residual {fr:.1e}")));
    if let Ok(h) = integrate_cauchy(&op, problem, d, 0.5 * tol) {
        let n = t.u.len() - 1;
        let m = h.u.len() - 1;
        let diff = (t.u[n] - h.u[m]).abs().max((t.v[n] - h.v[m]).abs()).max((t.theta[n] - h.theta[m]).abs());
        rows.push(row("self-convergence under tol/2", diff <= 10.0 * tol, format!("change {diff:.1e}")));
    }
    rows
}

fn shooting(problem: &Problem, tol: f64) -> Vec<CheckRow> {
    let op = RegularizedOperator::new(8);
    let r = match solve_approx(&op, problem, 1, tol) {
        Ok(r) => r,
        Err(e @ (ShootError::NotReached { .. } | ShootError::MissingSolution { .. })) => {
            let h = hypothesis_report(problem, 1, tol, e.to_string());
            let status = if h.holds == Some(false) { Status::Skip } else { Status::Fail };
            return vec![CheckRow {
                name: "shooting k = 1, n = 8".into(),
                status,
                detail: format!("{}; {}", h.error, h.likely_cause),
            }];
        }
        Err(e) => return vec![row("shooting k = 1, n = 8", false, e.to_string())],
    };
    let mut rows = vec![row("shooting k = 1, n = 8", r.solutions.len() == 2, format!("{} solutions", r.solutions.len()))];
    let u0 = problem.u0();
    for s in &r.solutions {
        let res = equation_residual(&s.trajectory, 2000);
        let flux = flux_identity_residual(&s.trajectory);
        let side_ok = (s.d - u0) * s.side.sign() > 0.0;
        let ok = s.zeros.len() == 1 && s.boundary_residual <= 1e-8 && flux <= 1e-8 && res <= 1e-5 && side_ok;
        rows.push(row(
            &format!("solution {} j = 1", s.side),
            ok,
            format!(
                "d = {:.10}, zeros {}, boundary {:.1e}, flux {:.1e}, residual {:.1e}",
                s.d,
                s.zeros.len(),
                s.boundary_residual,
                flux,
                res
            ),
        ));
    }
    rows
}

fn period(problem: &Problem, tol: f64) -> CheckRow {
    let a = match problem.weight.family {
        WeightFamily::Constant { a0 } => a0,
        _ => {
            return CheckRow {
                name: "small-orbit period".into(),
                status: Status::Skip,
                detail: "weight is not constant".into(),
            }
        }
    };
    let lin = linearized_period(a, &problem.nl);
    match orbit_period(a, &problem.nl, 1e-3 * problem.u0(), tol) {
        Ok(p) => {
            let rel = (p / lin - 1.0).abs();
            row("small-orbit period", rel <= 1e-3, format!("period {p:.8} vs linearized {lin:.8}"))
        }
        Err(e) => row("small-orbit period", false, e.to_string()),
    }
}

fn reference_criteria() -> CheckRow {
    let nl = Nonlinearity::prototype(1.0, 3.0).expect("prototype");
    let pr = Problem::new(WeightFunction::constant(1.0).expect("constant weight"), nl);
    let c = classical_criteria(&pr, None);
    let ub = compute_ubar(&pr.nl, &pr.weight).unwrap_or(f64::NAN);
    let affine = WeightFunction::new(WeightFamily::Affine { a0: 1.0, a1: 1.0 }).expect("affine weight");
    let nmin = c.n_min_classical.unwrap_or(f64::NAN);
    let ok = (ub - 2f64.sqrt()).abs() <= 1e-10
        && (c.eta - 0.75).abs() <= 1e-10
        && (nmin - 7f64.sqrt() / 3.0).abs() <= 1e-10
        && (affine.c_a - 2.0).abs() <= 1e-10;
    row("closed-form criteria", ok, format!("ubar {ub:.12}, eta {:.12}, n_min {nmin:.12}", c.eta))
}

/// All checks, in a fixed order.
pub fn run_suite(problem: &Problem, tol: f64) -> Vec<CheckRow> {
    let tol = tol.max(1e-12);
    let mut rows = vec![regularization(), unweighted_spectrum(tol), prufer_monotone(problem, tol)];
    rows.extend(structural(problem));
    rows.extend(energy(problem, tol));
    rows.extend(shooting(problem, tol));
    rows.push(period(problem, tol));
    rows.push(reference_criteria());
    rows
}
