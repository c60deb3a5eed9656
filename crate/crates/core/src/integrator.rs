//! Cauchy problem `u(0) = d`, `u′(0) = 0` for the regularized planar system
//! `u′ = φₙ⁻¹(v)`, `v′ = −a(x)f̂(u)`, with the lifted clockwise polar angle
//! around `(u0, 0)` and the energy `Eₙ = Kₙ(u′) + aF̂(u)`.

use std::f64::consts::{FRAC_PI_4, PI};
use std::io::{self, Write};

use thiserror::Error;

use crate::numeric::{golden_max, integrate, wrap_angle};
use crate::ode::{locate, DenseStep, Dopri5, OdeError, Verdict};
use crate::problem::Problem;
use crate::regularization::RegularizedOperator;

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_STEP: f64 = 1.0 / 16.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("step size underflow at x = {x}")]
    StepSizeUnderflow { x: f64 },
    #[error("integration did not finish: {0}")]
    Failed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl From<OdeError> for IntegratorError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::StepSizeUnderflow { x } => IntegratorError::StepSizeUnderflow { x },
            other => IntegratorError::Failed(other.to_string()),
        }
    }
}

/// Dense solution of the planar system on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub n: u32,
    pub d: f64,
    pub tol: f64,
    /// Set when `d = u0`; the solution is the constant equilibrium.
    pub degenerate: bool,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub energy: Vec<f64>,
    // state is (u − u0, v)
    steps: Vec<DenseStep<2>>,
    problem: Problem,
    op: RegularizedOperator,
}

#[inline]
fn angle(w: f64, v: f64) -> f64 {
    (-v).atan2(w)
}

fn rhs(problem: &Problem, op: &RegularizedOperator, x: f64, y: &[f64; 2]) -> [f64; 2] {
    let u = problem.u0() + y[0];
    [op.phi_inv(y[1]), -problem.weight.eval(x) * problem.nl.f_hat(u)]
}

/// Integrates the Cauchy problem on `[0, 1]` with local tolerance `tol`.
pub fn integrate_cauchy(
    op: &RegularizedOperator,
    problem: &Problem,
    d: f64,
    tol: f64,
) -> Result<Trajectory, IntegratorError> {
    if !(1e-13..=1e-4).contains(&tol) {
        return Err(IntegratorError::InvalidInput(format!("tol = {tol} outside [1e-13, 1e-4]")));
    }
    if !(d.is_finite() && d >= 0.0) {
        return Err(IntegratorError::InvalidInput(format!("d = {d} must be finite and ≥ 0")));
    }
    let u0 = problem.u0();
    let w0 = d - u0;
    let e0 = problem.weight.eval(0.0) * problem.nl.primitive_hat(d);

    if w0 == 0.0 {
        return Ok(Trajectory {
            n: op.n(),
            d,
            tol,
            degenerate: true,
            x: vec![0.0, 1.0],
            u: vec![u0, u0],
            v: vec![0.0, 0.0],
            theta: vec![0.0, 0.0],
            energy: vec![0.0, 0.0],
            steps: vec![DenseStep::constant(0.0, 1.0, [0.0, 0.0])],
            problem: problem.clone(),
            op: *op,
        });
    }

    let mut solver = Dopri5::<2>::new(tol, (tol * w0.abs().min(1.0)).max(1e-15));
    solver.h_max = MAX_STEP;
    // f̂ has a corner at u = 0; a step straddling it carries an O(h³) error
    // the embedded estimate does not see
    let kink_step = 0.1 * tol.cbrt();
    let steps = solver.solve(
        |x, y| rhs(problem, op, x, y),
        0.0,
        [w0, 0.0],
        1.0,
        |s| {
            let a0 = s.start();
            let am = s.eval(s.x0 + 0.5 * s.h);
            let a1 = s.end();
            let (t0, tm, t1) = (angle(a0[0], a0[1]), angle(am[0], am[1]), angle(a1[0], a1[1]));
            let below = |y: [f64; 2]| u0 + y[0] < 0.0;
            let crosses = below(a0) != below(am) || below(am) != below(a1);
            if wrap_angle(tm - t0).abs() > FRAC_PI_4 || wrap_angle(t1 - tm).abs() > FRAC_PI_4 {
                Verdict::Reject
            } else if crosses && s.h > kink_step {
                Verdict::Reject
            } else {
                Verdict::Accept
            }
        },
    )?;

    let cap = steps.len() + 1;
    let (mut xs, mut us, mut vs, mut th, mut en) =
        (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
    xs.push(0.0);
    us.push(d);
    vs.push(0.0);
    let mut theta = if w0 < 0.0 { PI } else { 0.0 };
    let mut prev = angle(w0, 0.0);
    th.push(theta);
    en.push(e0);
    for s in &steps {
        let y = s.end();
        let x = s.x1();
        let a = angle(y[0], y[1]);
        theta += wrap_angle(a - prev);
        prev = a;
        let u = u0 + y[0];
        xs.push(x);
        us.push(u);
        vs.push(y[1]);
        th.push(theta);
        en.push(op.k_of_flux(y[1]) + problem.weight.eval(x) * problem.nl.primitive_hat(u));
    }
    Ok(Trajectory {
        n: op.n(),
        d,
        tol,
        degenerate: false,
        x: xs,
        u: us,
        v: vs,
        theta: th,
        energy: en,
        steps,
        problem: problem.clone(),
        op: *op,
    })
}

impl Trajectory {
    #[inline]
    pub fn u0(&self) -> f64 {
        self.problem.u0()
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn op(&self) -> &RegularizedOperator {
        &self.op
    }

    pub fn steps(&self) -> &[DenseStep<2>] {
        &self.steps
    }

    /// `(u, v)` at `x ∈ [0, 1]` from the continuous extension.
    pub fn dense_eval(&self, x: f64) -> (f64, f64) {
        let y = self.steps[locate(&self.steps, x)].eval(x);
        (self.u0() + y[0], y[1])
    }

    /// `(u − u0, v)` at `x`, without cancellation near the equilibrium.
    pub fn offset_eval(&self, x: f64) -> (f64, f64) {
        let y = self.steps[locate(&self.steps, x)].eval(x);
        (y[0], y[1])
    }

    /// `u′ = φₙ⁻¹(v)` at `x`.
    pub fn u_prime_at(&self, x: f64) -> f64 {
        self.op.phi_inv(self.dense_eval(x).1)
    }

    /// Lifted polar angle at `x`.
    pub fn theta_at(&self, x: f64) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        let i = locate(&self.steps, x);
        let s = &self.steps[i];
        let y0 = s.start();
        let y = s.eval(x);
        self.theta[i] + wrap_angle(angle(y[0], y[1]) - angle(y0[0], y0[1]))
    }

    /// `(θ(1) − θ(0))/π`.
    pub fn rotation(&self) -> f64 {
        (self.theta[self.theta.len() - 1] - self.theta[0]) / PI
    }

    pub fn energy_at(&self, x: f64) -> f64 {
        let (u, v) = self.dense_eval(x);
        self.op.k_of_flux(v) + self.problem.weight.eval(x) * self.problem.nl.primitive_hat(u)
    }

    /// `sup |v|` over `[0, 1]`, refined by golden search around the best node.
    pub fn sup_abs_flux(&self) -> (f64, f64) {
        self.sup_abs_flux_on(0.0, 1.0)
    }

    /// `sup |v|` over `[lo, hi]` with its location.
    pub fn sup_abs_flux_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut best = (lo, self.dense_eval(lo).1.abs());
        let e = self.dense_eval(hi).1.abs();
        if e > best.1 {
            best = (hi, e);
        }
        let mut best_i = None;
        for (i, (&x, &v)) in self.x.iter().zip(&self.v).enumerate() {
            if x > lo && x < hi && v.abs() > best.1 {
                best = (x, v.abs());
                best_i = Some(i);
            }
        }
        let centre = match best_i {
            Some(i) => i,
            None => self.x.partition_point(|&x| x < best.0).min(self.x.len() - 1),
        };
        let a = self.x[centre.saturating_sub(1)].max(lo);
        let b = self.x[(centre + 1).min(self.x.len() - 1)].min(hi);
        if b > a {
            let (xm, vm) = golden_max(|x| self.dense_eval(x).1.abs(), a, b, 1e-12);
            if vm > best.1 {
                best = (xm, vm);
            }
        }
        best
    }

    /// `sup |u′|` on `[0, 1]`.
    pub fn sup_abs_slope(&self) -> f64 {
        self.op.phi_inv(self.sup_abs_flux().1)
    }

    /// CSV with columns `x,u,v,theta,energy`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,u,v,theta,energy")?;
        for i in 0..self.x.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.x[i], self.u[i], self.v[i], self.theta[i], self.energy[i]
            )?;
        }
        Ok(())
    }
}

/// `(x, Eₙ(x))` at every node.
pub fn energy_profile(t: &Trajectory) -> Vec<(f64, f64)> {
    t.x.iter().copied().zip(t.energy.iter().copied()).collect()
}

/// `|v(1) − v(0) + ∫₀¹ a f̂(u)|`, quadrature step by step on the dense output.
pub fn flux_identity_residual(t: &Trajectory) -> f64 {
    if t.degenerate {
        return 0.0;
    }
    let p = t.problem();
    let mut total = 0.0;
    for s in t.steps() {
        let g = |x: f64| {
            let y = s.eval(x);
            p.weight.eval(x) * p.nl.f_hat(p.u0() + y[0])
        };
        total += integrate(g, s.x0, s.x1(), 1e-12, 1e-15);
    }
    let v1 = *t.v.last().expect("non-empty");
    (v1 - t.v[0] + total).abs()
}

/// `θ′` from the polar form of the system, for cross-checking the lift.
pub fn theta_rate(t: &Trajectory, x: f64) -> f64 {
    let (w, v) = t.offset_eval(x);
    let p = t.problem();
    let up = t.op().phi_inv(v);
    let af = p.weight.eval(x) * p.nl.f_hat(p.u0() + w);
    (af * w + v * up) / (w * w + v * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Nonlinearity, WeightFamily, WeightFunction};

    fn prob(l: f64, p: f64) -> Problem {
        Problem::new(WeightFunction::constant(1.0).unwrap(), Nonlinearity::prototype(l, p).unwrap())
    }

    #[test]
    fn degenerate_start() {
        let pr = prob(1.0, 3.0);
        let t = integrate_cauchy(&RegularizedOperator::new(4), &pr, 1.0, 1e-10).unwrap();
        assert!(t.degenerate);
        assert!(t.u.iter().all(|&u| u == 1.0));
        assert_eq!(flux_identity_residual(&t), 0.0);
        assert!(energy_profile(&t).iter().all(|&(_, e)| e == 0.0));
    }

    #[test]
    fn zero_start_is_stationary() {
        let pr = prob(1.0, 3.0);
        let t = integrate_cauchy(&RegularizedOperator::new(4), &pr, 0.0, 1e-10).unwrap();
        assert!(t.u.iter().all(|&u| u == 0.0));
        assert_eq!(t.rotation(), 0.0);
        assert!((t.energy[0] - 0.25).abs() < 1e-15);
        assert_eq!(flux_identity_residual(&t), 0.0);
    }

    #[test]
    fn autonomous_energy_conserved() {
        let pr = prob(1.0, 3.0);
        let t = integrate_cauchy(&RegularizedOperator::new(8), &pr, 0.5, 1e-10).unwrap();
        let (lo, hi) = t.energy.iter().fold((f64::MAX, f64::MIN), |(a, b), &e| (a.min(e), b.max(e)));
        assert!(hi - lo < 1e-9, "spread {}", hi - lo);
        assert_eq!(t.u[0], 0.5);
        assert_eq!(t.v[0], 0.0);
        assert_eq!(*t.x.last().unwrap(), 1.0);
    }

    #[test]
    fn angle_starts_and_increases() {
        let pr = prob(1.5, 11.0);
        let op = RegularizedOperator::new(8);
        for d in [0.3, 0.9, 1.2] {
            let t = integrate_cauchy(&op, &pr, d, 1e-10).unwrap();
            let expect0 = if d < pr.u0() { PI } else { 0.0 };
            assert_eq!(t.theta[0], expect0);
            assert!(t.theta.windows(2).all(|w| w[1] > w[0]), "d = {d}");
            assert!(t.theta.windows(2).all(|w| w[1] - w[0] < PI));
        }
    }

    #[test]
    fn self_convergence_in_tol() {
        let pr = prob(1.0, 3.0);
        let op = RegularizedOperator::new(8);
        let a = integrate_cauchy(&op, &pr, 0.9, 1e-10).unwrap();
        let b = integrate_cauchy(&op, &pr, 0.9, 5e-11).unwrap();
        let r = integrate_cauchy(&op, &pr, 0.9, 1e-13).unwrap();
        assert!((a.theta.last().unwrap() - b.theta.last().unwrap()).abs() < 1e-9);
        assert!((a.theta.last().unwrap() - r.theta.last().unwrap()).abs() < 1e-8);
        assert!((a.u.last().unwrap() - b.u.last().unwrap()).abs() < 1e-9);
        assert!((a.v.last().unwrap() - b.v.last().unwrap()).abs() < 1e-9);
        assert!(a.rotation() > 0.0 && a.rotation() < 1.0);
    }

    #[test]
    fn flux_identity_small() {
        let pr = prob(1.5, 11.0);
        let t = integrate_cauchy(&RegularizedOperator::new(8), &pr, 0.6, 1e-10).unwrap();
        assert!(flux_identity_residual(&t) < 1e-8);
    }

    #[test]
    fn theta_rate_matches_lift() {
        let pr = Problem::new(
            WeightFunction::new(WeightFamily::Affine { a0: 1.0, a1: 1.0 }).unwrap(),
            Nonlinearity::prototype(1.5, 11.0).unwrap(),
        );
        let t = integrate_cauchy(&RegularizedOperator::new(8), &pr, 0.7, 1e-11).unwrap();
        for x in [0.1, 0.33, 0.5, 0.77, 0.9] {
            let h = 1e-5;
            let fd = (t.theta_at(x + h) - t.theta_at(x - h)) / (2.0 * h);
            let r = theta_rate(&t, x);
            assert!((fd - r).abs() < 1e-5 * r.abs().max(1.0), "x={x}: {fd} vs {r}");
        }
    }

    #[test]
    fn csv_layout() {
        let pr = prob(1.0, 3.0);
        let t = integrate_cauchy(&RegularizedOperator::new(2), &pr, 0.5, 1e-8).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("x,u,v,theta,energy"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 5);
        assert_eq!(first[1].parse::<f64>().unwrap(), 0.5);
        assert_eq!(s.lines().count(), t.x.len() + 1);
    }

    #[test]
    fn rejects_bad_input() {
        let pr = prob(1.0, 3.0);
        let op = RegularizedOperator::new(2);
        assert!(integrate_cauchy(&op, &pr, -0.1, 1e-10).is_err());
        assert!(integrate_cauchy(&op, &pr, 0.5, 1e-2).is_err());
    }
}
