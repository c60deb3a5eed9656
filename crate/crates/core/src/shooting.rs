//! Shooting on the initial value `d = u(0)`: for each regularization index
//! `n` and half-turn count `j`, find `d` with `θ_d(1) − θ_d(0) = jπ`, on both
//! sides of the equilibrium.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{flux_identity_residual, integrate_cauchy, IntegratorError, Trajectory};
use crate::numeric::bisect;
use crate::problem::{compute_ubar, Problem};
use crate::regularization::RegularizedOperator;

pub const GRID_POINTS: usize = 256;
pub const GRID_REFINE: usize = 8;
pub const ROTATION_TOL: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-8;
const PROBE_LEVELS: i32 = 40;
const SCAN_CAP_FACTOR: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

impl Side {
    /// `−1` below the equilibrium, `+1` above.
    pub fn sign(self) -> f64 {
        match self {
            Side::Below => -1.0,
            Side::Above => 1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Below => "below",
            Side::Above => "above",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "below" => Ok(Side::Below),
            "above" => Ok(Side::Above),
            other => Err(format!("side must be 'below' or 'above', got '{other}'")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootError {
    #[error(
        "rotation near u0 never exceeded {k} (delta = {delta:e}, below {rot_below:.6}, above {rot_above:.6})"
    )]
    NotReached { k: usize, delta: f64, rot_below: f64, rot_above: f64 },
    #[error("no d with rotation < 1 found below {cap}")]
    ScanFailure { cap: f64 },
    #[error("no solution for j = {j} on the {side} side: {detail}")]
    MissingSolution { j: usize, side: Side, detail: String },
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Regularized Neumann solution with exactly `j` crossings of `u0`.
#[derive(Clone, Debug)]
pub struct ApproxSolution {
    pub n: u32,
    pub j: usize,
    pub side: Side,
    pub d: f64,
    pub rotation: f64,
    pub trajectory: Trajectory,
    pub zeros: Vec<f64>,
    pub boundary_residual: f64,
    pub extremum_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolutionSummary {
    pub n: u32,
    pub j: usize,
    pub side: Side,
    pub d: f64,
    pub rotation: f64,
    pub zeros: Vec<f64>,
    pub boundary_residual: f64,
    pub flux_residual: f64,
    pub extremum_gap: f64,
    pub sup_abs_slope: f64,
}

impl ApproxSolution {
    fn from_trajectory(t: Trajectory, j: usize, side: Side) -> Self {
        let zeros = count_zeros(&t);
        let extremum_gap = extremum_gap(&t);
        ApproxSolution {
            n: t.n,
            j,
            side,
            d: t.d,
            rotation: t.rotation(),
            boundary_residual: t.v.last().copied().unwrap_or(0.0).abs(),
            zeros,
            extremum_gap,
            trajectory: t,
        }
    }

    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            n: self.n,
            j: self.j,
            side: self.side,
            d: self.d,
            rotation: self.rotation,
            zeros: self.zeros.clone(),
            boundary_residual: self.boundary_residual,
            flux_residual: flux_identity_residual(&self.trajectory),
            extremum_gap: self.extremum_gap,
            sup_abs_slope: self.trajectory.sup_abs_slope(),
        }
    }
}

/// `(θ(1) − θ(0))/π` for the Cauchy problem started at `d`.
pub fn rotation_number(op: &RegularizedOperator, problem: &Problem, d: f64, tol: f64) -> Result<f64, ShootError> {
    if d == problem.u0() {
        return Err(ShootError::InvalidInput("d = u0 has no rotation".into()));
    }
    Ok(integrate_cauchy(op, problem, d, tol)?.rotation())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probe {
    pub delta: f64,
    pub rot_below: f64,
    pub rot_above: f64,
}

/// Shrinks `δ = u0·2^{−m}` until both `u0 ± δ` rotate more than `k` half-turns.
pub fn probe_near_u0(op: &RegularizedOperator, problem: &Problem, k: usize, tol: f64) -> Result<Probe, ShootError> {
    let u0 = problem.u0();
    let mut last = Probe { delta: u0, rot_below: 0.0, rot_above: 0.0 };
    let kf = k as f64;
    for m in 1..=PROBE_LEVELS {
        let delta = u0 * 0.5f64.powi(m);
        let rb = rotation_number(op, problem, u0 - delta, tol)?;
        let ra = rotation_number(op, problem, u0 + delta, tol)?;
        last = Probe { delta, rot_below: rb, rot_above: ra };
        if rb > kf && ra > kf {
            return Ok(last);
        }
    }
    Err(ShootError::NotReached { k, delta: last.delta, rot_below: last.rot_below, rot_above: last.rot_above })
}

/// Geometric scan `d = u0(1 + 2^{m−6})` until the rotation drops below one.
pub fn scan_upper_bound(op: &RegularizedOperator, problem: &Problem, tol: f64) -> Result<f64, ShootError> {
    let u0 = problem.u0();
    let cap = SCAN_CAP_FACTOR * u0;
    let mut m = 0;
    loop {
        let d = u0 * (1.0 + 2f64.powi(m - 6));
        if d > cap {
            return Err(ShootError::ScanFailure { cap });
        }
        if let Ok(r) = rotation_number(op, problem, d, tol) {
            if r < 1.0 {
                return Ok(d);
            }
        }
        m += 1;
    }
}

/// `ū` when it exists, otherwise the scanned bound. The returned value
/// always has rotation below one.
pub fn upper_shoot_bound(op: &RegularizedOperator, problem: &Problem, tol: f64) -> Result<f64, ShootError> {
    if let Ok(ubar) = compute_ubar(&problem.nl, &problem.weight) {
        if rotation_number(op, problem, ubar, tol).map(|r| r < 1.0).unwrap_or(false) {
            return Ok(ubar);
        }
    }
    scan_upper_bound(op, problem, tol)
}

/// Zeros of `u − u0`: crossings of `θ(0) + (i − ½)π`, refined to `1e−10` in x.
pub fn count_zeros(t: &Trajectory) -> Vec<f64> {
    if t.degenerate {
        return Vec::new();
    }
    angle_crossings(t, 0.5)
}

/// Crossings of `θ(0) + (i − offset)π` for `i = 1, 2, …` in `(0, 1)`.
fn angle_crossings(t: &Trajectory, offset: f64) -> Vec<f64> {
    let th0 = t.theta[0];
    let mut out = Vec::new();
    let mut i = 1;
    loop {
        let level = th0 + (i as f64 - offset) * PI;
        let Some(idx) = t.theta.iter().position(|&th| th >= level) else {
            break;
        };
        if idx == 0 {
            i += 1;
            continue;
        }
        let (a, b) = (t.x[idx - 1], t.x[idx]);
        let x = bisect(|x| t.theta_at(x) - level, a, b, 1e-12, 0.0).unwrap_or(b);
        if x > 0.0 && x < 1.0 {
            out.push(x);
        }
        i += 1;
    }
    out
}

/// Interior points with `v = 0` (crossings of `θ(0) + iπ`) plus the ends.
pub fn extremum_points(t: &Trajectory) -> Vec<f64> {
    let mut xs = vec![0.0];
    if !t.degenerate {
        xs.extend(angle_crossings(t, 0.0).into_iter().filter(|&x| x < 1.0 - 1e-9));
    }
    xs.push(1.0);
    xs
}

fn extremum_gap(t: &Trajectory) -> f64 {
    extremum_points(t)
        .into_iter()
        .map(|x| t.offset_eval(x).0.abs())
        .fold(f64::INFINITY, f64::min)
}

/// Sup over sampled interior points of `|−(φₙ(u′))′ − a f̂(u)|`, with the
/// derivative taken by fourth-order central differences of the flux.
pub fn equation_residual(t: &Trajectory, samples: usize) -> f64 {
    let p = t.problem();
    let h = 1e-5;
    let v = |x: f64| t.dense_eval(x).1;
    let mut worst = 0.0f64;
    for i in 1..samples {
        let x = i as f64 / samples as f64;
        if x - 2.0 * h <= 0.0 || x + 2.0 * h >= 1.0 {
            continue;
        }
        let dv = (8.0 * (v(x + h) - v(x - h)) - (v(x + 2.0 * h) - v(x - 2.0 * h))) / (12.0 * h);
        let (u, _) = t.dense_eval(x);
        worst = worst.max((-dv - p.weight.eval(x) * p.nl.f_hat(u)).abs());
    }
    worst
}

/// Distances from `u0` for a scan on one side, log-spaced from `delta`.
fn scan_grid(u0: f64, side: Side, delta: f64, upper: f64, points: usize) -> Vec<f64> {
    let far = match side {
        Side::Below => u0,
        Side::Above => upper - u0,
    };
    let ratio = (far / delta).ln();
    (0..points)
        .map(|i| {
            let dist = if i + 1 == points { far } else { delta * (ratio * i as f64 / (points - 1) as f64).exp() };
            match side {
                Side::Below => (u0 - dist).max(0.0),
                Side::Above => u0 + dist,
            }
        })
        .collect()
}

fn rotations(op: &RegularizedOperator, problem: &Problem, ds: &[f64], tol: f64) -> Vec<f64> {
    ds.par_iter()
        .map(|&d| rotation_number(op, problem, d, tol).unwrap_or(f64::NAN))
        .collect()
}

/// Index pairs `(i, i+1)` where `rot − j` changes sign.
fn brackets(ds: &[f64], rots: &[f64], j: usize) -> Vec<(f64, f64)> {
    let jf = j as f64;
    let mut out = Vec::new();
    for i in 0..ds.len().saturating_sub(1) {
        let (g0, g1) = (rots[i] - jf, rots[i + 1] - jf);
        if g0.is_finite() && g1.is_finite() && (g0 == 0.0 || g0.signum() != g1.signum()) {
            out.push((ds[i], ds[i + 1]));
        }
    }
    out
}

/// Bisection on `d` for `rotation = j` inside `[d_a, d_b]`.
pub fn refine_bracket(
    op: &RegularizedOperator,
    problem: &Problem,
    j: usize,
    side: Side,
    d_a: f64,
    d_b: f64,
    tol: f64,
) -> Result<ApproxSolution, ShootError> {
    let jf = j as f64;
    let u0 = problem.u0();
    let mut lo = d_a.min(d_b);
    let mut hi = d_a.max(d_b);
    let glo = rotation_number(op, problem, lo, tol)? - jf;
    let ghi = rotation_number(op, problem, hi, tol)? - jf;
    if glo.signum() == ghi.signum() && glo != 0.0 && ghi != 0.0 {
        return Err(ShootError::MissingSolution { j, side, detail: "bracket lost its sign change".into() });
    }
    let lo_sign = glo.signum();
    let floor = 1e-13 * u0;
    let mut best: Option<Trajectory> = None;
    let mut best_g = f64::INFINITY;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let t = integrate_cauchy(op, problem, mid, tol)?;
        let g = t.rotation() - jf;
        let v1 = t.v.last().copied().unwrap_or(0.0).abs();
        if g.abs() < best_g {
            best_g = g.abs();
            best = Some(t);
        }
        if (g.abs() <= 0.1 * ROTATION_TOL && v1 <= 0.1 * RESIDUAL_TOL) || hi - lo <= floor {
            break;
        }
        if g.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = best.expect("at least one bisection step");
    // at the width floor, a secant step inside the final bracket
    if best_g > 0.1 * ROTATION_TOL {
        let ga = rotation_number(op, problem, lo, tol)? - jf;
        let gb = rotation_number(op, problem, hi, tol)? - jf;
        if ga.signum() != gb.signum() && ga.is_finite() && gb.is_finite() {
            let ds = lo - ga * (hi - lo) / (gb - ga);
            if ds > lo && ds < hi {
                let ts = integrate_cauchy(op, problem, ds, tol)?;
                if (ts.rotation() - jf).abs() < best_g {
                    t = ts;
                }
            }
        }
    }
    Ok(ApproxSolution::from_trajectory(t, j, side))
}

#[derive(Clone, Debug)]
pub struct ShootingResult {
    pub probe: Probe,
    pub upper_bound: f64,
    pub solutions: Vec<ApproxSolution>,
    /// Further roots for an already covered `(j, side)`.
    pub extras: Vec<ApproxSolution>,
}

fn pick(
    op: &RegularizedOperator,
    problem: &Problem,
    j: usize,
    side: Side,
    brs: &[(f64, f64)],
    tol: f64,
) -> Result<(ApproxSolution, Vec<ApproxSolution>), ShootError> {
    let u0 = problem.u0();
    let mut found: Vec<ApproxSolution> = brs
        .par_iter()
        .map(|&(a, b)| refine_bracket(op, problem, j, side, a, b, tol))
        .collect::<Vec<_>>()
        .into_iter()
        .filter_map(Result::ok)
        .collect();
    if found.is_empty() {
        return Err(ShootError::MissingSolution { j, side, detail: "bisection failed in every bracket".into() });
    }
    found.sort_by(|a, b| (b.d - u0).abs().total_cmp(&(a.d - u0).abs()));
    let main = found.remove(0);
    Ok((main, found))
}

fn scan_side(
    op: &RegularizedOperator,
    problem: &Problem,
    side: Side,
    js: &[usize],
    probe: &Probe,
    upper: f64,
    tol: f64,
) -> Result<(Vec<ApproxSolution>, Vec<ApproxSolution>), ShootError> {
    let u0 = problem.u0();
    let mut points = GRID_POINTS;
    let mut pending: Vec<usize> = js.to_vec();
    let mut sols = Vec::new();
    let mut extras = Vec::new();
    for pass in 0..2 {
        let ds = scan_grid(u0, side, probe.delta, upper, points);
        let rots = rotations(op, problem, &ds, tol);
        let mut still = Vec::new();
        for &j in &pending {
            let brs = brackets(&ds, &rots, j);
            if brs.is_empty() {
                still.push(j);
                continue;
            }
            let (main, more) = pick(op, problem, j, side, &brs, tol)?;
            sols.push(main);
            extras.extend(more);
        }
        pending = still;
        if pending.is_empty() {
            break;
        }
        if pass == 0 {
            points = GRID_POINTS * GRID_REFINE;
        }
    }
    if let Some(&j) = pending.first() {
        return Err(ShootError::MissingSolution {
            j,
            side,
            detail: format!("no sign change of rotation − {j} on a {}-point grid", GRID_POINTS * GRID_REFINE),
        });
    }
    Ok((sols, extras))
}

fn probe_failure(k: usize, e: ShootError) -> ShootError {
    match e {
        ShootError::NotReached { rot_below, rot_above, .. } => {
            let (side, rot) = if rot_below <= rot_above { (Side::Below, rot_below) } else { (Side::Above, rot_above) };
            let j = ((rot.max(0.0).floor() as usize) + 1).min(k).max(1);
            ShootError::MissingSolution { j, side, detail: e.to_string() }
        }
        other => other,
    }
}

/// All `2k` shooting solutions for regularization index `n`.
pub fn solve_approx(op: &RegularizedOperator, problem: &Problem, k: usize, tol: f64) -> Result<ShootingResult, ShootError> {
    let u0 = problem.u0();
    if k == 0 {
        return Ok(ShootingResult {
            probe: Probe { delta: u0, rot_below: 0.0, rot_above: 0.0 },
            upper_bound: u0,
            solutions: Vec::new(),
            extras: Vec::new(),
        });
    }
    let probe = probe_near_u0(op, problem, k, tol).map_err(|e| probe_failure(k, e))?;
    let upper = upper_shoot_bound(op, problem, tol)?;
    let js: Vec<usize> = (1..=k).collect();
    let mut solutions = Vec::new();
    let mut extras = Vec::new();
    for side in [Side::Below, Side::Above] {
        let (s, e) = scan_side(op, problem, side, &js, &probe, upper, tol)?;
        solutions.extend(s);
        extras.extend(e);
    }
    solutions.sort_by(|a, b| (a.side, a.j).cmp(&(b.side, b.j)));
    extras.sort_by(|a, b| (a.side, a.j).cmp(&(b.side, b.j)).then(a.d.total_cmp(&b.d)));
    Ok(ShootingResult { probe, upper_bound: upper, solutions, extras })
}

/// One `(j, side)` member. With a `hint` from a neighbouring `n` the bracket
/// is searched locally first; otherwise, or on failure, the full scan runs.
pub fn solve_one(
    op: &RegularizedOperator,
    problem: &Problem,
    j: usize,
    side: Side,
    tol: f64,
    hint: Option<f64>,
) -> Result<ApproxSolution, ShootError> {
    if j == 0 {
        return Err(ShootError::InvalidInput("j must be ≥ 1".into()));
    }
    let u0 = problem.u0();
    let jf = j as f64;
    if let Some(h) = hint {
        let dist0 = (h - u0).abs();
        let g = |d: f64| rotation_number(op, problem, d, tol).map(|r| r - jf);
        if let Ok(gh) = g(h) {
            // widen a window around the hint, staying on the requested side
            let mut w = 1e-3 * dist0.max(1e-6);
            for _ in 0..30 {
                let (a, b) = match side {
                    Side::Below => ((h - w).max(0.0), (h + w).min(u0 - 1e-12 * u0)),
                    Side::Above => ((h - w).max(u0 + 1e-12 * u0), h + w),
                };
                let ga = g(a).unwrap_or(f64::NAN);
                let gb = g(b).unwrap_or(f64::NAN);
                if ga.is_finite() && ga.signum() != gh.signum() {
                    return refine_bracket(op, problem, j, side, a, h, tol);
                }
                if gb.is_finite() && gb.signum() != gh.signum() {
                    return refine_bracket(op, problem, j, side, h, b, tol);
                }
                w *= 2.0;
                if w > u0 {
                    break;
                }
            }
        }
    }
    let probe = probe_near_u0(op, problem, j, tol).map_err(|e| probe_failure(j, e))?;
    let upper = match side {
        Side::Below => u0,
        Side::Above => upper_shoot_bound(op, problem, tol)?,
    };
    let (mut s, _) = scan_side(op, problem, side, &[j], &probe, upper, tol)?;
    Ok(s.remove(0))
}
