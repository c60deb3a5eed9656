//! Phase plane of the autonomous problem `a(x) ≡ a`, where
//! `H(u, v) = 1 − √(1−v²) + aF(u)` is a first integral.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::Serialize;
use thiserror::Error;

use crate::numeric::{bisect, wrap_angle};
use crate::ode::{DenseStep, Dopri5, Verdict};
use crate::problem::Nonlinearity;
use crate::regularization::RegularizedOperator;

const MAX_TIME: f64 = 1e3;
const FLUX_LIMIT: f64 = 1.0 - 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("|v| = {v} exceeds 1")]
    Domain { v: f64 },
    #[error("no admissible u at level h = {h}")]
    EmptyLevel { h: f64 },
    #[error("orbit does not close: {0}")]
    NotClosed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// `H(u, v)`; `F` is extended by its value at `0` for `u < 0`.
pub fn hamiltonian(a: f64, nl: &Nonlinearity, u: f64, v: f64) -> Result<f64, PhaseError> {
    if !(v.abs() <= 1.0) {
        return Err(PhaseError::Domain { v });
    }
    Ok(v * v / (1.0 + ((1.0 - v) * (1.0 + v)).sqrt()) + a * nl.primitive_hat(u))
}

#[derive(Clone, Debug, Serialize)]
pub struct Curve {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSet {
    pub h: f64,
    pub components: Vec<Curve>,
    /// The admissible `u`-set splits into more than one interval.
    pub disconnected: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum End {
    Fold,
    Cut,
}

/// Level set `{H = h}` inside `u_range`, assembled into polylines.
pub fn level_set(
    a: f64,
    nl: &Nonlinearity,
    h: f64,
    u_range: (f64, f64),
    samples: usize,
) -> Result<LevelSet, PhaseError> {
    if !(h >= 0.0) || !(a > 0.0) {
        return Err(PhaseError::InvalidInput("need h ≥ 0 and a > 0".into()));
    }
    if !(u_range.0 < u_range.1) || samples < 8 {
        return Err(PhaseError::InvalidInput("need u_min < u_max and at least 8 samples".into()));
    }
    let u0 = nl.u0();
    if h == 0.0 {
        if u_range.0 <= u0 && u0 <= u_range.1 {
            return Ok(LevelSet {
                h,
                components: vec![Curve { points: vec![(u0, 0.0)], closed: true }],
                disconnected: false,
            });
        }
        return Err(PhaseError::EmptyLevel { h });
    }
    let g = |u: f64| h - a * nl.primitive_hat(u);
    let admissible = |u: f64| {
        let gv = g(u);
        (0.0..=1.0).contains(&gv)
    };

    // coarse scan; u0 is added so that thin wells are not missed
    let (lo, hi) = u_range;
    let mut grid: Vec<f64> = (0..=samples).map(|i| lo + (hi - lo) * i as f64 / samples as f64).collect();
    if lo < u0 && u0 < hi {
        grid.push(u0);
        grid.sort_by(|x, y| x.total_cmp(y));
    }
    let mut intervals: Vec<((f64, End), (f64, End))> = Vec::new();
    let mut start: Option<(f64, End)> = if admissible(grid[0]) { Some((grid[0], End::Cut)) } else { None };
    let boundary = |a_in: f64, b_out: f64| -> (f64, End) {
        // the exit is through g = 0 (fold) or g = 1 (|v| = 1)
        let gb = g(b_out);
        let level = if gb < 0.0 { 0.0 } else { 1.0 };
        let (mut inside, mut outside) = (a_in, b_out);
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if admissible(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        let x = inside;
        (x, if level == 0.0 { End::Fold } else { End::Cut })
    };
    for w in grid.windows(2) {
        let (p, q) = (admissible(w[0]), admissible(w[1]));
        match (p, q, start) {
            (false, true, None) => start = Some(boundary(w[1], w[0])),
            (true, false, Some(s)) => {
                intervals.push((s, boundary(w[0], w[1])));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, (*grid.last().expect("non-empty"), End::Cut)));
    }
    if intervals.is_empty() {
        return Err(PhaseError::EmptyLevel { h });
    }

    let vfun = |u: f64| {
        let gv = g(u).clamp(0.0, 1.0);
        (gv * (2.0 - gv)).sqrt()
    };
    let mut components = Vec::new();
    for &((ua, ea), (ub, eb)) in &intervals {
        // clustered abscissae towards both ends
        let m = samples.max(16);
        let us: Vec<f64> = (0..=m)
            .map(|i| {
                let t = 0.5 * (1.0 - (PI * i as f64 / m as f64).cos());
                if i == m {
                    ub
                } else {
                    ua + (ub - ua) * t
                }
            })
            .collect();
        // folds are turning points: v = 0 there by construction
        let vf = |i: usize, u: f64| {
            if (i == 0 && ea == End::Fold) || (i == m && eb == End::Fold) {
                0.0
            } else {
                vfun(u)
            }
        };
        let upper: Vec<(f64, f64)> = us.iter().enumerate().map(|(i, &u)| (u, vf(i, u))).collect();
        let lower: Vec<(f64, f64)> = us.iter().enumerate().rev().map(|(i, &u)| (u, -vf(i, u))).collect();
        match (ea, eb) {
            (End::Fold, End::Fold) => {
                let mut pts = upper;
                pts.extend(lower.into_iter().skip(1));
                components.push(Curve { points: pts, closed: true });
            }
            (End::Fold, End::Cut) => {
                // from (ub, −) around the left fold to (ub, +)
                let mut pts: Vec<(f64, f64)> = lower;
                pts.extend(upper.into_iter().skip(1));
                components.push(Curve { points: pts, closed: false });
            }
            (End::Cut, End::Fold) => {
                let mut pts = upper;
                pts.extend(lower.into_iter().skip(1));
                components.push(Curve { points: pts, closed: false });
            }
            (End::Cut, End::Cut) => {
                components.push(Curve { points: upper, closed: false });
                components.push(Curve { points: lower, closed: false });
            }
        }
    }
    Ok(LevelSet { h, disconnected: intervals.len() > 1, components })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HomoclinicReport {
    pub value: f64,
    pub holds: bool,
}

/// `aF(0) < 1`.
pub fn homoclinic_condition(a: f64, nl: &Nonlinearity) -> HomoclinicReport {
    let value = a * nl.primitive(0.0);
    HomoclinicReport { value, holds: value < 1.0 }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhasePortrait {
    pub a: f64,
    pub h_levels: Vec<f64>,
    pub curves: Vec<LevelSet>,
    pub homoclinic: HomoclinicReport,
    /// Levels `h ≥ 1` whose level set disconnects.
    pub breakdown_levels: Vec<f64>,
}

pub fn phase_portrait(
    a: f64,
    nl: &Nonlinearity,
    levels: &[f64],
    u_range: (f64, f64),
    samples: usize,
) -> Result<PhasePortrait, PhaseError> {
    let mut curves = Vec::new();
    let mut breakdown = Vec::new();
    for &h in levels {
        let ls = level_set(a, nl, h, u_range, samples)?;
        if h >= 1.0 && ls.disconnected {
            breakdown.push(h);
        }
        curves.push(ls);
    }
    Ok(PhasePortrait {
        a,
        h_levels: levels.to_vec(),
        curves,
        homoclinic: homoclinic_condition(a, nl),
        breakdown_levels: breakdown,
    })
}

/// `2π/√(a f′(u0))`, the period of the linearization at the centre.
pub fn linearized_period(a: f64, nl: &Nonlinearity) -> f64 {
    2.0 * PI / (a * nl.fprime(nl.u0())).sqrt()
}

/// `2π/√f′(u0)`; coincides with [`linearized_period`] when `a = 1`.
pub fn unweighted_period(nl: &Nonlinearity) -> f64 {
    2.0 * PI / nl.fprime(nl.u0()).sqrt()
}

/// Period of the closed orbit through `(u0 + amplitude, 0)`.
pub fn orbit_period(a: f64, nl: &Nonlinearity, amplitude: f64, tol: f64) -> Result<f64, PhaseError> {
    if amplitude == 0.0 || !amplitude.is_finite() {
        return Err(PhaseError::InvalidInput("amplitude must be non-zero".into()));
    }
    let u0 = nl.u0();
    let start = u0 + amplitude;
    if start < 0.0 {
        return Err(PhaseError::NotClosed("start below 0".into()));
    }
    let h0 = a * nl.primitive(start);
    let bound = (a * nl.primitive(0.0)).min(1.0);
    if h0 >= bound {
        return Err(PhaseError::NotClosed(format!("H = {h0} ≥ min(1, aF(0)) = {bound}")));
    }
    // n above the largest slope on the level set keeps φₙ = φ along the orbit
    let vmax = (h0 * (2.0 - h0)).sqrt();
    let slope = vmax / ((1.0 - vmax) * (1.0 + vmax)).sqrt();
    let op = RegularizedOperator::new((2.0 * slope).ceil() as u32 + 1);

    let angle = |y: &[f64; 2]| (-y[1]).atan2(y[0]);
    let mut lifted = 0.0;
    let mut last: Option<DenseStep<2>> = None;
    let mut bad = None;
    let mut solver = Dopri5::<2>::new(tol, (tol * amplitude.abs().min(1.0)).max(1e-15));
    solver.h_max = 0.05;
    solver
        .solve(
            |_, y| [op.phi_inv(y[1]), -a * nl.f_hat(u0 + y[0])],
            0.0,
            [amplitude, 0.0],
            MAX_TIME,
            |s| {
                let (y0, ym, y1) = (s.start(), s.eval(s.x0 + 0.5 * s.h), s.end());
                let (d1, d2) = (wrap_angle(angle(&ym) - angle(&y0)), wrap_angle(angle(&y1) - angle(&ym)));
                if d1.abs() > FRAC_PI_4 || d2.abs() > FRAC_PI_4 {
                    return Verdict::Reject;
                }
                if y1[1].abs() >= FLUX_LIMIT {
                    bad = Some(s.x1());
                    return Verdict::Stop;
                }
                lifted += d1 + d2;
                if lifted >= 2.0 * PI {
                    last = Some(s.clone());
                    return Verdict::Stop;
                }
                Verdict::Accept
            },
        )
        .map_err(|e| PhaseError::NotClosed(e.to_string()))?;
    if let Some(x) = bad {
        return Err(PhaseError::NotClosed(format!("|v| reached 1 at t = {x}")));
    }
    let Some(s) = last else {
        return Err(PhaseError::NotClosed(format!("no return before t = {MAX_TIME}")));
    };
    let before = lifted - wrap_angle(angle(&s.end()) - angle(&s.start()));
    let theta_in = |t: f64| before + wrap_angle(angle(&s.eval(t)) - angle(&s.start()));
    let t = bisect(|t| theta_in(t) - 2.0 * PI, s.x0, s.x1(), 1e-10, 0.0)
        .ok_or_else(|| PhaseError::NotClosed("return crossing not bracketed".into()))?;
    Ok(t)
}
