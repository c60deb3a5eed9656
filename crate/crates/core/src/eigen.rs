//! Neumann eigenvalues of `−u″ = λa(x)u` through the Prüfer angle
//! `ϑ′ = sin²ϑ + λa(x)cos²ϑ`, `ϑ(0) = 0`.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::ode::{Dopri5, OdeError, Verdict};
use crate::problem::WeightFunction;

pub const DEFAULT_TOL: f64 = 1e-12;
const ANGLE_TOL: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("no sign change of ϑ(1) − {target} up to λ = {hi}")]
    BracketFailure { target: f64, hi: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenResult {
    pub k: usize,
    pub lambda_k: f64,
    pub prufer_terminal: f64,
    pub bisection_width: f64,
}

/// `ϑ_λ(1)`.
pub fn prufer_terminal_angle(a: &WeightFunction, lambda: f64, tol: f64) -> Result<f64, EigenError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(EigenError::InvalidInput(format!("lambda = {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let mut solver = Dopri5::<1>::new(tol, tol);
    solver.h_max = 0.05;
    let steps = solver.solve(
        |x, y| {
            let (s, c) = y[0].sin_cos();
            [s * s + lambda * a.eval(x) * c * c]
        },
        0.0,
        [0.0],
        1.0,
        |_| Verdict::Accept,
    )?;
    Ok(steps.last().map(|s| s.end()[0]).unwrap_or(0.0))
}

/// `λ_k`, `k ≥ 1`, solving `ϑ_λ(1) = (k−1)π` by bisection.
pub fn eigenvalue(a: &WeightFunction, k: usize, tol: f64) -> Result<EigenResult, EigenError> {
    if k == 0 {
        return Err(EigenError::InvalidInput("k must be ≥ 1".into()));
    }
    if k == 1 {
        return Ok(EigenResult { k, lambda_k: 0.0, prufer_terminal: 0.0, bisection_width: 0.0 });
    }
    let target = (k - 1) as f64 * PI;
    let g = |l: f64| prufer_terminal_angle(a, l, tol).map(|t| t - target);

    let mut lo = 0.0;
    let mut hi = 4.0 * target * target / a.min_a;
    let mut ghi = g(hi)?;
    let mut grow = 0;
    while ghi <= 0.0 {
        if grow >= 60 {
            return Err(EigenError::BracketFailure { target, hi });
        }
        lo = hi;
        hi *= 2.0;
        ghi = g(hi)?;
        grow += 1;
    }
    if g(lo)? >= 0.0 {
        return Err(EigenError::BracketFailure { target, hi });
    }
    // stop once the bracket is narrow and the midpoint angle is on target
    let mut best = (0.5 * (lo + hi), f64::INFINITY);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let gm = g(mid)?;
        best = (mid, gm);
        if gm.abs() <= ANGLE_TOL && hi - lo <= (1e-10 * mid).max(1e-12) {
            break;
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda_k = best.0;
    let prufer_terminal = best.1 + target;
    Ok(EigenResult { k, lambda_k, prufer_terminal, bisection_width: hi - lo })
}
