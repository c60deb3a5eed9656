//! Following one `(j, side)` family along the regularization ladder, and
//! reading off its limit: convergence away from jump windows, the traces
//! `u(x±)` at generalized intersections, energy continuity, and the
//! classical-solution criteria.

use serde::Serialize;
use thiserror::Error;

use crate::eigen;
use crate::integrator::flux_identity_residual;
use crate::numeric::{bisect, integrate};
use crate::problem::{check_fap_prime, compute_ubar, FapPrimeReport, Problem, WeightFamily};
use crate::regularization::{phi, RegularizedOperator};
use crate::shooting::{solve_one, ApproxSolution, ShootError, Side};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitParams {
    pub delta_jump: f64,
    pub limit_tol: f64,
    pub energy_tol: f64,
    /// Distance from a jump window below which rung agreement is not required.
    pub guard_band: f64,
    pub samples: usize,
    pub tol: f64,
    pub early_stop: bool,
}

impl Default for LimitParams {
    fn default() -> Self {
        LimitParams {
            delta_jump: 1e-3,
            limit_tol: 1e-6,
            energy_tol: 1e-4,
            guard_band: 0.02,
            samples: 10001,
            tol: 1e-10,
            early_stop: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BvError {
    #[error("family (j = {j}, {side}) lost after n = {n}: {cause}")]
    FamilyLost { j: usize, side: Side, n: u32, cause: ShootError },
    #[error("successive rungs differ by {distance:e} > {tol:e} away from jump windows")]
    NoConvergence { distance: f64, tol: f64 },
    #[error("need at least 3 rungs, have {0}")]
    TooFewRungs(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Solutions of one family along the ladder.
#[derive(Clone, Debug)]
pub struct FamilyTrack {
    pub j: usize,
    pub side: Side,
    pub rungs: Vec<ApproxSolution>,
    /// Ladder indices where the solve failed.
    pub gaps: Vec<u32>,
    pub stopped_early: bool,
}

fn looks_classical(s: &ApproxSolution, delta_jump: f64) -> bool {
    let t = &s.trajectory;
    t.sup_abs_flux().1 <= 1.0 - delta_jump && t.sup_abs_slope() < 0.5 * s.n as f64
}

/// Solves the `(j, side)` member for each `n` of the ladder, warm-starting
/// each rung from the previous `d`.
pub fn track_family(
    problem: &Problem,
    j: usize,
    side: Side,
    ladder: &[u32],
    params: &LimitParams,
) -> Result<FamilyTrack, BvError> {
    if j == 0 {
        return Err(BvError::InvalidInput("j must be ≥ 1".into()));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) || ladder.is_empty() {
        return Err(BvError::InvalidInput("ladder must be non-empty and strictly increasing".into()));
    }
    let mut rungs: Vec<ApproxSolution> = Vec::new();
    let mut gaps = Vec::new();
    let mut misses = 0;
    let mut stopped_early = false;
    for &n in ladder {
        let op = RegularizedOperator::new(n);
        let hint = rungs.last().map(|s| s.d);
        match solve_one(&op, problem, j, side, params.tol, hint) {
            Ok(s) => {
                misses = 0;
                rungs.push(s);
            }
            Err(cause) => {
                gaps.push(n);
                misses += 1;
                if misses > 2 {
                    return Err(BvError::FamilyLost { j, side, n, cause });
                }
                continue;
            }
        }
        if params.early_stop && rungs.len() >= 3 {
            let last3 = &rungs[rungs.len() - 3..];
            let settled = (last3[2].d - last3[1].d).abs() <= params.limit_tol;
            if settled && last3.iter().all(|s| looks_classical(s, params.delta_jump)) {
                stopped_early = true;
                break;
            }
        }
    }
    if rungs.is_empty() {
        return Err(BvError::FamilyLost {
            j,
            side,
            n: *ladder.last().expect("non-empty"),
            cause: ShootError::MissingSolution { j, side, detail: "no rung solved".into() },
        });
    }
    Ok(FamilyTrack { j, side, rungs, gaps, stopped_early })
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpWindow {
    /// Edges of `{|v| > 1 − δ_jump}` on the final rung.
    pub lo: f64,
    pub hi: f64,
    pub peak_x: f64,
    pub peak_flux: f64,
    /// Edges of `{|u′| ≥ n}` on the final rung, when non-empty.
    pub active: Option<(f64, f64)>,
    /// Zeros of `u − u0` of the final rung inside the window.
    pub intersections: Vec<f64>,
    /// Local `sup|u′|` on the last three rungs.
    pub slopes: [f64; 3],
    pub confirmed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpDetection {
    pub windows: Vec<JumpWindow>,
    /// Confirmed windows that do not contain exactly one intersection.
    pub anomalies: Vec<JumpWindow>,
    /// Candidates on the final rung that failed confirmation.
    pub unconfirmed: Vec<JumpWindow>,
}

/// Intervals of `[0, 1]` where `|v| > level` on a trajectory, refined by
/// bisection at the edges.
fn flux_intervals(s: &ApproxSolution, level: f64) -> Vec<(f64, f64)> {
    let t = &s.trajectory;
    let above = |x: f64| t.dense_eval(x).1.abs() > level;
    let mut xs = Vec::new();
    for st in t.steps() {
        for k in 0..16 {
            xs.push(st.x0 + st.h * k as f64 / 16.0);
        }
    }
    xs.push(1.0);
    let mut out = Vec::new();
    let mut start: Option<f64> = if above(xs[0]) { Some(xs[0]) } else { None };
    let edge = |a: f64, b: f64| bisect(|x| t.dense_eval(x).1.abs() - level, a, b, 1e-13, 0.0).unwrap_or(a);
    for w in xs.windows(2) {
        match (above(w[0]), above(w[1]), start) {
            (false, true, None) => start = Some(edge(w[0], w[1])),
            (true, false, Some(a)) => {
                out.push((a, edge(w[0], w[1])));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        out.push((a, 1.0));
    }
    out
}

const CONFIRM_MARGIN: f64 = 0.05;

/// Locates jump windows on the final rung and confirms them on the last
/// three rungs: the flux must exceed `1 − δ_jump` nearby on each of them
/// and the local `sup|u′ₙ|` must increase strictly with `n`.
pub fn detect_jumps(rungs: &[ApproxSolution], delta_jump: f64) -> JumpDetection {
    let mut det = JumpDetection { windows: Vec::new(), anomalies: Vec::new(), unconfirmed: Vec::new() };
    if rungs.len() < 3 {
        return det;
    }
    let last3 = &rungs[rungs.len() - 3..];
    let fin = &last3[2];
    let t = &fin.trajectory;
    let cap = t.op().flux_cap();
    for (lo, hi) in flux_intervals(fin, 1.0 - delta_jump) {
        let (peak_x, peak_flux) = t.sup_abs_flux_on(lo, hi);
        let active = flux_intervals(fin, cap)
            .into_iter()
            .find(|&(a, b)| a >= lo - 1e-12 && b <= hi + 1e-12);
        let intersections: Vec<f64> = fin.zeros.iter().copied().filter(|&z| z >= lo && z <= hi).collect();
        let (a, b) = ((lo - CONFIRM_MARGIN).max(0.0), (hi + CONFIRM_MARGIN).min(1.0));
        let mut slopes = [0.0; 3];
        let mut persistent = true;
        for (k, r) in last3.iter().enumerate() {
            let (_, vloc) = r.trajectory.sup_abs_flux_on(a, b);
            slopes[k] = r.trajectory.op().phi_inv(vloc);
            persistent &= vloc > 1.0 - delta_jump;
        }
        let increasing = slopes[0] < slopes[1] && slopes[1] < slopes[2];
        let w = JumpWindow {
            lo,
            hi,
            peak_x,
            peak_flux,
            active,
            intersections,
            slopes,
            confirmed: persistent && increasing,
        };
        if !w.confirmed {
            det.unconfirmed.push(w);
        } else if w.intersections.len() == 1 {
            det.windows.push(w);
        } else {
            det.anomalies.push(w);
        }
    }
    det
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Classical,
    VerticalTangent,
    Discontinuous,
}

/// Classification rule: with no window the limit is classical when the
/// final slope is below `n/2`; with windows it is discontinuous when some
/// trace gap exceeds `10·limit_tol`, otherwise it has vertical tangents.
pub fn classify(window_count: usize, trace_gaps: &[f64], final_sup_slope: f64, n: u32, limit_tol: f64) -> Classification {
    if window_count == 0 {
        if final_sup_slope < 0.5 * n as f64 {
            Classification::Classical
        } else {
            Classification::VerticalTangent
        }
    } else if trace_gaps.iter().any(|&g| g > 10.0 * limit_tol) {
        Classification::Discontinuous
    } else {
        Classification::VerticalTangent
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntersectionKind {
    Regular,
    Generalized,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Intersection {
    pub x: f64,
    pub kind: IntersectionKind,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Jump {
    pub x: f64,
    pub u_minus: f64,
    pub u_plus: f64,
    /// `|a(x)(F(u⁻) − F(u⁺))|`
    pub energy_mismatch: f64,
    /// `|1 + a(x)F(u±) − E(x)|` against the energy just outside the window.
    pub edge_energy_gap: f64,
    /// `u⁻ ≤ u0 ≤ u⁺` or the reverse, as required by the crossing direction.
    pub parity_ok: bool,
    pub raw_u_minus: f64,
    pub raw_u_plus: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ThresholdValue {
    pub value: f64,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AutonomousCriteria {
    /// `aλ^{(p+1)/(p−1)}(p−1)/(2(p+1))`
    pub suff_auton: ThresholdValue,
    /// `(λ₂/(p−1), (2(p+1)/(a(p−1)))^{(p−1)/(p+1)})`
    pub suff_interval: (f64, f64),
    pub interval_nonempty: bool,
    pub lambda_in_interval: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriteriaReport {
    pub fap_holds: bool,
    pub ubar: Option<f64>,
    pub fap_prime: FapPrimeReport,
    /// `a(0)exp(∫a′⁺/a)F(0)`
    pub classical_below: ThresholdValue,
    /// Same factor times `∫_{u0}^{ū} f`, or `∫_{u0}^{R} f` with `R` the
    /// largest ladder value, or `+∞`.
    pub classical_above: ThresholdValue,
    pub classical_above_variant: String,
    pub eta: f64,
    pub n_min_classical: Option<f64>,
    /// `∫₀¹ a|f(u)|` on the limit, `< 1` forces a classical solution.
    pub lgo_value: Option<ThresholdValue>,
    pub autonomous: Option<AutonomousCriteria>,
}

/// Evaluates the classical-solution criteria. Limit-dependent fields are
/// filled when a limit is supplied.
pub fn classical_criteria(problem: &Problem, r: Option<&BVLimitResult>) -> CriteriaReport {
    criteria_with(problem, r.map(|r| (r.lgo_integral(), r.sup_u())))
}

fn criteria_with(problem: &Problem, limit: Option<(f64, f64)>) -> CriteriaReport {
    let w = &problem.weight;
    let nl = &problem.nl;
    let factor = w.eval(0.0) * w.exp_int_aplus;
    let below = factor * nl.primitive(0.0);
    let ubar = compute_ubar(nl, w).ok();
    let fap_prime = check_fap_prime(nl, w);
    let (above, variant) = match (ubar, limit) {
        (Some(ub), _) => (factor * nl.primitive(ub), "ubar".to_string()),
        (None, Some((_, r))) if fap_prime.holds => (factor * nl.primitive(r.max(nl.u0())), "r".to_string()),
        _ => (f64::INFINITY, "infinity".to_string()),
    };
    let eta = 1.0 - below;
    let n_min_classical = (eta > 0.0).then(|| (1.0 / (eta * eta) - 1.0).max(0.0).sqrt());
    let autonomous = match (w.family, nl.prototype_params()) {
        (WeightFamily::Constant { a0 }, Some((lambda, p))) => {
            let s = a0 * lambda.powf((p + 1.0) / (p - 1.0)) * (p - 1.0) / (2.0 * (p + 1.0));
            // Neumann spectrum of −u″ = λa u for constant a
            let lambda2 = std::f64::consts::PI.powi(2) / a0;
            let lo = lambda2 / (p - 1.0);
            let hi = (2.0 * (p + 1.0) / (a0 * (p - 1.0))).powf((p - 1.0) / (p + 1.0));
            Some(AutonomousCriteria {
                suff_auton: ThresholdValue { value: s, holds: s < 1.0 },
                suff_interval: (lo, hi),
                interval_nonempty: lo < hi,
                lambda_in_interval: lo < lambda && lambda < hi,
            })
        }
        _ => None,
    };
    CriteriaReport {
        fap_holds: ubar.is_some(),
        ubar,
        fap_prime,
        classical_below: ThresholdValue { value: below, holds: below < 1.0 },
        classical_above: ThresholdValue { value: above, holds: above < 1.0 },
        classical_above_variant: variant,
        eta,
        n_min_classical,
        lgo_value: limit.map(|(v, _)| ThresholdValue { value: v, holds: v < 1.0 }),
        autonomous,
    }
}

/// `λ₂` of the weighted Neumann problem, from the Prüfer solver.
pub fn second_eigenvalue(problem: &Problem) -> Option<f64> {
    eigen::eigenvalue(&problem.weight, 2, eigen::DEFAULT_TOL).ok().map(|r| r.lambda_k)
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitDiagnostics {
    pub n_final: u32,
    pub d_values: Vec<(u32, f64)>,
    pub sup_slopes: Vec<(u32, f64)>,
    pub sup_fluxes: Vec<(u32, f64)>,
    /// `sup|u_L − u_P|` off windows and guard bands.
    pub raw_distance: f64,
    /// Distance between Richardson extrapolants of the last three rungs.
    pub extrapolated_distance: Option<f64>,
    pub observed_order: Option<f64>,
    /// `"raw"` or `"extrapolated"`.
    pub convergence_test: String,
    /// `max(sup|vₙ| − 1, 0)` on the final rung.
    pub flux_overshoot: f64,
    /// Smallest gap between consecutive intersections, or to `{0, 1}`, across rungs.
    pub intersection_separation: f64,
    /// `max_i |x_{n,i} − x_{2n,i}|` for consecutive rungs.
    pub intersection_shift: Vec<f64>,
    pub extremum_gaps: Vec<(u32, f64)>,
    /// `sup|−(φ(u′))′ − a f(u)|` off windows on the final rung.
    pub limit_residual: f64,
    /// `|∫ a f(u)|` on the limit with traces inside windows.
    pub limit_flux_identity: f64,
    pub final_flux_residual: f64,
    pub sign_pattern_ok: bool,
    pub anomalies: usize,
    pub unconfirmed: usize,
}

/// Assembled limit of one family.
#[derive(Clone, Debug)]
pub struct BVLimitResult {
    pub j: usize,
    pub side: Side,
    pub ladder: Vec<ApproxSolution>,
    pub x_grid: Vec<f64>,
    pub u_limit: Vec<f64>,
    /// Final-rung flux clamped to `[−1, 1]`.
    pub v_limit: Vec<f64>,
    pub energy_limit: Vec<f64>,
    pub in_window: Vec<bool>,
    pub windows: Vec<JumpWindow>,
    pub intersections: Vec<Intersection>,
    pub jumps: Vec<Jump>,
    pub classification: Classification,
    pub criteria: CriteriaReport,
    pub diagnostics: LimitDiagnostics,
    pub detection: JumpDetection,
    lgo: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitReport<'a> {
    pub j: usize,
    pub side: Side,
    pub classification: Classification,
    pub intersections: &'a [Intersection],
    pub jumps: &'a [Jump],
    pub windows: &'a [JumpWindow],
    pub energy: EnergyCheck,
    pub criteria: &'a CriteriaReport,
    pub diagnostics: &'a LimitDiagnostics,
}

impl BVLimitResult {
    pub fn final_rung(&self) -> &ApproxSolution {
        self.ladder.last().expect("non-empty ladder")
    }

    fn lgo_integral(&self) -> f64 {
        self.lgo
    }

    fn sup_u(&self) -> f64 {
        self.ladder
            .iter()
            .flat_map(|s| s.trajectory.u.iter().copied())
            .fold(f64::MIN, f64::max)
    }

    pub fn report(&self, energy_tol: f64) -> LimitReport<'_> {
        LimitReport {
            j: self.j,
            side: self.side,
            classification: self.classification,
            intersections: &self.intersections,
            jumps: &self.jumps,
            windows: &self.windows,
            energy: energy_continuity_check(self, energy_tol),
            criteria: &self.criteria,
            diagnostics: &self.diagnostics,
        }
    }
}

/// Sign of `u − u0` just before the `i`-th intersection (1-based).
fn before_sign(side: Side, i: usize) -> f64 {
    side.sign() * if i % 2 == 1 { 1.0 } else { -1.0 }
}

fn richardson(fine: f64, coarse: f64, q: f64) -> f64 {
    fine + (fine - coarse) / (2f64.powf(q) - 1.0)
}

/// Integral of `g(x, u(x))` over `[0, 1]` where `u` is `profile` off
/// the active regions and the traces `u∓` on either side of each jump inside them.
fn jump_aware_integral<P, G>(fin: &ApproxSolution, profile: P, pieces: &[(f64, f64, f64, f64, f64)], g: G) -> f64
where
    P: Fn(f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    let t = &fin.trajectory;
    let mut cuts = vec![0.0];
    for &(lo, x, hi, _, _) in pieces {
        cuts.extend([lo, x, hi]);
    }
    cuts.push(1.0);
    let mut total = 0.0;
    // off-window pieces follow the rung; window halves use constant traces
    for (k, w) in cuts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let phase = k % 3;
        if k == 0 || phase == 0 {
            let mut knots: Vec<f64> = t.x.iter().copied().filter(|&x| x > a && x < b).collect();
            knots.insert(0, a);
            knots.push(b);
            for kw in knots.windows(2) {
                total += integrate(|x| g(x, profile(x)), kw[0], kw[1], 1e-12, 1e-16);
            }
        } else {
            let piece = &pieces[(k - 1) / 3];
            let u = if phase == 1 { piece.3 } else { piece.4 };
            total += integrate(|x| g(x, u), a, b, 1e-12, 1e-16);
        }
    }
    total
}

/// Builds the limit profile from a tracked family.
pub fn assemble_limit(track: &FamilyTrack, params: &LimitParams) -> Result<BVLimitResult, BvError> {
    let rungs = &track.rungs;
    if rungs.len() < 3 {
        return Err(BvError::TooFewRungs(rungs.len()));
    }
    let k = rungs.len();
    let (pp, p, l) = (&rungs[k - 3], &rungs[k - 2], &rungs[k - 1]);
    let problem = l.trajectory.problem().clone();
    let u0 = problem.u0();
    let a = |x: f64| problem.weight.eval(x);
    let nl = &problem.nl;

    let detection = detect_jumps(rungs, params.delta_jump);
    let windows = detection.windows.clone();

    let m = params.samples.max(3);
    let x_grid: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
    let in_window: Vec<bool> = x_grid.iter().map(|&x| windows.iter().any(|w| x >= w.lo && x <= w.hi)).collect();
    let guarded = |x: f64| {
        windows
            .iter()
            .chain(detection.anomalies.iter())
            .any(|w| x >= w.lo - params.guard_band && x <= w.hi + params.guard_band)
    };

    // rung agreement away from windows
    let off: Vec<f64> = x_grid.iter().copied().filter(|&x| !guarded(x)).collect();
    let ue = |s: &ApproxSolution, x: f64| s.trajectory.dense_eval(x).0;
    let raw_distance = off.iter().map(|&x| (ue(l, x) - ue(p, x)).abs()).fold(0.0, f64::max);
    let (dd1, dd2) = ((pp.d - p.d).abs(), (p.d - l.d).abs());
    let order = (dd1 > 0.0 && dd2 > 0.0 && dd2 < dd1).then(|| (dd1 / dd2).log2().clamp(0.5, 4.0));
    let mut extrapolated_distance = None;
    let convergence_test;
    if raw_distance <= params.limit_tol {
        convergence_test = "raw".to_string();
    } else if let Some(q) = order {
        let dist = off
            .iter()
            .map(|&x| (richardson(ue(l, x), ue(p, x), q) - richardson(ue(p, x), ue(pp, x), q)).abs())
            .fold(0.0, f64::max);
        extrapolated_distance = Some(dist);
        convergence_test = "extrapolated".to_string();
        if dist > params.limit_tol {
            return Err(BvError::NoConvergence { distance: dist, tol: params.limit_tol });
        }
    } else {
        return Err(BvError::NoConvergence { distance: raw_distance, tol: params.limit_tol });
    }

    // traces at the edges of the active region, extrapolated in n
    // the active region of a rung nearest to a window of the final rung
    let active_near = |s: &ApproxSolution, w: &JumpWindow| -> Option<(f64, f64)> {
        let cap = s.trajectory.op().flux_cap();
        let (a0, b0) = ((w.lo - CONFIRM_MARGIN).max(0.0), (w.hi + CONFIRM_MARGIN).min(1.0));
        flux_intervals(s, cap)
            .into_iter()
            .filter(|&(x0, x1)| x1 >= a0 && x0 <= b0)
            .min_by(|u, v| {
                let c = |iv: &(f64, f64)| (0.5 * (iv.0 + iv.1) - w.peak_x).abs();
                c(u).total_cmp(&c(v))
            })
    };
    let trace_pair = |s: &ApproxSolution, w: &JumpWindow| -> (f64, f64) {
        let t = &s.trajectory;
        match active_near(s, w) {
            Some((x0, x1)) => (t.dense_eval(x0).0, t.dense_eval(x1).0),
            None => {
                let (a0, b0) = ((w.lo - CONFIRM_MARGIN).max(0.0), (w.hi + CONFIRM_MARGIN).min(1.0));
                let (xp, _) = t.sup_abs_flux_on(a0, b0);
                let u = t.dense_eval(xp).0;
                (u, u)
            }
        }
    };
    // jump-aware pieces of one rung: its own active region and raw traces
    let rung_pieces = |s: &ApproxSolution| -> Vec<(f64, f64, f64, f64, f64)> {
        windows
            .iter()
            .map(|w| {
                let xi = w.intersections[0];
                let z = s.zeros.iter().copied().min_by(|a, b| (a - xi).abs().total_cmp(&(b - xi).abs())).unwrap_or(xi);
                let (x0, x1) = active_near(s, w).unwrap_or((z, z));
                let t = &s.trajectory;
                (x0.min(z), z, x1.max(z), t.dense_eval(x0).0, t.dense_eval(x1).0)
            })
            .collect()
    };
    let mut jumps = Vec::new();
    for w in &windows {
        let xi = w.intersections[0];
        let (lm, lp) = trace_pair(l, w);
        let (pm, ppl) = trace_pair(p, w);
        let (qm, qp) = trace_pair(pp, w);
        let obs = |f: f64, c: f64, cc: f64| {
            let (e1, e2) = ((cc - c).abs(), (c - f).abs());
            if e1 > 0.0 && e2 > 0.0 && e2 < e1 {
                (e1 / e2).log2().clamp(0.5, 4.0)
            } else {
                1.0
            }
        };
        let um = richardson(lm, pm, obs(lm, pm, qm));
        let up = richardson(lp, ppl, obs(lp, ppl, qp));
        let ax = a(xi);
        let mismatch = (ax * (nl.primitive_hat(um) - nl.primitive_hat(up))).abs();
        let e_left = l.trajectory.energy_at((w.lo - 1e-9).max(0.0));
        let e_right = l.trajectory.energy_at((w.hi + 1e-9).min(1.0));
        let gap = (1.0 + ax * nl.primitive_hat(um) - e_left)
            .abs()
            .max((1.0 + ax * nl.primitive_hat(up) - e_right).abs());
        let i = l.zeros.iter().position(|&z| z == xi).map(|p| p + 1).unwrap_or(1);
        let s = before_sign(track.side, i);
        let parity_ok = s * (um - u0) >= 0.0 && s * (up - u0) <= 0.0;
        jumps.push(Jump {
            x: xi,
            u_minus: um,
            u_plus: up,
            energy_mismatch: mismatch,
            edge_energy_gap: gap,
            parity_ok,
            raw_u_minus: lm,
            raw_u_plus: lp,
        });
    }

    let lt = &l.trajectory;
    let mut u_limit = Vec::with_capacity(m);
    let mut v_limit = Vec::with_capacity(m);
    let mut energy_limit = Vec::with_capacity(m);
    for (idx, &x) in x_grid.iter().enumerate() {
        let (u, v) = lt.dense_eval(x);
        v_limit.push(v.clamp(-1.0, 1.0));
        if in_window[idx] {
            let (_, jmp) = windows
                .iter()
                .zip(&jumps)
                .find(|(w, _)| x >= w.lo && x <= w.hi)
                .expect("sample flagged inside a window");
            let tr = if x < jmp.x { jmp.u_minus } else { jmp.u_plus };
            u_limit.push(u);
            energy_limit.push(1.0 + a(x) * nl.primitive_hat(tr));
        } else {
            u_limit.push(u);
            energy_limit.push(lt.energy_at(x));
        }
    }

    let intersections: Vec<Intersection> = l
        .zeros
        .iter()
        .map(|&x| Intersection {
            x,
            kind: if windows.iter().any(|w| x >= w.lo && x <= w.hi) {
                IntersectionKind::Generalized
            } else {
                IntersectionKind::Regular
            },
        })
        .collect();

    // sign of u − u0 between intersections, off windows
    let mut sign_pattern_ok = true;
    for (idx, &x) in x_grid.iter().enumerate() {
        if in_window[idx] || l.zeros.iter().any(|&z| (x - z).abs() < 1e-6) {
            continue;
        }
        let before = l.zeros.iter().filter(|&&z| z < x).count();
        let expect = before_sign(track.side, before + 1);
        if expect * (u_limit[idx] - u0) <= 0.0 {
            sign_pattern_ok = false;
        }
    }

    // exact-operator residual off windows
    let h = 1e-5;
    let mut limit_residual = 0.0f64;
    for &x in &off {
        if x - h <= 0.0 || x + h >= 1.0 {
            continue;
        }
        let flux = |y: f64| phi(lt.u_prime_at(y));
        let r = (-(flux(x + h) - flux(x - h)) / (2.0 * h) - a(x) * nl.f_hat(lt.dense_eval(x).0)).abs();
        limit_residual = limit_residual.max(r);
    }

    // identity and lgo integral per rung, extrapolated in n
    let seq = |g: &dyn Fn(f64, f64) -> f64| -> f64 {
        let vals: Vec<f64> = [pp, p, l]
            .iter()
            .map(|s| jump_aware_integral(s, |x| ue(s, x), &rung_pieces(s), g))
            .collect();
        if windows.is_empty() {
            return vals[2];
        }
        let (e1, e2) = ((vals[1] - vals[0]).abs(), (vals[2] - vals[1]).abs());
        if e1 > 0.0 && e2 > 0.0 && e2 < e1 {
            richardson(vals[2], vals[1], (e1 / e2).log2().clamp(0.5, 4.0))
        } else {
            vals[2]
        }
    };
    let limit_flux_identity = seq(&|x, u| a(x) * nl.f_hat(u)).abs();
    let lgo = seq(&|x, u| a(x) * nl.f_hat(u).abs());

    let mut separation = f64::INFINITY;
    for s in rungs {
        let mut pts = vec![0.0];
        pts.extend(s.zeros.iter().copied());
        pts.push(1.0);
        for w in pts.windows(2) {
            separation = separation.min(w[1] - w[0]);
        }
    }
    let intersection_shift: Vec<f64> = rungs
        .windows(2)
        .map(|w| {
            w[0].zeros
                .iter()
                .zip(&w[1].zeros)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();

    let gaps: Vec<f64> = jumps.iter().map(|j| (j.u_plus - j.u_minus).abs()).collect();
    let final_slope = lt.sup_abs_slope();
    let classification = classify(windows.len(), &gaps, final_slope, l.n, params.limit_tol);

    let diagnostics = LimitDiagnostics {
        n_final: l.n,
        d_values: rungs.iter().map(|s| (s.n, s.d)).collect(),
        sup_slopes: rungs.iter().map(|s| (s.n, s.trajectory.sup_abs_slope())).collect(),
        sup_fluxes: rungs.iter().map(|s| (s.n, s.trajectory.sup_abs_flux().1)).collect(),
        raw_distance,
        extrapolated_distance,
        observed_order: order,
        convergence_test,
        flux_overshoot: (lt.sup_abs_flux().1 - 1.0).max(0.0),
        intersection_separation: separation,
        intersection_shift,
        extremum_gaps: rungs.iter().map(|s| (s.n, s.extremum_gap)).collect(),
        limit_residual,
        limit_flux_identity,
        final_flux_residual: flux_identity_residual(lt),
        sign_pattern_ok,
        anomalies: detection.anomalies.len(),
        unconfirmed: detection.unconfirmed.len(),
    };

    let sup_u = rungs.iter().flat_map(|s| s.trajectory.u.iter().copied()).fold(f64::MIN, f64::max);
    let criteria = criteria_with(&problem, Some((lgo, sup_u)));

    Ok(BVLimitResult {
        j: track.j,
        side: track.side,
        ladder: rungs.clone(),
        x_grid,
        u_limit,
        v_limit,
        energy_limit,
        in_window,
        windows,
        intersections,
        jumps,
        classification,
        criteria,
        diagnostics,
        detection,
        lgo,
    })
}

/// Tracks a family and assembles its limit.
pub fn solve_limit(
    problem: &Problem,
    j: usize,
    side: Side,
    ladder: &[u32],
    params: &LimitParams,
) -> Result<BVLimitResult, BvError> {
    let track = track_family(problem, j, side, ladder, params)?;
    assemble_limit(&track, params)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyCheck {
    pub max_jump_mismatch: f64,
    /// Largest jump of the limit energy between adjacent samples.
    pub max_step: f64,
    pub pass: bool,
}

/// Continuity of the limit energy: matching across every jump and no
/// large steps between adjacent samples.
pub fn energy_continuity_check(r: &BVLimitResult, energy_tol: f64) -> EnergyCheck {
    let nl = &r.final_rung().trajectory.problem().nl;
    let w = &r.final_rung().trajectory.problem().weight;
    let max_jump_mismatch = r
        .jumps
        .iter()
        .map(|j| jump_energy_mismatch(w.eval(j.x), nl, j.u_minus, j.u_plus))
        .fold(0.0, f64::max);
    let max_step = r.energy_limit.windows(2).map(|e| (e[1] - e[0]).abs()).fold(0.0, f64::max);
    EnergyCheck { max_jump_mismatch, max_step, pass: max_jump_mismatch <= energy_tol && max_step <= energy_tol }
}

/// `|a(F(u⁻) − F(u⁺))|`.
pub fn jump_energy_mismatch(a: f64, nl: &crate::problem::Nonlinearity, u_minus: f64, u_plus: f64) -> f64 {
    (a * (nl.primitive_hat(u_minus) - nl.primitive_hat(u_plus))).abs()
}
