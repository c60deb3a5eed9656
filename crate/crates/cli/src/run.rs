//! Dispatch of a validated configuration to the solver modules.

use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use mcshoot_core::bv_limit::{classical_criteria, solve_limit, BvError};
use mcshoot_core::eigen::{eigenvalue, EigenResult};
use mcshoot_core::phase::{linearized_period, orbit_period, phase_portrait};
use mcshoot_core::problem::check_structural;
use mcshoot_core::shooting::{rotation_number, solve_approx, ShootError};
use mcshoot_core::{integrate_cauchy, Problem, RegularizedOperator, Trajectory, WeightFamily};

use crate::config::{ConfigError, Mode, RunConfig};
use crate::output::{fmt, write_json, write_polylines, Table};
use crate::verify;

/// Eigenvalues are cheap, so they always run at least this tight.
const EIG_TOL: f64 = 1e-12;

/// Explains a probe or scan failure in terms of the oscillation hypothesis
/// `f′(u0) > λ_{k+1}`.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub error: String,
    pub k: usize,
    pub hypothesis: String,
    pub fprime_u0: f64,
    pub lambda_k_plus_1: Option<f64>,
    pub holds: Option<bool>,
    pub likely_cause: String,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}", .0.error)]
    Hypothesis(Box<HypothesisReport>),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verification failed: {0} check(s)")]
    Verify(usize),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Hypothesis(_) => 3,
            RunError::Numerical(_) => 4,
            RunError::Verify(_) | RunError::Io(_) => 1,
        }
    }
}

pub fn hypothesis_report(problem: &Problem, k: usize, tol: f64, error: String) -> HypothesisReport {
    let fp = problem.nl.fprime(problem.u0());
    let lam = eigenvalue(&problem.weight, k + 1, EIG_TOL.min(tol)).ok().map(|e| e.lambda_k);
    let holds = lam.map(|l| fp > l);
    let likely_cause = match holds {
        Some(false) => format!(
            "f'(u0) = {fp} does not exceed lambda_{} = {}: the rotation number near u0 stays below {k}",
            k + 1,
            lam.unwrap_or(f64::NAN)
        ),
        Some(true) => "the hypothesis holds; the regularization index is likely too small for the rotation to exceed k, \
                       or the scan grid missed a bracket"
            .to_string(),
        None => "eigenvalue lambda_{k+1} could not be computed".to_string(),
    };
    HypothesisReport {
        error,
        k,
        hypothesis: format!("f'(u0) > lambda_{}", k + 1),
        fprime_u0: fp,
        lambda_k_plus_1: lam,
        holds,
        likely_cause,
    }
}

fn shoot_error(problem: &Problem, k: usize, tol: f64, e: ShootError) -> RunError {
    match e {
        ShootError::NotReached { .. } | ShootError::MissingSolution { .. } => {
            RunError::Hypothesis(Box::new(hypothesis_report(problem, k, tol, e.to_string())))
        }
        other => RunError::Numerical(other.to_string()),
    }
}

/// Outcome of a successful run.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    versions: serde_json::Value,
    threads: usize,
    timings: serde_json::Value,
    files: &'a [String],
    status: &'a str,
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

/// Runs the configured mode, writing everything under `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let problem = cfg.problem.build()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Out { dir: cfg.output_dir.clone(), files: Vec::new() };
    let start = Instant::now();
    let result = match cfg.mode {
        Mode::Eig => run_eig(cfg, &problem, &mut out),
        Mode::Rotation => run_rotation(cfg, &problem, &mut out),
        Mode::SolveApprox => run_solve(cfg, &problem, &mut out),
        Mode::Limit => run_limit(cfg, &problem, &mut out),
        Mode::Phase => run_phase(cfg, &problem, &mut out),
        Mode::Check => run_check(cfg, &problem, &mut out),
        Mode::Verify => run_verify(cfg, &problem, &mut out),
    };
    let elapsed = start.elapsed().as_secs_f64();
    if let Err(RunError::Hypothesis(h)) = &result {
        let p = out.path("hypothesis.json");
        write_json(&p, h.as_ref())?;
    }
    let status = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("exit {}: {e}", e.exit_code()),
    };
    let manifest = Manifest {
        config: cfg,
        versions: json!({
            "mcshoot": env!("CARGO_PKG_VERSION"),
        }),
        threads: rayon::current_num_threads(),
        timings: json!({ "total_s": elapsed }),
        files: &out.files,
        status: &status,
    };
    write_json(&out.dir.join("manifest.json"), &manifest)?;
    result?;
    Ok(RunSummary { mode: cfg.mode, output_dir: out.dir, files: out.files })
}

fn write_trajectory(path: &Path, t: &Trajectory) -> io::Result<()> {
    t.write_csv(BufWriter::new(fs::File::create(path)?))
}

fn run_eig(cfg: &RunConfig, problem: &Problem, out: &mut Out) -> Result<(), RunError> {
    let res: Vec<EigenResult> = (1..=cfg.k)
        .into_par_iter()
        .map(|k| eigenvalue(&problem.weight, k, EIG_TOL.min(cfg.tol)))
        .collect::<Result<_, _>>()
        .map_err(|e| RunError::Numerical(e.to_string()))?;
    let mut t = Table::create(&out.path("eigenvalues.csv"), &["k", "lambda_k", "prufer_terminal", "bisection_width"])?;
    for e in &res {
        t.row([e.k.to_string(), fmt(e.lambda_k), fmt(e.prufer_terminal), fmt(e.bisection_width)])?;
    }
    t.finish()?;
    Ok(())
}

fn run_rotation(cfg: &RunConfig, problem: &Problem, out: &mut Out) -> Result<(), RunError> {
    let op = RegularizedOperator::new(cfg.n);
    let ds: Vec<f64> = match (cfg.d, cfg.d_range) {
        (Some(d), _) => vec![d],
        (None, Some((lo, hi, count))) => {
            (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
        }
        (None, None) => unreachable!("validated"),
    };
    let u0 = problem.u0();
    let rots: Vec<f64> = ds
        .par_iter()
        .map(|&d| if d == u0 { Ok(0.0) } else { rotation_number(&op, problem, d, cfg.tol) })
        .collect::<Result<_, _>>()
        .map_err(|e| RunError::Numerical(e.to_string()))?;
    let mut t = Table::create(&out.path("rotation.csv"), &["d", "rotation"])?;
    for (d, r) in ds.iter().zip(&rots) {
        t.row([fmt(*d), fmt(*r)])?;
    }
    t.finish()?;
    if let Some(d) = cfg.d {
        let tr = integrate_cauchy(&op, problem, d, cfg.tol).map_err(|e| RunError::Numerical(e.to_string()))?;
        write_trajectory(&out.path("trajectory.csv"), &tr)?;
    }
    Ok(())
}

fn run_solve(cfg: &RunConfig, problem: &Problem, out: &mut Out) -> Result<(), RunError> {
    let op = RegularizedOperator::new(cfg.n);
    let r = solve_approx(&op, problem, cfg.k, cfg.tol).map_err(|e| shoot_error(problem, cfg.k, cfg.tol, e))?;
    for s in &r.solutions {
        write_trajectory(&out.path(&format!("solution_{}_{}.csv", s.side, s.j)), &s.trajectory)?;
    }
    let summary = json!({
        "n": cfg.n,
        "k": cfg.k,
        "u0": problem.u0(),
        "probe": r.probe,
        "upper_bound": r.upper_bound,
        "solutions": r.solutions.iter().map(|s| s.summary()).collect::<Vec<_>>(),
        "extras": r.extras.iter().map(|s| s.summary()).collect::<Vec<_>>(),
    });
    write_json(&out.path("summary.json"), &summary)?;
    Ok(())
}

fn run_limit(cfg: &RunConfig, problem: &Problem, out: &mut Out) -> Result<(), RunError> {
    let params = cfg.limit_params();
    let r = solve_limit(problem, cfg.j, cfg.side, &cfg.ladder, &params).map_err(|e| match e {
        BvError::FamilyLost { cause: c @ (ShootError::NotReached { .. } | ShootError::MissingSolution { .. }), n, .. } => {
            RunError::Hypothesis(Box::new(hypothesis_report(
                problem,
                cfg.j,
                cfg.tol,
                format!("family (j = {}, {}) lost at n = {n}: {c}", cfg.j, cfg.side),
            )))
        }
        BvError::InvalidInput(m) => RunError::Config(ConfigError { key: "ladder".into(), msg: m }),
        other => RunError::Numerical(other.to_string()),
    })?;
    for s in &r.ladder {
        write_trajectory(&out.path(&format!("rung_{:04}.csv", s.n)), &s.trajectory)?;
    }
    let mut t = Table::create(&out.path("limit_profile.csv"), &["x", "u", "v", "energy", "in_window"])?;
    for i in 0..r.x_grid.len() {
        t.row([
            fmt(r.x_grid[i]),
            fmt(r.u_limit[i]),
            fmt(r.v_limit[i]),
            fmt(r.energy_limit[i]),
            u8::from(r.in_window[i]).to_string(),
        ])?;
    }
    t.finish()?;
    write_json(&out.path("report.json"), &r.report(cfg.energy_tol))?;
    Ok(())
}

fn run_phase(cfg: &RunConfig, problem: &Problem, out: &mut Out) -> Result<(), RunError> {
    let a = match problem.weight.family {
        WeightFamily::Constant { a0 } => a0,
        _ => unreachable!("validated"),
    };
    let nl = &problem.nl;
    let u0 = problem.u0();
    let u_range = cfg.u_range.unwrap_or((0.0, 3.0 * u0));
    let levels = if cfg.levels.is_empty() {
        let top = (a * nl.primitive(0.0)).min(1.0);
        [0.25, 0.5, 0.75, 1.0].iter().map(|t| t * top).collect()
    } else {
        cfg.levels.clone()
    };
    let pp = phase_portrait(a, nl, &levels, u_range, cfg.samples).map_err(|e| RunError::Numerical(e.to_string()))?;
    let mut level_info = Vec::new();
    for (i, ls) in pp.curves.iter().enumerate() {
        let comps: Vec<Vec<(f64, f64)>> = ls.components.iter().map(|c| c.points.clone()).collect();
        let name = format!("level_{i}.dat");
        write_polylines(&out.path(&name), &comps)?;
        level_info.push(json!({
            "file": name,
            "h": ls.h,
            "components": ls.components.len(),
            "closed": ls.components.iter().map(|c| c.closed).collect::<Vec<_>>(),
            "disconnected": ls.disconnected,
        }));
    }
    let periods: Vec<serde_json::Value> = cfg
        .amplitudes
        .par_iter()
        .map(|&amp| match orbit_period(a, nl, amp, cfg.tol) {
            Ok(p) => json!({ "amplitude": amp, "period": p }),
            Err(e) => json!({ "amplitude": amp, "period": null, "error": e.to_string() }),
        })
        .collect();
    let summary = json!({
        "a": a,
        "u_range": u_range,
        "levels": level_info,
        "homoclinic": pp.homoclinic,
        "breakdown_levels": pp.breakdown_levels,
        "linearized_period": linearized_period(a, nl),
        "periods": periods,
    });
    write_json(&out.path("phase.json"), &summary)?;
    Ok(())
}

fn run_check(cfg: &RunConfig, problem: &Problem, out: &mut Out) -> Result<(), RunError> {
    let crit = classical_criteria(problem, None);
    let structural = check_structural(&problem.nl, 1024).map_err(|e| RunError::Numerical(e.to_string()))?;
    let fp = problem.nl.fprime(problem.u0());
    let lam = eigenvalue(&problem.weight, cfg.k + 1, EIG_TOL.min(cfg.tol)).map_err(|e| RunError::Numerical(e.to_string()))?;
    let report = json!({
        "u0": problem.u0(),
        "weight": {
            "min_a": problem.weight.min_a,
            "max_a": problem.weight.max_a,
            "norm_l1": problem.weight.norm_l1,
            "c_a": problem.weight.c_a,
            "c_gronwall": problem.weight.c_gronwall,
        },
        "structural": structural,
        "oscillation": {
            "k": cfg.k,
            "fprime_u0": fp,
            "lambda_k_plus_1": lam.lambda_k,
            "holds": fp > lam.lambda_k,
        },
        "criteria": crit,
    });
    write_json(&out.path("criteria.json"), &report)?;
    Ok(())
}

fn run_verify(cfg: &RunConfig, problem: &Problem, out: &mut Out) -> Result<(), RunError> {
    let rows = verify::run_suite(problem, cfg.tol);
    println!("{}", verify::table(&rows));
    write_json(&out.path("verify.json"), &rows)?;
    let failed = rows.iter().filter(|r| r.status == verify::Status::Fail).count();
    if failed > 0 {
        return Err(RunError::Verify(failed));
    }
    Ok(())
}
