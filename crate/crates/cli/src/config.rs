//! Run configuration: a single JSON object, validated key by key so that
//! every rejection names the offending key.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use mcshoot_core::bv_limit::LimitParams;
use mcshoot_core::regularization::dyadic_ladder;
use mcshoot_core::shooting::Side;
use mcshoot_core::{Nonlinearity, Problem, WeightFamily, WeightFunction};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("config error at `{key}`: {msg}")]
pub struct ConfigError {
    pub key: String,
    pub msg: String,
}

fn err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError { key: key.to_string(), msg: msg.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Eig,
    Rotation,
    SolveApprox,
    Limit,
    Phase,
    Check,
    Verify,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "eig" => Mode::Eig,
            "rotation" => Mode::Rotation,
            "solve-approx" => Mode::SolveApprox,
            "limit" => Mode::Limit,
            "phase" => Mode::Phase,
            "check" => Mode::Check,
            "verify" => Mode::Verify,
            other => return Err(format!("unknown mode '{other}'")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlinearityConfig {
    pub kind: String,
    pub lambda: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemConfig {
    pub weight: WeightFamily,
    pub nonlinearity: NonlinearityConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            weight: WeightFamily::Constant { a0: 1.0 },
            nonlinearity: NonlinearityConfig { kind: "prototype".into(), lambda: 1.5, p: 11.0 },
        }
    }
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Problem, ConfigError> {
        let w = WeightFunction::new(self.weight).map_err(|e| err("problem.weight", e.to_string()))?;
        let nl = Nonlinearity::prototype(self.nonlinearity.lambda, self.nonlinearity.p)
            .map_err(|e| err("problem.nonlinearity", e.to_string()))?;
        Ok(Problem::new(w, nl))
    }
}

/// Validated configuration with defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub mode: Mode,
    pub k: usize,
    pub j: usize,
    pub side: Side,
    pub n: u32,
    pub d: Option<f64>,
    /// `(lo, hi, count)`
    pub d_range: Option<(f64, f64, usize)>,
    pub ladder: Vec<u32>,
    pub levels: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub u_range: Option<(f64, f64)>,
    pub samples: usize,
    pub tol: f64,
    pub delta_jump: f64,
    pub limit_tol: f64,
    pub energy_tol: f64,
    pub guard_band: f64,
    pub limit_samples: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let lp = LimitParams::default();
        RunConfig {
            problem: ProblemConfig::default(),
            mode: Mode::Verify,
            k: 1,
            j: 1,
            side: Side::Below,
            n: 8,
            d: None,
            d_range: None,
            ladder: dyadic_ladder(10),
            levels: Vec::new(),
            amplitudes: Vec::new(),
            u_range: None,
            samples: 400,
            tol: 1e-10,
            delta_jump: lp.delta_jump,
            limit_tol: lp.limit_tol,
            energy_tol: lp.energy_tol,
            guard_band: lp.guard_band,
            limit_samples: lp.samples,
            output_dir: PathBuf::from("mcshoot-out"),
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "problem", "mode", "k", "j", "side", "n", "d", "d_range", "ladder", "levels", "amplitudes", "u_range",
    "samples", "tol", "delta_jump", "limit_tol", "energy_tol", "guard_band", "limit_samples", "output_dir",
];

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], prefix: &str) -> Result<(), ConfigError> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            return Err(err(&key, "unknown key"));
        }
    }
    Ok(())
}

/// A number, or a string holding a decimal number.
fn num(v: &Value, key: &str) -> Result<f64, ConfigError> {
    let x = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    match x {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(err(key, "expected a finite number or decimal string")),
    }
}

fn int(v: &Value, key: &str) -> Result<u64, ConfigError> {
    let x = num(v, key)?;
    if x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64 {
        return Err(err(key, "expected a non-negative integer"));
    }
    Ok(x as u64)
}

fn list(v: &Value, key: &str) -> Result<Vec<f64>, ConfigError> {
    let Value::Array(items) = v else {
        return Err(err(key, "expected an array"));
    };
    items.iter().enumerate().map(|(i, x)| num(x, &format!("{key}[{i}]"))).collect()
}

fn string<'a>(v: &'a Value, key: &str) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| err(key, "expected a string"))
}

fn parse_weight(v: &Value) -> Result<WeightFamily, ConfigError> {
    let key = "problem.weight";
    let Value::Object(o) = v else {
        return Err(err(key, "expected an object"));
    };
    let family = string(o.get("family").ok_or_else(|| err("problem.weight.family", "missing"))?, "problem.weight.family")?;
    let field = |name: &str, default: Option<f64>| -> Result<f64, ConfigError> {
        let k = format!("{key}.{name}");
        match (o.get(name), default) {
            (Some(v), _) => num(v, &k),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(err(&k, "missing")),
        }
    };
    let (allowed, fam): (&[&str], WeightFamily) = match family {
        "constant" => (&["family", "a0"], WeightFamily::Constant { a0: field("a0", Some(1.0))? }),
        "affine" => (&["family", "a0", "a1"], WeightFamily::Affine { a0: field("a0", Some(1.0))?, a1: field("a1", None)? }),
        "exponential" => (
            &["family", "a0", "sigma"],
            WeightFamily::Exponential { a0: field("a0", Some(1.0))?, sigma: field("sigma", None)? },
        ),
        "cosine-perturbed" => (
            &["family", "a0", "eps"],
            WeightFamily::CosinePerturbed { a0: field("a0", Some(1.0))?, eps: field("eps", None)? },
        ),
        other => return Err(err("problem.weight.family", format!("unknown family '{other}'"))),
    };
    reject_unknown(o, allowed, key)?;
    Ok(fam)
}

fn parse_nonlinearity(v: &Value) -> Result<NonlinearityConfig, ConfigError> {
    let key = "problem.nonlinearity";
    let Value::Object(o) = v else {
        return Err(err(key, "expected an object"));
    };
    reject_unknown(o, &["kind", "lambda", "p"], key)?;
    let kind = match o.get("kind") {
        Some(v) => string(v, "problem.nonlinearity.kind")?.to_string(),
        None => "prototype".into(),
    };
    if kind != "prototype" {
        return Err(err("problem.nonlinearity.kind", "only 'prototype' can be configured from a file"));
    }
    let lambda = num(o.get("lambda").ok_or_else(|| err("problem.nonlinearity.lambda", "missing"))?, "problem.nonlinearity.lambda")?;
    let p = num(o.get("p").ok_or_else(|| err("problem.nonlinearity.p", "missing"))?, "problem.nonlinearity.p")?;
    Ok(NonlinearityConfig { kind, lambda, p })
}

/// Parses the JSON text of a config. Missing keys take their defaults.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| err("<root>", format!("invalid JSON: {e}")))?;
    let Value::Object(o) = root else {
        return Err(err("<root>", "expected a single JSON object"));
    };
    reject_unknown(&o, TOP_KEYS, "")?;
    let mut c = RunConfig::default();
    if let Some(p) = o.get("problem") {
        let Value::Object(po) = p else {
            return Err(err("problem", "expected an object"));
        };
        reject_unknown(po, &["weight", "nonlinearity"], "problem")?;
        if let Some(w) = po.get("weight") {
            c.problem.weight = parse_weight(w)?;
        }
        if let Some(nl) = po.get("nonlinearity") {
            c.problem.nonlinearity = parse_nonlinearity(nl)?;
        }
    }
    for (k, v) in &o {
        match k.as_str() {
            "problem" => {}
            "mode" => c.mode = string(v, k)?.parse().map_err(|e: String| err(k, e))?,
            "k" => c.k = int(v, k)? as usize,
            "j" => c.j = int(v, k)? as usize,
            "side" => c.side = string(v, k)?.parse().map_err(|e: String| err(k, e))?,
            "n" => c.n = int(v, k)? as u32,
            "d" => c.d = Some(num(v, k)?),
            "d_range" => {
                let r = list(v, k)?;
                if r.len() != 3 {
                    return Err(err(k, "expected [lo, hi, count]"));
                }
                c.d_range = Some((r[0], r[1], int(&v[2], "d_range[2]")? as usize));
            }
            "ladder" => {
                let Value::Array(items) = v else {
                    return Err(err(k, "expected an array"));
                };
                c.ladder = items
                    .iter()
                    .enumerate()
                    .map(|(i, x)| int(x, &format!("ladder[{i}]")).map(|n| n as u32))
                    .collect::<Result<_, _>>()?;
            }
            "levels" => c.levels = list(v, k)?,
            "amplitudes" => c.amplitudes = list(v, k)?,
            "u_range" => {
                let r = list(v, k)?;
                if r.len() != 2 {
                    return Err(err(k, "expected [u_min, u_max]"));
                }
                c.u_range = Some((r[0], r[1]));
            }
            "samples" => c.samples = int(v, k)? as usize,
            "tol" => c.tol = num(v, k)?,
            "delta_jump" => c.delta_jump = num(v, k)?,
            "limit_tol" => c.limit_tol = num(v, k)?,
            "energy_tol" => c.energy_tol = num(v, k)?,
            "guard_band" => c.guard_band = num(v, k)?,
            "limit_samples" => c.limit_samples = int(v, k)? as usize,
            "output_dir" => c.output_dir = PathBuf::from(string(v, k)?),
            _ => unreachable!("unknown keys rejected above"),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| err("<file>", format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

impl RunConfig {
    /// Range checks, including the problem data itself.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let nl = &self.problem.nonlinearity;
        if !(nl.p > 1.0) {
            return Err(err("problem.nonlinearity.p", "p > 1 required"));
        }
        if !(nl.lambda > 0.0) {
            return Err(err("problem.nonlinearity.lambda", "lambda > 0 required"));
        }
        self.problem.build()?;
        if !(1e-13..=1e-4).contains(&self.tol) {
            return Err(err("tol", "must lie in [1e-13, 1e-4]"));
        }
        if !(self.delta_jump > 0.0 && self.delta_jump < 0.5) {
            return Err(err("delta_jump", "must lie in (0, 0.5)"));
        }
        if !(self.limit_tol > 0.0 && self.limit_tol <= 1e-2) {
            return Err(err("limit_tol", "must lie in (0, 1e-2]"));
        }
        if !(self.energy_tol > 0.0 && self.energy_tol <= 1e-1) {
            return Err(err("energy_tol", "must lie in (0, 0.1]"));
        }
        if !(self.guard_band >= 0.0 && self.guard_band < 0.5) {
            return Err(err("guard_band", "must lie in [0, 0.5)"));
        }
        if self.ladder.is_empty() || self.ladder[0] == 0 || self.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(err("ladder", "must be a strictly increasing list of positive integers"));
        }
        if self.n == 0 {
            return Err(err("n", "must be ≥ 1"));
        }
        if self.samples < 8 {
            return Err(err("samples", "must be ≥ 8"));
        }
        if self.limit_samples < 3 {
            return Err(err("limit_samples", "must be ≥ 3"));
        }
        match self.mode {
            Mode::Eig if self.k == 0 => return Err(err("k", "must be ≥ 1")),
            Mode::Limit if self.j == 0 => return Err(err("j", "must be ≥ 1")),
            Mode::Limit if self.ladder.len() < 3 => return Err(err("ladder", "needs at least 3 rungs")),
            Mode::Rotation if self.d.is_none() && self.d_range.is_none() => {
                return Err(err("d", "rotation needs d or d_range"))
            }
            Mode::Phase => {
                if !matches!(self.problem.weight, WeightFamily::Constant { .. }) {
                    return Err(err("problem.weight.family", "phase mode needs a constant weight"));
                }
                if self.levels.iter().any(|&h| h < 0.0) {
                    return Err(err("levels", "levels must be ≥ 0"));
                }
            }
            _ => {}
        }
        if let Some(d) = self.d {
            if d < 0.0 {
                return Err(err("d", "must be ≥ 0"));
            }
        }
        if let Some((lo, hi, count)) = self.d_range {
            if !(lo >= 0.0 && lo < hi) || count < 2 {
                return Err(err("d_range", "need 0 ≤ lo < hi and count ≥ 2"));
            }
        }
        if let Some((a, b)) = self.u_range {
            if !(a < b) {
                return Err(err("u_range", "need u_min < u_max"));
            }
        }
        Ok(())
    }

    pub fn limit_params(&self) -> LimitParams {
        LimitParams {
            delta_jump: self.delta_jump,
            limit_tol: self.limit_tol,
            energy_tol: self.energy_tol,
            guard_band: self.guard_band,
            samples: self.limit_samples,
            tol: self.tol,
            early_stop: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_valid() {
        let c = parse_config_str(
            r#"{"problem": {"weight": {"family": "constant", "a0": 1},
                "nonlinearity": {"kind": "prototype", "lambda": "1.5", "p": 11}},
                "mode": "eig", "k": 3}"#,
        )
        .unwrap();
        assert_eq!(c.mode, Mode::Eig);
        assert_eq!(c.k, 3);
        assert_eq!(c.problem.nonlinearity.lambda, 1.5);
    }

    #[test]
    fn rejections_name_the_key() {
        let e = parse_config_str(r#"{"mode": "limit", "ladder": [8, 4]}"#).unwrap_err();
        assert_eq!(e.key, "ladder");
        let e = parse_config_str(r#"{"problem": {"nonlinearity": {"lambda": 1, "p": 0.5}}}"#).unwrap_err();
        assert_eq!(e.key, "problem.nonlinearity.p");
        let e = parse_config_str(r#"{"mode": "eig", "colour": 3}"#).unwrap_err();
        assert_eq!(e.key, "colour");
        let e = parse_config_str(r#"{"problem": {"weight": {"family": "affine", "a0": 1, "a1": 1, "b": 2}}}"#).unwrap_err();
        assert_eq!(e.key, "problem.weight.b");
        let e = parse_config_str(r#"{"tol": "1e-20"}"#).unwrap_err();
        assert_eq!(e.key, "tol");
        let e = parse_config_str(r#"{"k": 1.5}"#).unwrap_err();
        assert_eq!(e.key, "k");
    }
}
