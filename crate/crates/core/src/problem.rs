//! Problem data: the weight `a(x)` and the nonlinearity `f(u)`, with the
//! derived constants and structural-condition checks used by the solvers.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{bisect, golden_max, integrate};

/// Relative tolerance for every quadrature in this module.
pub const QUAD_RTOL: f64 = 1e-10;

/// Geometric expansion cap for the root search of `ū`, in units of `u0`.
pub const UBAR_CAP_FACTOR: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),
    #[error("nonlinearity evaluation failed at s = {s}")]
    Domain { s: f64 },
    #[error("F never reaches C_a·F(0) = {target} below s_max = {cap}")]
    NotSatisfied { target: f64, cap: f64 },
}

/// Closed-form weight families. All of them have an exact derivative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum WeightFamily {
    /// `a(x) = a0`
    Constant { a0: f64 },
    /// `a(x) = a0 + a1·x`
    Affine { a0: f64, a1: f64 },
    /// `a(x) = a0·exp(σx)`
    Exponential { a0: f64, sigma: f64 },
    /// `a(x) = a0·(1 + ε·cos(πx))`, `|ε| < 1`
    CosinePerturbed { a0: f64, eps: f64 },
}

impl WeightFamily {
    pub fn eval(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            WeightFamily::Constant { a0 } => a0,
            WeightFamily::Affine { a0, a1 } => a0 + a1 * x,
            WeightFamily::Exponential { a0, sigma } => a0 * (sigma * x).exp(),
            WeightFamily::CosinePerturbed { a0, eps } => a0 * (1.0 + eps * (PI * x).cos()),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            WeightFamily::Constant { .. } => 0.0,
            WeightFamily::Affine { a1, .. } => a1,
            WeightFamily::Exponential { a0, sigma } => a0 * sigma * (sigma * x).exp(),
            WeightFamily::CosinePerturbed { a0, eps } => -a0 * eps * PI * (PI * x).sin(),
        }
    }

    fn max_abs_deriv(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            WeightFamily::Constant { .. } => 0.0,
            WeightFamily::Affine { a1, .. } => a1.abs(),
            WeightFamily::Exponential { a0, sigma } => (a0 * sigma).abs() * sigma.exp().max(1.0),
            WeightFamily::CosinePerturbed { a0, eps } => (a0 * eps * PI).abs(),
        }
    }

    fn validate(&self) -> Result<(), ProblemError> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ProblemError::InvalidWeight(format!("{name} must be finite")))
            }
        };
        match *self {
            WeightFamily::Constant { a0 } => finite(a0, "a0")?,
            WeightFamily::Affine { a0, a1 } => {
                finite(a0, "a0")?;
                finite(a1, "a1")?;
            }
            WeightFamily::Exponential { a0, sigma } => {
                finite(a0, "a0")?;
                finite(sigma, "sigma")?;
            }
            WeightFamily::CosinePerturbed { a0, eps } => {
                finite(a0, "a0")?;
                finite(eps, "eps")?;
                if eps.abs() >= 1.0 {
                    return Err(ProblemError::InvalidWeight("|eps| must be < 1".into()));
                }
            }
        }
        // Every family is monotone on [0, 1]; positivity at the ends suffices.
        if self.eval(0.0) <= 0.0 || self.eval(1.0) <= 0.0 {
            return Err(ProblemError::InvalidWeight("a(x) must be positive on [0, 1]".into()));
        }
        Ok(())
    }
}

/// The weight `a ∈ C¹([0,1])`, `a > 0`, together with its derived constants.
#[derive(Clone, Debug, Serialize)]
pub struct WeightFunction {
    pub family: WeightFamily,
    pub min_a: f64,
    pub max_a: f64,
    /// `∫₀¹ a`
    pub norm_l1: f64,
    /// `max|a′| / min a`
    pub c_gronwall: f64,
    /// `exp(∫₀¹ a′⁺/a)`
    pub exp_int_aplus: f64,
    /// `exp(∫₀¹ a′⁻/a)`, with `a′⁻ = max(−a′, 0)`
    pub exp_int_aminus: f64,
    /// Constant entering the `ū` condition.
    pub c_a: f64,
}

impl WeightFunction {
    pub fn new(family: WeightFamily) -> Result<Self, ProblemError> {
        family.validate()?;
        let (e0, e1) = (family.eval(0.0), family.eval(1.0));
        let min_a = e0.min(e1);
        let max_a = e0.max(e1);
        let norm_l1 = integrate(|x| family.eval(x), 0.0, 1.0, QUAD_RTOL, 1e-300);
        let int_plus = integrate(
            |x| family.deriv(x).max(0.0) / family.eval(x),
            0.0,
            1.0,
            QUAD_RTOL,
            1e-15,
        );
        let int_minus = integrate(
            |x| (-family.deriv(x)).max(0.0) / family.eval(x),
            0.0,
            1.0,
            QUAD_RTOL,
            1e-15,
        );
        let mut w = WeightFunction {
            family,
            min_a,
            max_a,
            norm_l1,
            c_gronwall: family.max_abs_deriv() / min_a,
            exp_int_aplus: int_plus.exp(),
            exp_int_aminus: int_minus.exp(),
            c_a: 1.0,
        };
        w.c_a = compute_ca(&w);
        Ok(w)
    }

    pub fn constant(a0: f64) -> Result<Self, ProblemError> {
        Self::new(WeightFamily::Constant { a0 })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.family.eval(x)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        self.family.deriv(x)
    }

    /// True when `a′ ≡ 0` for the chosen parameters.
    pub fn is_constant(&self) -> bool {
        match self.family {
            WeightFamily::Constant { .. } => true,
            WeightFamily::Affine { a1, .. } => a1 == 0.0,
            WeightFamily::Exponential { sigma, .. } => sigma == 0.0,
            WeightFamily::CosinePerturbed { eps, .. } => eps == 0.0,
        }
    }
}

/// `C_a = max{ a(1)/a(0)·exp(∫a′⁻/a), a(0)/a(1)·exp(∫a′⁺/a) }`.
pub fn compute_ca(a: &WeightFunction) -> f64 {
    let (a0, a1) = (a.eval(0.0), a.eval(1.0));
    (a1 / a0 * a.exp_int_aminus).max(a0 / a1 * a.exp_int_aplus)
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum NonlinearityKind {
    /// `f(s) = −λs + sᵖ`
    Prototype { lambda: f64, p: f64 },
    /// User-supplied `f` and `f′`; `F` is tabulated by quadrature.
    Custom { f: ScalarFn, fprime: ScalarFn },
}

impl fmt::Debug for NonlinearityKind {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonlinearityKind::Prototype { lambda, p } => {
                write!(fm, "Prototype {{ lambda: {lambda}, p: {p} }}")
            }
            NonlinearityKind::Custom { .. } => write!(fm, "Custom"),
        }
    }
}

/// Cumulative primitive of a custom `f` on a uniform grid of `[0, s_end]`.
#[derive(Debug)]
struct PrimitiveTable {
    step: f64,
    values: Vec<f64>,
}

const TABLE_NODES: usize = 512;
const TABLE_SPAN: f64 = 8.0;

/// The nonlinearity `f ∈ C¹([0,∞))` with equilibrium `u0`.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    u0: f64,
    table: Option<Arc<PrimitiveTable>>,
}

impl Nonlinearity {
    /// The model family `f(s) = −λs + sᵖ`, `u0 = λ^{1/(p−1)}`.
    pub fn prototype(lambda: f64, p: f64) -> Result<Self, ProblemError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(ProblemError::InvalidNonlinearity("lambda must be > 0".into()));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(ProblemError::InvalidNonlinearity("p must be > 1".into()));
        }
        Ok(Nonlinearity {
            kind: NonlinearityKind::Prototype { lambda, p },
            u0: lambda.powf(1.0 / (p - 1.0)),
            table: None,
        })
    }

    /// Generic hook: `f`, `f′` and the claimed positive zero `u0`.
    pub fn custom<F, G>(f: F, fprime: G, u0: f64) -> Result<Self, ProblemError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(u0.is_finite() && u0 > 0.0) {
            return Err(ProblemError::InvalidNonlinearity("u0 must be > 0".into()));
        }
        let mut nl = Nonlinearity {
            kind: NonlinearityKind::Custom { f: Arc::new(f), fprime: Arc::new(fprime) },
            u0,
            table: None,
        };
        nl.rebuild_table();
        Ok(nl)
    }

    /// Replaces the equilibrium value. Used to exercise the structural
    /// checks on deliberately inconsistent data.
    pub fn with_u0(mut self, u0: f64) -> Self {
        self.u0 = u0;
        self.rebuild_table();
        self
    }

    fn rebuild_table(&mut self) {
        let NonlinearityKind::Custom { f, .. } = &self.kind else {
            return;
        };
        let step = TABLE_SPAN * self.u0 / TABLE_NODES as f64;
        let mut cum = Vec::with_capacity(TABLE_NODES + 1);
        cum.push(0.0);
        for i in 1..=TABLE_NODES {
            let piece = integrate(|s| f(s), (i - 1) as f64 * step, i as f64 * step, 1e-13, 1e-300);
            cum.push(cum[i - 1] + piece);
        }
        let offset = integrate(|s| f(s), 0.0, self.u0, 1e-13, 1e-300);
        let values = cum.into_iter().map(|c| c - offset).collect();
        self.table = Some(Arc::new(PrimitiveTable { step, values }));
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    #[inline]
    pub fn u0(&self) -> f64 {
        self.u0
    }

    /// `(λ, p)` for the prototype family.
    pub fn prototype_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            NonlinearityKind::Prototype { lambda, p } => Some((lambda, p)),
            NonlinearityKind::Custom { .. } => None,
        }
    }

    /// `f(s)` for `s ≥ 0`.
    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Prototype { lambda, p } => -lambda * s + s.powf(*p),
            NonlinearityKind::Custom { f, .. } => f(s),
        }
    }

    #[inline]
    pub fn fprime(&self, s: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Prototype { lambda, p } => -lambda + p * s.powf(p - 1.0),
            NonlinearityKind::Custom { fprime, .. } => fprime(s),
        }
    }

    /// `F(s) = ∫_{u0}^s f` for `s ≥ 0`.
    pub fn primitive(&self, s: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Prototype { lambda, p } => {
                let u0 = self.u0;
                -lambda * (s - u0) * (s + u0) / 2.0 + (s.powf(p + 1.0) - u0.powf(p + 1.0)) / (p + 1.0)
            }
            NonlinearityKind::Custom { f, .. } => {
                let table = self.table.as_ref().expect("custom nonlinearity carries a table");
                let last = table.values.len() - 1;
                let i = ((s / table.step).floor().max(0.0) as usize).min(last);
                let si = i as f64 * table.step;
                table.values[i] + integrate(|t| f(t), si, s, 1e-13, 1e-300)
            }
        }
    }

    /// Extension of `f` by zero on `(−∞, 0)`.
    #[inline]
    pub fn f_hat(&self, s: f64) -> f64 {
        if s >= 0.0 {
            self.f(s)
        } else {
            0.0
        }
    }

    /// `F̂(s) = ∫_{u0}^s f̂`; constant equal to `F(0)` for `s < 0`.
    #[inline]
    pub fn primitive_hat(&self, s: f64) -> f64 {
        self.primitive(s.max(0.0))
    }
}

/// The pair `(a, f)` defining a Neumann problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub weight: WeightFunction,
    pub nl: Nonlinearity,
}

impl Problem {
    pub fn new(weight: WeightFunction, nl: Nonlinearity) -> Self {
        Problem { weight, nl }
    }

    #[inline]
    pub fn u0(&self) -> f64 {
        self.nl.u0()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StructuralReport {
    pub f_eq_ok: bool,
    pub f_sgn_ok: bool,
    pub f_monotone_ok: bool,
}

/// Sample nodes on `[0, 2u0]`: uniform grid plus one dyadic refinement
/// pass towards the sign boundaries `0` and `u0`.
fn structural_nodes(u0: f64, grid_size: usize) -> Vec<f64> {
    let s_max = 2.0 * u0;
    let h = s_max / grid_size as f64;
    let mut nodes: Vec<f64> = (0..=grid_size).map(|i| i as f64 * h).collect();
    for m in 1..=8 {
        let dh = h * 0.5f64.powi(m);
        nodes.push(dh);
        nodes.push(u0 - dh);
        nodes.push(u0 + dh);
    }
    nodes.push(u0);
    nodes.retain(|&s| (0.0..=s_max).contains(&s));
    nodes.sort_by(|a, b| a.total_cmp(b));
    nodes.dedup();
    nodes
}

/// Grid verification of the equilibrium, sign, and primitive-monotonicity
/// conditions.
pub fn check_structural(nl: &Nonlinearity, grid_size: usize) -> Result<StructuralReport, ProblemError> {
    assert!(grid_size >= 16, "grid_size must be at least 16");
    const EQ_TOL: f64 = 1e-12;
    let u0 = nl.u0();
    let nodes = structural_nodes(u0, grid_size);
    let mut fs = Vec::with_capacity(nodes.len());
    let mut prims = Vec::with_capacity(nodes.len());
    for &s in &nodes {
        let (fv, pv) = (nl.f(s), nl.primitive(s));
        if !fv.is_finite() || !pv.is_finite() {
            return Err(ProblemError::Domain { s });
        }
        fs.push(fv);
        prims.push(pv);
    }
    let f0 = nl.f(0.0);
    let fu0 = nl.f(u0);
    if !f0.is_finite() || !fu0.is_finite() {
        return Err(ProblemError::Domain { s: if f0.is_finite() { u0 } else { 0.0 } });
    }
    let f_eq_ok = f0.abs() <= EQ_TOL && fu0.abs() <= EQ_TOL;

    let f_sgn_ok = nodes.iter().zip(&fs).all(|(&s, &fv)| {
        if s > 0.0 && s < u0 {
            fv < 0.0
        } else if s > u0 {
            fv > 0.0
        } else {
            true
        }
    });

    let f_monotone_ok = nodes.windows(2).zip(prims.windows(2)).all(|(s, p)| {
        if s[1] <= u0 {
            p[1] < p[0]
        } else if s[0] >= u0 {
            p[1] > p[0]
        } else {
            true
        }
    });

    Ok(StructuralReport { f_eq_ok, f_sgn_ok, f_monotone_ok })
}

/// Finds `ū > u0` with `F(ū) = C_a·F(0)`.
pub fn compute_ubar(nl: &Nonlinearity, a: &WeightFunction) -> Result<f64, ProblemError> {
    let u0 = nl.u0();
    let f0 = nl.primitive(0.0);
    let target = a.c_a * f0;
    let cap = UBAR_CAP_FACTOR * u0;
    let g = |s: f64| nl.primitive(s) - target;

    let mut lo = u0;
    let mut hi = 2.0 * u0;
    loop {
        let gh = g(hi);
        if !gh.is_finite() {
            return Err(ProblemError::Domain { s: hi });
        }
        if gh >= 0.0 {
            break;
        }
        if hi >= cap {
            return Err(ProblemError::NotSatisfied { target, cap });
        }
        lo = hi;
        hi = (2.0 * hi).min(cap);
    }
    let y_tol = 1e-10 * f0.max(1.0);
    bisect(g, lo, hi, 0.0, y_tol).ok_or(ProblemError::NotSatisfied { target, cap })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FapPrimeReport {
    pub holds: bool,
    pub value: f64,
}

/// `‖a‖_{L¹}·max_{[0,u0]} f⁻`, with `holds` iff the value is `< 1`.
pub fn check_fap_prime(nl: &Nonlinearity, a: &WeightFunction) -> FapPrimeReport {
    let u0 = nl.u0();
    let neg = |s: f64| (-nl.f(s)).max(0.0);
    const N: usize = 1024;
    let h = u0 / N as f64;
    let (mut best_i, mut best) = (0usize, 0.0f64);
    for i in 0..=N {
        let v = neg(i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    if best > 0.0 {
        let lo = (best_i.saturating_sub(1)) as f64 * h;
        let hi = ((best_i + 1).min(N)) as f64 * h;
        let (_, refined) = golden_max(neg, lo, hi, 1e-12 * u0.max(1.0));
        best = best.max(refined);
    }
    let value = a.norm_l1 * best;
    FapPrimeReport { holds: value < 1.0, value }
}
