//! Small numerical kernels shared by the solver modules: adaptive
//! Gauss–Kronrod quadrature and scalar root bracketing.

/// Kronrod abscissae for the 15-point rule (non-negative half, descending).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// Gauss 7-point weights, paired with XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;
/// Cancellation noise above the rounding guard would otherwise bisect
/// every panel down to `MAX_DEPTH`.
const MAX_PANELS: usize = 1 << 14;

/// One G7–K15 panel: returns (kronrod estimate, |kronrod − gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let (k, e, _) = panel(f, a, b);
    (k, e)
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut kabs = fc.abs() * WGK[7];
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = h * x;
        let (fl, fr) = (f(c - dx), f(c + dx));
        let s = fl + fr;
        k += w * s;
        kabs += w * (fl.abs() + fr.abs());
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs(), kabs * h.abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// Panels are bisected until the Kronrod/Gauss discrepancy is below
/// `rel_tol · |I| + abs_tol`, where `|I|` is the running estimate of the
/// whole integral.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, _) = gk15(&f, a, b);
    let target = (rel_tol * whole.abs()).max(abs_tol);
    let mut budget = MAX_PANELS;
    refine(&f, a, b, target, 0, &mut budget)
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32, budget: &mut usize) -> f64 {
    let (val, err, vabs) = panel(f, a, b);
    // stop once the discrepancy is at rounding level
    if !err.is_finite() || err <= tol || err <= 50.0 * f64::EPSILON * vabs || depth >= MAX_DEPTH || *budget < 2 {
        return val;
    }
    *budget -= 2;
    let m = 0.5 * (a + b);
    refine(f, a, m, 0.5 * tol, depth + 1, budget) + refine(f, m, b, 0.5 * tol, depth + 1, budget)
}

/// Bisection for a sign change of `g` on `[lo, hi]`.
///
/// `g(lo)` and `g(hi)` must have opposite signs (or one of them vanish).
/// Stops when the bracket is narrower than `x_tol` or `|g| <= y_tol`.
/// Returns the final bracket midpoint, or `None` if the bracket is invalid.
pub fn bisect<G: FnMut(f64) -> f64>(
    mut g: G,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    y_tol: f64,
) -> Option<f64> {
    let mut glo = g(lo);
    let ghi = g(hi);
    if glo == 0.0 {
        return Some(lo);
    }
    if ghi == 0.0 {
        return Some(hi);
    }
    if glo.signum() == ghi.signum() || !glo.is_finite() || !ghi.is_finite() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= x_tol || mid == lo || mid == hi {
            return Some(mid);
        }
        let gm = g(mid);
        if gm.abs() <= y_tol {
            return Some(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Golden-section search for the maximum of a unimodal `g` on `[a, b]`.
pub fn golden_max<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, x_tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    while (b - a).abs() > x_tol {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, g(x))
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_angle(d: f64) -> f64 {
    use std::f64::consts::PI;
    let two_pi = 2.0 * PI;
    let mut r = d - two_pi * (d / two_pi).round();
    if r <= -PI {
        r += two_pi;
    }
    r
}
