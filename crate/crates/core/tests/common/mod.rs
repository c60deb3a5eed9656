//! Independent reference solvers used by the integration tests and the
//! acceptance run. Nothing here calls into the shooting or Prüfer code.
#![allow(dead_code)]

/// Flux of the regularized operator, written out directly.
pub fn phi_n(n: f64, s: f64) -> f64 {
    if s.abs() <= n {
        s / (1.0 + s * s).sqrt()
    } else {
        let c = n / (1.0 + n * n).sqrt();
        let slope = (1.0 + n * n).powf(-1.5);
        s.signum() * (c + slope * (s.abs() - n))
    }
}

pub fn phi_n_prime(n: f64, s: f64) -> f64 {
    let t = s.abs().min(n);
    (1.0 + t * t).powf(-1.5)
}

/// Solves a tridiagonal system in place (Thomas algorithm).
/// `lower[0]` and `upper[m-1]` are ignored.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut b = diag[0];
    c[0] = upper[0] / b;
    rhs[0] /= b;
    for i in 1..m {
        b = diag[i] - lower[i] * c[i - 1];
        if i + 1 < m {
            c[i] = upper[i] / b;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / b;
    }
    for i in (0..m - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Finite-volume Newton solve of `−(φₙ(u′))′ = a f(u)`, `u′(0) = u′(1) = 0`
/// on `nodes` equispaced points, started from `init`. Returns the node
/// values and the final residual max-norm.
pub fn fd_newton<A, F, G>(n: f64, a: A, f: F, fp: G, init: &[f64], iters: usize) -> (Vec<f64>, f64)
where
    A: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let m = init.len();
    let h = 1.0 / (m - 1) as f64;
    let x: Vec<f64> = (0..m).map(|i| i as f64 * h).collect();
    let w: Vec<f64> = (0..m).map(|i| if i == 0 || i == m - 1 { 0.5 * h } else { h }).collect();
    let mut u = init.to_vec();
    let residual = |u: &[f64]| -> Vec<f64> {
        let q: Vec<f64> = (0..m - 1).map(|i| phi_n(n, (u[i + 1] - u[i]) / h)).collect();
        (0..m)
            .map(|i| {
                let right = if i + 1 < m { q[i] } else { 0.0 };
                let left = if i > 0 { q[i - 1] } else { 0.0 };
                -(right - left) - w[i] * a(x[i]) * f(u[i])
            })
            .collect()
    };
    let mut r = residual(&u);
    for _ in 0..iters {
        let dq: Vec<f64> = (0..m - 1).map(|i| phi_n_prime(n, (u[i + 1] - u[i]) / h) / h).collect();
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for i in 0..m {
            diag[i] = -w[i] * a(x[i]) * fp(u[i]);
            if i + 1 < m {
                diag[i] += dq[i];
                upper[i] = -dq[i];
            }
            if i > 0 {
                diag[i] += dq[i - 1];
                lower[i] = -dq[i - 1];
            }
        }
        let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
        thomas(&lower, &diag, &upper, &mut step);
        for (ui, si) in u.iter_mut().zip(&step) {
            *ui += si;
        }
        r = residual(&u);
        if r.iter().fold(0.0f64, |acc, v| acc.max(v.abs())) < 1e-13 {
            break;
        }
    }
    let rmax = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    (u, rmax)
}

/// `λ_k` of `−u″ = λ a u` with Neumann conditions from the lumped
/// second-order discretization on `nodes` points, by Sturm-count bisection
/// on the symmetric tridiagonal pencil.
pub fn fd_neumann_eigenvalue<A: Fn(f64) -> f64>(a: A, k: usize, nodes: usize) -> f64 {
    let m = nodes;
    let h = 1.0 / (m - 1) as f64;
    let mass: Vec<f64> = (0..m)
        .map(|i| {
            let x = i as f64 * h;
            let w = if i == 0 || i == m - 1 { 0.5 * h } else { h };
            w * a(x)
        })
        .collect();
    let diag: Vec<f64> = (0..m).map(|i| if i == 0 || i == m - 1 { 1.0 / h } else { 2.0 / h }).collect();
    let off = -1.0 / h;
    // number of eigenvalues strictly below mu
    let count_below = |mu: f64| -> usize {
        let mut neg = 0;
        let mut d = diag[0] - mu * mass[0];
        if d < 0.0 {
            neg += 1;
        }
        for i in 1..m {
            let prev = if d == 0.0 { 1e-300 } else { d };
            d = diag[i] - mu * mass[i] - off * off / prev;
            if d < 0.0 {
                neg += 1;
            }
        }
        neg
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while count_below(hi) < k {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Prototype nonlinearity `−λs + sᵖ` and its derivative, clipped to 0 below 0.
pub fn proto(lambda: f64, p: f64) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let f = move |s: f64| if s <= 0.0 { 0.0 } else { -lambda * s + s.powf(p) };
    let fp = move |s: f64| if s <= 0.0 { 0.0 } else { -lambda + p * s.powf(p - 1.0) };
    (f, fp)
}
