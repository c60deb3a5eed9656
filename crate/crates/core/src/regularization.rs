//! The regularized flux `φₙ`, equal to `φ(s) = s/√(1+s²)` on `[−n, n]` and
//! affine with matching slope outside, together with its primitive,
//! inverse, and the energy kernel `Kₙ(s) = sφₙ(s) − Φₙ(s)`.

use serde::Serialize;

/// `φ(s) = s/√(1+s²)`.
#[inline]
pub fn phi(s: f64) -> f64 {
    s / (1.0 + s * s).sqrt()
}

/// `φ′(s) = (1+s²)^{−3/2}`.
#[inline]
pub fn phi_prime(s: f64) -> f64 {
    let r = 1.0 + s * s;
    1.0 / (r * r.sqrt())
}

/// `Φ(s) = √(1+s²) − 1`, written without cancellation.
#[inline]
pub fn primitive(s: f64) -> f64 {
    let s2 = s * s;
    s2 / (1.0 + (1.0 + s2).sqrt())
}

/// `K(s) = sφ(s) − Φ(s) = 1 − 1/√(1+s²)`, written without cancellation.
#[inline]
pub fn k_exact(s: f64) -> f64 {
    let s2 = s * s;
    let r = (1.0 + s2).sqrt();
    s2 / (r * (1.0 + r))
}

/// `φ⁻¹(v) = v/√(1−v²)` for `|v| < 1`.
#[inline]
pub fn phi_inv(v: f64) -> f64 {
    v / ((1.0 - v) * (1.0 + v)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegularizedOperator {
    n: u32,
    nf: f64,
    phi_n: f64,
    slope: f64,
    prim_n: f64,
    k_n: f64,
}

impl RegularizedOperator {
    pub fn new(n: u32) -> Self {
        assert!(n >= 1, "regularization index must be positive");
        let nf = n as f64;
        RegularizedOperator {
            n,
            nf,
            phi_n: phi(nf),
            slope: phi_prime(nf),
            prim_n: primitive(nf),
            k_n: k_exact(nf),
        }
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    /// `φ(n)`, the flux level at which the affine branch starts.
    #[inline]
    pub fn flux_cap(&self) -> f64 {
        self.phi_n
    }

    #[inline]
    pub fn phi(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.nf {
            phi(s)
        } else {
            (self.phi_n + self.slope * (a - self.nf)).copysign(s)
        }
    }

    #[inline]
    pub fn phi_prime(&self, s: f64) -> f64 {
        if s.abs() <= self.nf {
            phi_prime(s)
        } else {
            self.slope
        }
    }

    /// `Φₙ(s) = ∫₀ˢ φₙ`.
    #[inline]
    pub fn primitive(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.nf {
            primitive(s)
        } else {
            let t = a - self.nf;
            self.prim_n + self.phi_n * t + 0.5 * self.slope * t * t
        }
    }

    #[inline]
    pub fn phi_inv(&self, v: f64) -> f64 {
        let a = v.abs();
        if a <= self.phi_n {
            phi_inv(v)
        } else {
            (self.nf + (a - self.phi_n) / self.slope).copysign(v)
        }
    }

    /// `Kₙ(s) = sφₙ(s) − Φₙ(s)`.
    #[inline]
    pub fn k(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.nf {
            k_exact(s)
        } else {
            self.k_n + 0.5 * self.slope * (a - self.nf) * (a + self.nf)
        }
    }

    /// `Kₙ` as a function of the flux `v = φₙ(s)`.
    #[inline]
    pub fn k_of_flux(&self, v: f64) -> f64 {
        self.k(self.phi_inv(v))
    }
}

/// Dyadic ladder `{2, 4, …, 2^m}`.
pub fn dyadic_ladder(m: u32) -> Vec<u32> {
    (1..=m).map(|i| 1u32 << i).collect()
}
