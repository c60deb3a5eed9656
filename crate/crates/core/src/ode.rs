//! Dormand–Prince 5(4) with PI step-size control and the standard
//! 4th-order continuous extension.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at x = {x}")]
    StepSizeUnderflow { x: f64 },
    #[error("step budget exhausted at x = {x}")]
    MaxSteps { x: f64 },
    #[error("non-finite state at x = {x}")]
    NonFinite { x: f64 },
}

/// Verdict returned by the per-step hook.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    /// Discard the step and retry with half the step size.
    Reject,
    /// Keep the step and end the integration.
    Stop,
}

/// One accepted step with its continuous extension.
#[derive(Clone, Debug)]
pub struct DenseStep<const N: usize> {
    pub x0: f64,
    pub h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    #[inline]
    pub fn x1(&self) -> f64 {
        self.x0 + self.h
    }

    #[inline]
    pub fn start(&self) -> [f64; N] {
        self.r[0]
    }

    pub fn end(&self) -> [f64; N] {
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.r[0][i] + self.r[1][i];
        }
        y
    }

    pub fn eval(&self, x: f64) -> [f64; N] {
        let t = (x - self.x0) / self.h;
        let s = 1.0 - t;
        let mut y = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            y[i] = r[0][i] + t * (r[1][i] + s * (r[2][i] + t * (r[3][i] + s * r[4][i])));
        }
        y
    }

    /// A step that stays at `y` over `[x0, x0+h]`.
    pub fn constant(x0: f64, h: f64, y: [f64; N]) -> Self {
        DenseStep { x0, h, r: [y, [0.0; N], [0.0; N], [0.0; N], [0.0; N]] }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

/// Integrator settings. Error weights are `atol[i] + rtol·max(|y0ᵢ|, |y1ᵢ|)`.
#[derive(Clone, Debug)]
pub struct Dopri5<const N: usize> {
    pub rtol: f64,
    pub atol: [f64; N],
    pub h_max: f64,
    pub max_steps: usize,
}

impl<const N: usize> Dopri5<N> {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Dopri5 { rtol, atol: [atol; N], h_max: f64::INFINITY, max_steps: 1_000_000 }
    }

    fn norm(&self, y0: &[f64; N], y1: &[f64; N], e: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = self.atol[i] + self.rtol * y0[i].abs().max(y1[i].abs());
            acc += (e[i] / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step<F>(&self, f: &F, x0: f64, y0: &[f64; N], f0: &[f64; N], span: f64) -> f64
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let d0 = self.norm(y0, y0, y0);
        let d1 = self.norm(y0, y0, f0);
        let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        h = h.min(self.h_max).min(span);
        let mut y1 = [0.0; N];
        for i in 0..N {
            y1[i] = y0[i] + h * f0[i];
        }
        let f1 = f(x0 + h, &y1);
        let mut df = [0.0; N];
        for i in 0..N {
            df[i] = f1[i] - f0[i];
        }
        let d2 = self.norm(y0, y0, &df) / h;
        let h1 = if d1.max(d2) <= 1e-15 {
            (1e-6f64).max(h * 1e-3)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        h1.min(100.0 * h).min(self.h_max).min(span)
    }

    /// Integrates `y′ = f(x, y)` from `x0` to `x_end > x0`.
    ///
    /// `hook` sees each candidate step after it passed the error test.
    pub fn solve<F, H>(
        &self,
        f: F,
        x0: f64,
        y0: [f64; N],
        x_end: f64,
        mut hook: H,
    ) -> Result<Vec<DenseStep<N>>, OdeError>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        H: FnMut(&DenseStep<N>) -> Verdict,
    {
        let span = x_end - x0;
        assert!(span > 0.0, "empty integration interval");
        let mut steps = Vec::new();
        let mut x = x0;
        let mut y = y0;
        let mut k1 = f(x, &y);
        let mut h = self.initial_step(&f, x, &y, &k1, span);
        let mut err_old: f64 = 1e-4;
        let mut rejected_last = false;
        let expo1 = 0.2 - BETA * 0.75;
        let mut count = 0usize;

        loop {
            count += 1;
            if count > self.max_steps {
                return Err(OdeError::MaxSteps { x });
            }
            let last = x + h >= x_end;
            if last {
                h = x_end - x;
            }
            if h <= 1e-14 * x.abs().max(1.0) {
                return Err(OdeError::StepSizeUnderflow { x });
            }

            let mut yt = [0.0; N];
            for i in 0..N {
                yt[i] = y[i] + h * A21 * k1[i];
            }
            let k2 = f(x + C2 * h, &yt);
            for i in 0..N {
                yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            let k3 = f(x + C3 * h, &yt);
            for i in 0..N {
                yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            let k4 = f(x + C4 * h, &yt);
            for i in 0..N {
                yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            let k5 = f(x + C5 * h, &yt);
            for i in 0..N {
                yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let xph = if last { x_end } else { x + h };
            let k6 = f(xph, &yt);
            let mut y1 = [0.0; N];
            for i in 0..N {
                y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            let k7 = f(xph, &y1);
            let mut e = [0.0; N];
            for i in 0..N {
                e[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            if y1.iter().any(|v| !v.is_finite()) || e.iter().any(|v| !v.is_finite()) {
                // treat as a failed step; shrink hard
                h *= 0.1;
                rejected_last = true;
                continue;
            }
            let err = self.norm(&y, &y1, &e);
            let fac11 = err.powf(expo1);

            if err <= 1.0 {
                let mut r = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y1[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    r[0][i] = y[i];
                    r[1][i] = dy;
                    r[2][i] = bspl;
                    r[3][i] = dy - h * k7[i] - bspl;
                    r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                let step = DenseStep { x0: x, h, r };
                match hook(&step) {
                    Verdict::Reject => {
                        h *= 0.5;
                        rejected_last = true;
                        continue;
                    }
                    verdict => {
                        steps.push(step);
                        x = xph;
                        y = y1;
                        k1 = k7;
                        if last || verdict == Verdict::Stop {
                            return Ok(steps);
                        }
                    }
                }
                let mut fac = fac11 / err_old.powf(BETA);
                fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut hnew = h / fac;
                if rejected_last {
                    hnew = hnew.min(h);
                }
                err_old = err.max(1e-4);
                rejected_last = false;
                h = hnew.min(self.h_max);
            } else {
                h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
                rejected_last = true;
            }
        }
    }
}

/// Index of the step whose interval contains `x`, for sorted steps.
pub fn locate<const N: usize>(steps: &[DenseStep<N>], x: f64) -> usize {
    let i = steps.partition_point(|s| s.x1() < x);
    i.min(steps.len().saturating_sub(1))
}
