//! Embedded Runge–Kutta 5(4) (Dormand–Prince) for complex state vectors.

use crate::algebra::C;
use crate::error::{Error, Result};

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// error coefficients b − b*
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integration controls.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step as a fraction of the interval length.
    pub first_step_fraction: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            first_step_fraction: 1.0 / 64.0,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

fn axpy<const N: usize>(y: &[C; N], terms: &[(f64, &[C; N])], h: f64) -> [C; N] {
    let mut out = *y;
    for (w, k) in terms {
        let s = w * h;
        for i in 0..N {
            out[i] += k[i] * s;
        }
    }
    out
}

/// Integrates `dy/ds = f(s, y)` from `s0` to `s1` (real, `s1 > s0`).
pub fn dopri5<const N: usize, F>(
    mut f: F,
    s0: f64,
    s1: f64,
    y0: [C; N],
    opts: &OdeOptions,
) -> Result<([C; N], OdeStats)>
where
    F: FnMut(f64, &[C; N]) -> Result<[C; N]>,
{
    let span = s1 - s0;
    let mut stats = OdeStats::default();
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let mut s = s0;
    let mut y = y0;
    let mut h = span * opts.first_step_fraction;
    let hmin = span * 1e-13;
    let mut k1 = f(s, &y)?;
    let mut last_ok_factor = 1.0;
    loop {
        if stats.accepted + stats.rejected > opts.max_steps {
            return Err(Error::StepUnderflow(format!("too many steps at s = {s}")));
        }
        if s + h > s1 {
            h = s1 - s;
        }
        let k2 = f(s + C2 * h, &axpy(&y, &[(A21, &k1)], h))?;
        let k3 = f(s + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h))?;
        let k4 = f(s + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h))?;
        let k5 = f(
            s + C5 * h,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        )?;
        let k6 = f(
            s + h,
            &axpy(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                h,
            ),
        )?;
        let ynew = axpy(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            h,
        );
        let k7 = f(s + h, &ynew)?;
        let mut err2 = 0.0;
        for i in 0..N {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                * h;
            let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            err2 += (e.norm() / sc).powi(2);
        }
        let err = (err2 / N as f64).sqrt();
        if err <= 1.0 {
            s += h;
            y = ynew;
            k1 = k7;
            stats.accepted += 1;
            if s >= s1 - 1e-15 * span.abs() {
                return Ok((y, stats));
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // no growth right after a rejection
            h *= if last_ok_factor < 1.0 { fac.min(1.0) } else { fac };
            last_ok_factor = 1.0;
        } else {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            last_ok_factor = fac;
            if h < hmin {
                return Err(Error::StepUnderflow(format!("h = {h:e} at s = {s}")));
            }
        }
    }
}
