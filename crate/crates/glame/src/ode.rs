//! Adaptive Dormand-Prince 5(4) for complex states of fixed size.

use crate::C;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError<E> {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("more than {0} steps")]
    TooManySteps(usize),
    #[error("right-hand side failed: {0}")]
    Rhs(E),
}

#[derive(Debug, Clone, Copy)]
pub struct Dp5Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step as a fraction of the interval.
    pub first_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Dp5Options {
    pub fn with_tol(tol: f64) -> Self {
        Dp5Options { rtol: tol, atol: tol, first_step: 0.02, min_step: 1e-13, max_steps: 500_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dp5Report {
    pub steps: usize,
    pub rejected: usize,
    /// Sum of the accepted local error estimates.
    pub err: f64,
}

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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

fn lin<const N: usize>(y: &[C; N], h: f64, terms: &[(f64, &[C; N])]) -> [C; N] {
    let mut out = *y;
    for (w, k) in terms {
        if *w == 0.0 {
            continue;
        }
        let s = h * w;
        for i in 0..N {
            out[i] += k[i] * s;
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<const N: usize, E, F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: [C; N],
    opts: &Dp5Options,
) -> Result<([C; N], Dp5Report), OdeError<E>>
where
    F: FnMut(f64, &[C; N]) -> Result<[C; N], E>,
{
    let span = t1 - t0;
    let mut report = Dp5Report::default();
    if span == 0.0 {
        return Ok((y0, report));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.first_step * span.abs();
    let mut k1 = f(t, &y).map_err(OdeError::Rhs)?;
    loop {
        if report.steps + report.rejected > opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = h * dir;
        let k2 = f(t + C2 * hs, &lin(&y, hs, &[(A21, &k1)])).map_err(OdeError::Rhs)?;
        let k3 = f(t + C3 * hs, &lin(&y, hs, &[(A31, &k1), (A32, &k2)])).map_err(OdeError::Rhs)?;
        let k4 = f(t + C4 * hs, &lin(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)])).map_err(OdeError::Rhs)?;
        let k5 = f(
            t + C5 * hs,
            &lin(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )
        .map_err(OdeError::Rhs)?;
        let k6 = f(
            t + hs,
            &lin(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )
        .map_err(OdeError::Rhs)?;
        let y_new = lin(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t + hs, &y_new).map_err(OdeError::Rhs)?;
        let mut err_abs = 0.0f64;
        let mut mag = 0.0f64;
        for i in 0..N {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * hs;
            err_abs = err_abs.max(e.norm());
            mag = mag.max(y[i].norm()).max(y_new[i].norm());
        }
        let scale = opts.atol + opts.rtol * mag;
        let err = err_abs / scale;
        if !err.is_finite() {
            h *= 0.2;
            report.rejected += 1;
            if h < opts.min_step * span.abs() {
                return Err(OdeError::StepUnderflow { t, h });
            }
            continue;
        }
        if err <= 1.0 {
            t += hs;
            y = y_new;
            k1 = k7;
            report.steps += 1;
            report.err += err_abs;
            if last {
                return Ok((y, report));
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            report.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < opts.min_step * span.abs() {
                return Err(OdeError::StepUnderflow { t, h });
            }
        }
    }
}
