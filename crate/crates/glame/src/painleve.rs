//! The elliptic form of Painleve VI and its Hamiltonian system.
//!
//! ```text
//! p'' = -1/(4 pi^2) sum alpha_k wp'(p + omega_k/2),   alpha_k = (2 n_k + 1)^2 / 8
//! ```
//!
//! is equivalent to the Hamiltonian system for `(p, A)` that governs the
//! isomonodromic deformation of `GLE(n, p, A, tau)`. The PVI coordinates are
//! `t = (e3 - e1)/(e2 - e1)`, `lambda = (wp(p) - e1)/(e2 - e1)`, with `mu`
//! affine in `A`.

use serde::Serialize;
use std::f64::consts::PI;

use crate::equation::{EquationError, DEGENERATE_RADIUS};
use crate::lattice::{EllipticContext, LatticeError};
use crate::monodromy::{cycle_monodromy, MonodromyError, MonodromyOptions};
use crate::ode::{integrate, Dp5Options, OdeError};
use crate::{Multiplicity, TorusEquation, C};

/// Flows stop when `p` comes this close to a 2-torsion point.
pub const DEGENERACY_GUARD: f64 = 1e-3;

/// Default `tau` step for finite differences.
pub const DIFF_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PainleveError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error("degenerate position: {0}")]
    DegeneratePosition(String),
    #[error("p = {p} reached the 2-torsion guard at tau = {tau}")]
    DegeneracyHit { tau: C, p: C },
    #[error("{0} is not in the upper half plane")]
    LeftUpperHalfPlane(C),
    #[error("flow integration failed: {0}")]
    Integration(String),
    #[error(transparent)]
    Monodromy(#[from] MonodromyError),
}

/// A point `(p, A)` of the Hamiltonian system at time `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticState {
    #[serde(with = "crate::monodromy::c_serde")]
    pub p: C,
    #[serde(rename = "A", with = "crate::monodromy::c_serde")]
    pub a: C,
    #[serde(with = "crate::monodromy::c_serde")]
    pub tau: C,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PviState {
    #[serde(with = "crate::monodromy::c_serde")]
    pub lambda: C,
    #[serde(with = "crate::monodromy::c_serde")]
    pub mu: C,
    #[serde(with = "crate::monodromy::c_serde")]
    pub t: C,
}

/// `alpha_k = (2 n_k + 1)^2 / 8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaVector(pub [f64; 4]);

impl AlphaVector {
    pub fn from_n(n: Multiplicity) -> Self {
        let mut a = [0.0; 4];
        for (k, v) in a.iter_mut().enumerate() {
            let m = 2.0 * n.get(k) as f64 + 1.0;
            *v = m * m / 8.0;
        }
        AlphaVector(a)
    }

    /// The PVI parameters `(alpha, beta, gamma, delta)`.
    pub fn pvi_parameters(&self) -> [f64; 4] {
        let a = self.0;
        [a[0], -a[1], a[2], 0.5 - a[3]]
    }
}

pub(crate) fn ctx_at(ctx: &EllipticContext, tau: C) -> Result<EllipticContext, PainleveError> {
    if tau.im <= 0.0 {
        return Err(PainleveError::LeftUpperHalfPlane(tau));
    }
    Ok(EllipticContext::new(tau, ctx.target_tol)?)
}

/// Right-hand side of the elliptic form.
pub fn epvi_rhs(ctx: &EllipticContext, n: Multiplicity, p: C) -> Result<C, PainleveError> {
    let alpha = AlphaVector::from_n(n);
    let mut acc = C::new(0.0, 0.0);
    for k in 0..4 {
        acc += ctx.wp(p + ctx.half_period(k))?.dwp * alpha.0[k];
    }
    Ok(-acc / (4.0 * PI * PI))
}

/// `(dp/dtau, dA/dtau)`.
pub fn hamiltonian_rhs(ctx: &EllipticContext, n: Multiplicity, p: C, a: C) -> Result<(C, C), PainleveError> {
    if ctx.two_torsion_distance(p) < DEGENERATE_RADIUS {
        return Err(PainleveError::DegeneratePosition(format!("p = {p} is 2-torsion")));
    }
    let w2 = ctx.wp(2.0 * p)?;
    let z2 = ctx.zeta(2.0 * p)?;
    let eta1 = ctx.eta[0];
    let i4pi = C::new(0.0, 1.0 / (4.0 * PI));
    let dp = -i4pi * (2.0 * a - z2 + 2.0 * p * eta1);
    let mut tail = C::new(0.0, 0.0);
    for k in 0..4 {
        let nk = n.get(k) as f64;
        if nk > 0.0 {
            tail += ctx.wp(p + ctx.half_period(k))?.dwp * (nk * (nk + 1.0));
        }
    }
    let da = i4pi * ((2.0 * w2.wp + 2.0 * eta1) * a - 1.5 * w2.dwp - tail);
    Ok((dp, da))
}

/// The `A` for which `dp/dtau = 0`.
pub fn stationary_a(ctx: &EllipticContext, p: C) -> Result<C, PainleveError> {
    Ok(0.5 * (ctx.zeta(2.0 * p)? - 2.0 * p * ctx.eta[0]))
}

/// `A = (zeta(a1 + p) - zeta(a1 - p) - zeta(2p)) / 2`, the accessory parameter
/// of `GLE(0, p, A)` whose eigen-solution vanishes at `a1`.
#[allow(non_snake_case)]
pub fn a_to_A(ctx: &EllipticContext, p: C, a1: C) -> Result<C, PainleveError> {
    if ctx.two_torsion_distance(p) < DEGENERATE_RADIUS {
        return Err(PainleveError::DegeneratePosition(format!("p = {p} is 2-torsion")));
    }
    if ctx.lattice_distance(a1 - p) < DEGENERATE_RADIUS || ctx.lattice_distance(a1 + p) < DEGENERATE_RADIUS {
        return Err(PainleveError::DegeneratePosition(format!("a1 = {a1} meets +-p")));
    }
    Ok(0.5 * (ctx.zeta(a1 + p)? - ctx.zeta(a1 - p)? - ctx.zeta(2.0 * p)?))
}

/// `t(tau)`.
pub fn pvi_t(ctx: &EllipticContext) -> C {
    (ctx.e[2] - ctx.e[0]) / (ctx.e[1] - ctx.e[0])
}

/// `(wp(z) - e1) / (e2 - e1)`.
pub fn sphere_coordinate(ctx: &EllipticContext, z: C) -> Result<C, PainleveError> {
    Ok((ctx.wp_only(z)? - ctx.e[0]) / (ctx.e[1] - ctx.e[0]))
}

/// `4 x (x - 1)(x - t)` and its derivative.
pub fn frak_p(x: C, t: C) -> (C, C) {
    let v = 4.0 * x * (x - 1.0) * (x - t);
    let d = 4.0 * ((x - 1.0) * (x - t) + x * (x - t) + x * (x - 1.0));
    (v, d)
}

fn mu_parts(ctx: &EllipticContext, n: Multiplicity, p: C) -> Result<(C, C, C), PainleveError> {
    let t = pvi_t(ctx);
    let w = ctx.wp(p)?;
    let lambda = (w.wp - ctx.e[0]) / (ctx.e[1] - ctx.e[0]);
    let near = |x: C| (lambda - x).norm() < DEGENERATE_RADIUS;
    if near(C::new(0.0, 0.0)) || near(C::new(1.0, 0.0)) || near(t) || w.dwp.norm() < DEGENERATE_RADIUS {
        return Err(PainleveError::DegeneratePosition(format!("lambda = {lambda} is singular")));
    }
    let (fp, dfp) = frak_p(lambda, t);
    let de = ctx.e[1] - ctx.e[0];
    let offset = dfp / (8.0 * fp)
        + n.get(1) as f64 / (2.0 * lambda)
        + n.get(2) as f64 / (2.0 * (lambda - 1.0))
        + n.get(3) as f64 / (2.0 * (lambda - t));
    let slope = w.dwp / (de * de * fp);
    Ok((lambda, offset, slope))
}

/// `mu` as an affine function of `A`.
#[allow(non_snake_case)]
pub fn mu_from_A(ctx: &EllipticContext, n: Multiplicity, p: C, a: C) -> Result<C, PainleveError> {
    let (_, offset, slope) = mu_parts(ctx, n, p)?;
    Ok(offset + slope * a)
}

/// Inverse of [`mu_from_A`].
#[allow(non_snake_case)]
pub fn A_from_mu(ctx: &EllipticContext, n: Multiplicity, p: C, mu: C) -> Result<C, PainleveError> {
    let (_, offset, slope) = mu_parts(ctx, n, p)?;
    Ok((mu - offset) / slope)
}

pub fn to_pvi(ctx: &EllipticContext, n: Multiplicity, p: C, a: C) -> Result<PviState, PainleveError> {
    let (lambda, offset, slope) = mu_parts(ctx, n, p)?;
    Ok(PviState { lambda, mu: offset + slope * a, t: pvi_t(ctx) })
}

/// Back to `(p, A)`. `seed` picks the branch of `p`.
pub fn from_pvi(
    ctx: &EllipticContext,
    n: Multiplicity,
    state: &PviState,
    seed: Option<C>,
) -> Result<(C, C), PainleveError> {
    let w = ctx.e[0] + state.lambda * (ctx.e[1] - ctx.e[0]);
    let p = ctx.invert_wp(w, seed)?;
    Ok((p, A_from_mu(ctx, n, p, state.mu)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub tol: f64,
    pub guard: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { tol: 1e-11, guard: DEGENERACY_GUARD }
    }
}

/// Integrates the Hamiltonian system along the straight segment from
/// `state0.tau` to `tau1`, returning `steps + 1` equally spaced states.
pub fn flow(
    ctx: &EllipticContext,
    state0: EllipticState,
    n: Multiplicity,
    tau1: C,
    steps: usize,
    opts: &FlowOptions,
) -> Result<Vec<EllipticState>, PainleveError> {
    let tau0 = state0.tau;
    if tau1.im <= 0.0 {
        return Err(PainleveError::LeftUpperHalfPlane(tau1));
    }
    let dtau = tau1 - tau0;
    let mut out = vec![state0];
    if dtau.norm() == 0.0 {
        return Ok(out);
    }
    let steps = steps.max(1);
    let guard = opts.guard;
    let rhs = |u: f64, y: &[C; 2]| -> Result<[C; 2], PainleveError> {
        let tau = tau0 + dtau * u;
        let c = ctx_at(ctx, tau)?;
        if c.two_torsion_distance(y[0]) < guard {
            return Err(PainleveError::DegeneracyHit { tau, p: y[0] });
        }
        let (dp, da) = hamiltonian_rhs(&c, n, y[0], y[1])?;
        Ok([dp * dtau, da * dtau])
    };
    let dp5 = Dp5Options { first_step: 0.01, ..Dp5Options::with_tol(opts.tol) };
    let mut y = [state0.p, state0.a];
    for j in 0..steps {
        let (u0, u1) = (j as f64 / steps as f64, (j + 1) as f64 / steps as f64);
        let (y1, _) = integrate(rhs, u0, u1, y, &dp5).map_err(|e| match e {
            OdeError::Rhs(e) => e,
            other => PainleveError::Integration(other.to_string()),
        })?;
        y = y1;
        out.push(EllipticState { p: y[0], a: y[1], tau: tau0 + dtau * u1 });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsomonodromyReport {
    pub trajectory: Vec<EllipticState>,
    /// `(tr N1, tr N2)` of `GLE(n, p(tau), A(tau), tau)` at every state.
    pub traces: Vec<[[f64; 2]; 2]>,
    /// `max |tr N_j(tau) - tr N_j(tau0)|`.
    pub drift: f64,
}

/// Flows from `state0` to `tau1` and transports the monodromy at each of the
/// `steps + 1` states.
pub fn isomonodromy_check(
    ctx: &EllipticContext,
    state0: EllipticState,
    n: Multiplicity,
    tau1: C,
    steps: usize,
    opts: &FlowOptions,
    mono: &MonodromyOptions,
) -> Result<IsomonodromyReport, PainleveError> {
    let trajectory = flow(ctx, state0, n, tau1, steps, opts)?;
    let mut traces = Vec::with_capacity(trajectory.len());
    let mut first: Option<(C, C)> = None;
    let mut drift = 0.0f64;
    for s in &trajectory {
        let c = ctx_at(ctx, s.tau)?;
        let eq = TorusEquation::gle(n, s.p, s.a, &c)?;
        let mono = MonodromyOptions { q0: None, ..*mono };
        let t = cycle_monodromy(&eq, &mono)?.traces();
        let t0 = *first.get_or_insert(t);
        drift = drift.max((t.0 - t0.0).norm()).max((t.1 - t0.1).norm());
        traces.push([[t.0.re, t.0.im], [t.1.re, t.1.im]]);
    }
    Ok(IsomonodromyReport { trajectory, traces, drift })
}

/// Central first derivative at `x` with step `h` and one Richardson step.
pub fn diff1<F: Fn(C) -> Result<C, PainleveError>>(f: F, x: C, h: C) -> Result<C, PainleveError> {
    let d = |h: C| -> Result<C, PainleveError> { Ok((f(x + h)? - f(x - h)?) / (2.0 * h)) };
    let (a, b) = (d(h)?, d(h * 0.5)?);
    Ok((4.0 * b - a) / 3.0)
}

/// Central second derivative, Richardson-extrapolated from `h` and `h/2`.
pub fn diff2<F: Fn(C) -> Result<C, PainleveError>>(f: F, x: C, h: C) -> Result<C, PainleveError> {
    let f0 = f(x)?;
    let d = |h: C| -> Result<C, PainleveError> { Ok((f(x + h)? - 2.0 * f0 + f(x - h)?) / (h * h)) };
    let (a, b) = (d(h)?, d(h * 0.5)?);
    Ok((4.0 * b - a) / 3.0)
}

/// Residuals of both Hamilton equations along a computed trajectory, by
/// differencing the flow itself around each interior state.
pub fn hamiltonian_residual(
    ctx: &EllipticContext,
    n: Multiplicity,
    state: EllipticState,
    opts: &FlowOptions,
) -> Result<f64, PainleveError> {
    let h = C::new(DIFF_STEP, 0.0);
    let at = |dt: C| -> Result<[C; 2], PainleveError> {
        let traj = flow(ctx, state, n, state.tau + dt, 1, opts)?;
        let s = traj.last().unwrap();
        Ok([s.p, s.a])
    };
    let mut res = 0.0f64;
    let c = ctx_at(ctx, state.tau)?;
    let (dp, da) = hamiltonian_rhs(&c, n, state.p, state.a)?;
    for (i, want) in [dp, da].into_iter().enumerate() {
        let got = diff1(|x| Ok(at(x - state.tau)?[i]), state.tau, h)?;
        res = res.max((got - want).norm() / (1.0 + want.norm()));
    }
    Ok(res)
}

/// `dlambda/dt` of the four Riccati equations.
pub fn riccati_rhs(k: usize, lambda: C, t: C) -> C {
    let den = 2.0 * t * (t - 1.0);
    let num = match k {
        0 => -(lambda * lambda - 2.0 * t * lambda + t),
        1 => lambda * lambda - 2.0 * lambda + t,
        2 => lambda * lambda - t,
        _ => lambda * lambda + 2.0 * (t - 1.0) * lambda - t,
    };
    num / den
}

/// `mu` on the `k`-th Riccati locus.
pub fn riccati_mu(k: usize, lambda: C, t: C) -> C {
    match k {
        0 => C::new(0.0, 0.0),
        1 => 0.5 / lambda,
        2 => 0.5 / (lambda - 1.0),
        _ => 0.5 / (lambda - t),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiReport {
    pub k: usize,
    pub c: crate::monodromy::ProjectiveC,
    #[serde(with = "crate::ansatz::vec_c")]
    pub taus: Vec<C>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Residual of the `k`-th Riccati equation for `lambda(t)` from
/// [`crate::hitchin::riccati_wp`], at each `tau`.
pub fn riccati_residual(
    ctx: &EllipticContext,
    k: usize,
    c: crate::monodromy::ProjectiveC,
    taus: &[C],
) -> Result<RiccatiReport, PainleveError> {
    let mut residuals = Vec::with_capacity(taus.len());
    let lambda_at = |tau: C| -> Result<C, PainleveError> {
        let cx = ctx_at(ctx, tau)?;
        let w = crate::hitchin::riccati_wp(&cx, k, c).map_err(|e| PainleveError::DegeneratePosition(e.to_string()))?;
        Ok((w - cx.e[0]) / (cx.e[1] - cx.e[0]))
    };
    let t_at = |tau: C| -> Result<C, PainleveError> { Ok(pvi_t(&ctx_at(ctx, tau)?)) };
    let h = C::new(DIFF_STEP, 0.0);
    for &tau in taus {
        let lambda = lambda_at(tau)?;
        let t = t_at(tau)?;
        let dl = diff1(lambda_at, tau, h)?;
        let dt = diff1(t_at, tau, h)?;
        let want = riccati_rhs(k, lambda, t);
        residuals.push((dl / dt - want).norm() / (1.0 + want.norm()));
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(RiccatiReport { k, c, taus: taus.to_vec(), residuals, max_residual })
}

/// Launch state near a collision of `p` with the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedState {
    #[serde(with = "crate::monodromy::c_serde")]
    pub c0: C,
    #[serde(with = "crate::monodromy::c_serde")]
    pub h: C,
    pub state: EllipticState,
}

/// `h` from `B0 = 2 pi i c0^2 (4 pi i h - eta1) - sum n_k (n_k + 1) e_k`.
pub fn seed_h(ctx0: &EllipticContext, n: Multiplicity, b0: C, c0_sq: C) -> C {
    let mut shift = C::new(0.0, 0.0);
    for k in 1..4 {
        let nk = n.get(k) as f64;
        shift += ctx0.e_k(k) * (nk * (nk + 1.0));
    }
    let two_pi_i = C::new(0.0, 2.0 * PI);
    let four_pi_i = C::new(0.0, 4.0 * PI);
    ((b0 + shift) / (two_pi_i * c0_sq) + ctx0.eta[0]) / four_pi_i
}

/// Seeds `p = c0 (tau - tau0)^{1/2} (1 + h (tau - tau0))` at `tau0 + delta * ray`
/// with `c0^2 = sign * i (2 n0 + 1) / (2 pi)`, and takes `A` from the first
/// Hamilton equation.
pub fn seed_degeneration(
    ctx0: &EllipticContext,
    n: Multiplicity,
    b0: C,
    sign: f64,
    delta: f64,
    ray: C,
) -> Result<SeedState, PainleveError> {
    let c0_sq = C::new(0.0, sign.signum() * (2.0 * n.get(0) as f64 + 1.0) / (2.0 * PI));
    let c0 = c0_sq.sqrt();
    let h = seed_h(ctx0, n, b0, c0_sq);
    let u = ray / ray.norm() * delta;
    let tau = ctx0.tau + u;
    let cx = ctx_at(ctx0, tau)?;
    let su = u.sqrt();
    let p = c0 * su * (1.0 + h * u);
    let dp = c0 * (0.5 / su + 1.5 * h * su);
    let a = 0.5 * (C::new(0.0, 4.0 * PI) * dp + cx.zeta(2.0 * p)? - 2.0 * p * cx.eta[0]);
    Ok(SeedState { c0, h, state: EllipticState { p, a, tau } })
}
