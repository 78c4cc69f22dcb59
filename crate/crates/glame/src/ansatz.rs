//! Hermite-Halphen eigen-solutions.
//!
//! For the GLE
//!
//! ```text
//! y_a(z) = e^{cz} prod sigma(z - a_i) / ( sqrt(sigma(z-p) sigma(z+p)) prod sigma(z - omega_k/2)^{n_k} )
//! ```
//!
//! with `N = sum n_k + 1` zeros; for `H(n, B)` the square root is absent and
//! there are `sum n_k` zeros. The common eigen-solution of the monodromy is of
//! this form, and `(r, s)` is read off from `sum a_i` and `c`.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::equation::{EquationError, TorusEquation};
use crate::lattice::{EllipticContext, LatticeError};
use crate::monodromy::{common_eigenvector, cycle_monodromy, MonodromyError, MonodromyOptions};
use crate::transport::{
    circle_path, obstacles_near, plan_for, plan_path, transport_vector, TransportError, DEFAULT_CLEARANCE,
};
use crate::{Multiplicity, C};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnsatzError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Monodromy(#[from] MonodromyError),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error("degenerate ansatz position: {0}")]
    DegeneratePosition(String),
    #[error("found {found} zeros (after padding), expected {expected}: {detail}")]
    ZeroCountMismatch { expected: usize, found: usize, detail: String },
}

/// Zeros `a` and exponent `c` of an ansatz solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnsatzData {
    #[serde(with = "vec_c")]
    pub a: Vec<C>,
    #[serde(with = "crate::monodromy::c_serde")]
    pub c: C,
}

pub(crate) mod vec_c {
    use crate::C;
    use serde::ser::{SerializeSeq, Serializer};

    pub fn serialize<S: Serializer>(v: &[C], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for z in v {
            seq.serialize_element(&[z.re, z.im])?;
        }
        seq.end()
    }
}

/// Number of ansatz zeros: `sum n_k + 1` for the GLE, `sum n_k` for Heun.
pub fn zero_count(eq: &TorusEquation) -> usize {
    let t = eq.n().total() as usize;
    if eq.is_gle() {
        t + 1
    } else {
        t
    }
}

fn gle_p(eq: &TorusEquation) -> Option<C> {
    match eq {
        TorusEquation::Gle { p, .. } => Some(*p),
        _ => None,
    }
}

/// `sum a_i - sum_{k=1..3} n_k omega_k / 2`.
pub fn sigma_sum(ctx: &EllipticContext, n: Multiplicity, a: &[C]) -> C {
    let mut s: C = a.iter().sum();
    for k in 1..4 {
        s -= ctx.half_period(k) * n.get(k) as f64;
    }
    s
}

fn same_point(ctx: &EllipticContext, x: C, y: C) -> bool {
    ctx.lattice_distance(x - y) < 1e-8
}

/// The exponent `c` for which `y_a` solves the equation.
///
/// Uses `L(omega_j/2) = 0` for the regular part of the log-derivative at a half
/// period with `n_j >= 1` not among the `a_i`; for `j = 0` this is the usual
/// `sum zeta(a_i) - sum n_k eta_k / 2`. For the GLE with no `a_i` at `+-p` the
/// condition at `+-p` is used instead, which gives
/// `1/2 sum (zeta(a_i+p) + zeta(a_i-p)) - sum n_k eta_k / 2`.
pub fn c_from_a(eq: &TorusEquation, a: &[C]) -> Result<C, AnsatzError> {
    let ctx = eq.ctx();
    let n = eq.n();
    if let Some(p) = gle_p(eq) {
        if a.iter().all(|&ai| !same_point(ctx, ai, p) && !same_point(ctx, ai, -p)) {
            let mut c = C::new(0.0, 0.0);
            for &ai in a {
                c += 0.5 * (ctx.zeta(ai + p)? + ctx.zeta(ai - p)?);
            }
            for k in 1..4 {
                c -= ctx.eta_k(k) * (0.5 * n.get(k) as f64);
            }
            return Ok(c);
        }
    }
    for j in 0..4 {
        if n.get(j) == 0 {
            continue;
        }
        let h = ctx.half_period(j);
        if a.iter().any(|&ai| same_point(ctx, ai, h)) {
            continue;
        }
        let mut c = C::new(0.0, 0.0);
        for &ai in a {
            c += ctx.zeta(ai - h)?;
        }
        for k in 0..4 {
            if k != j && n.get(k) > 0 {
                c += ctx.zeta(h - ctx.half_period(k))? * n.get(k) as f64;
            }
        }
        if let Some(p) = gle_p(eq) {
            c += 0.5 * (ctx.zeta(h - p)? + ctx.zeta(h + p)?);
        }
        return Ok(c);
    }
    Err(AnsatzError::DegeneratePosition(
        "every usable singular point carries a zero of the ansatz".into(),
    ))
}

/// Solves `r + s tau = sigma_sum`, `r eta_1 + s eta_2 = c` (not reduced).
pub fn rs_from_a(eq: &TorusEquation, data: &AnsatzData) -> (C, C) {
    let ctx = eq.ctx();
    let big_s = sigma_sum(ctx, eq.n(), &data.a);
    let (e1, e2) = (ctx.eta[0], ctx.eta[1]);
    let det = e2 - ctx.tau * e1;
    let r = (big_s * e2 - ctx.tau * data.c) / det;
    let s = (data.c - e1 * big_s) / det;
    (r, s)
}

/// `y_a'/y_a` at `z`.
pub fn log_derivative(eq: &TorusEquation, data: &AnsatzData, z: C) -> Result<C, AnsatzError> {
    let ctx = eq.ctx();
    let n = eq.n();
    let mut l = data.c;
    for &ai in &data.a {
        l += ctx.zeta(z - ai)?;
    }
    for k in 0..4 {
        if n.get(k) > 0 {
            l -= ctx.zeta(z - ctx.half_period(k))? * n.get(k) as f64;
        }
    }
    if let Some(p) = gle_p(eq) {
        l -= 0.5 * (ctx.zeta(z - p)? + ctx.zeta(z + p)?);
    }
    Ok(l)
}

fn log_derivative_prime(eq: &TorusEquation, data: &AnsatzData, z: C) -> Result<C, AnsatzError> {
    let ctx = eq.ctx();
    let n = eq.n();
    let mut d = C::new(0.0, 0.0);
    for &ai in &data.a {
        d -= ctx.wp_only(z - ai)?;
    }
    for k in 0..4 {
        if n.get(k) > 0 {
            d += ctx.wp_only(z - ctx.half_period(k))? * n.get(k) as f64;
        }
    }
    if let Some(p) = gle_p(eq) {
        d += 0.5 * (ctx.wp_only(z - p)? + ctx.wp_only(z + p)?);
    }
    Ok(d)
}

/// `y''/y - I` at `z`, with the scale `1 + |I| + |y'/y|^2`.
pub fn ode_defect(eq: &TorusEquation, data: &AnsatzData, z: C) -> Result<(C, f64), AnsatzError> {
    let l = log_derivative(eq, data, z)?;
    let dl = log_derivative_prime(eq, data, z)?;
    let pot = eq.potential(z)?;
    Ok((dl + l * l - pot, 1.0 + pot.norm() + l.norm_sqr()))
}

/// `|y''/y - I| / (1 + |I| + |y'/y|^2)` at `z`, computed from the log-derivative.
pub fn ode_residual(eq: &TorusEquation, data: &AnsatzData, z: C) -> Result<f64, AnsatzError> {
    let (d, scale) = ode_defect(eq, data, z)?;
    Ok(d.norm() / scale)
}

fn w(z: C) -> C {
    // Argument reduced to (-pi, pi].
    C::new(z.re, z.im - 2.0 * PI * ((z.im + PI) / (2.0 * PI)).floor())
}

/// `log(sigma(z-p) sigma(z+p))` continued from the principal value at `from`
/// along the polyline `path` (ending at the point of interest).
fn continued_log_pair(ctx: &EllipticContext, p: C, path: &[C]) -> C {
    let f = |z: C| ctx.log_sigma(z - p) + ctx.log_sigma(z + p);
    let mut prev = f(path[0]);
    let mut acc = w(prev);
    for win in path.windows(2) {
        let (a, b) = (win[0], win[1]);
        let mut t = 0.0;
        while t < 1.0 {
            let z = a + (b - a) * t;
            let d = ctx.lattice_distance(z - p).min(ctx.lattice_distance(z + p));
            let step = (0.2 * d / (b - a).norm().max(1e-300)).clamp(1e-6, 0.05);
            t = (t + step).min(1.0);
            let cur = f(a + (b - a) * t);
            acc += w(cur - prev);
            prev = cur;
        }
    }
    acc
}

/// Value of `y_a(z)`. For the GLE the square root is the principal one at the
/// base point `q0` continued along an admissible path to `z` that does not
/// cross the cuts `[-p, p] + Lambda`.
pub fn eval_ansatz(eq: &TorusEquation, data: &AnsatzData, q0: C, z: C) -> Result<C, AnsatzError> {
    let ctx = eq.ctx();
    let n = eq.n();
    let mut lg = data.c * z;
    for &ai in &data.a {
        lg += ctx.log_sigma(z - ai);
    }
    for k in 0..4 {
        if n.get(k) > 0 {
            lg -= ctx.log_sigma(z - ctx.half_period(k)) * n.get(k) as f64;
        }
    }
    if let Some(p) = gle_p(eq) {
        for s in [p, -p] {
            if ctx.lattice_distance(z - s) < 1e-12 {
                return Err(LatticeError::PoleProximity { z, radius: 1e-12 }.into());
            }
        }
        let clearance = singular_gap(eq, z).min(singular_gap(eq, q0)).min(DEFAULT_CLEARANCE * 2.0) * 0.5;
        let plan = plan_for(eq, q0, z, clearance)?;
        lg -= 0.5 * continued_log_pair(ctx, p, &plan.vertices);
    }
    Ok(lg.exp())
}

/// Distance from `z` to the nearest singular point (all translates).
pub fn singular_gap(eq: &TorusEquation, z: C) -> f64 {
    let ctx = eq.ctx();
    eq.singular_points().iter().map(|&s| ctx.lattice_distance(z - s)).fold(f64::INFINITY, f64::min)
}

/// Even elliptic solution of the symmetric square,
/// `Phi_e = prod sigma(z-a_i) sigma(z+a_i) / (sigma(z-p) sigma(z+p) prod [sigma(z-w_k) sigma(z+w_k)]^{n_k})`
/// with `w_k = omega_k/2`, scaled so that the leading Laurent coefficient at
/// the first half period with `n_k >= 1` (not among the zeros) is `-1/2`.
/// Without such a half period the raw product is returned.
pub fn phi_even(eq: &TorusEquation, data: &AnsatzData, z: C) -> Result<C, AnsatzError> {
    let raw = phi_log(eq, data, z);
    let scale = phi_scale_log(eq, data);
    Ok((raw - scale.unwrap_or_default()).exp() * if scale.is_some() { -0.5 } else { 1.0 })
}

fn phi_log(eq: &TorusEquation, data: &AnsatzData, z: C) -> C {
    let ctx = eq.ctx();
    let n = eq.n();
    let mut lg = C::new(0.0, 0.0);
    for &ai in &data.a {
        lg += ctx.log_sigma(z - ai) + ctx.log_sigma(z + ai);
    }
    for k in 0..4 {
        if n.get(k) > 0 {
            let h = ctx.half_period(k);
            lg -= (ctx.log_sigma(z - h) + ctx.log_sigma(z + h)) * n.get(k) as f64;
        }
    }
    if let Some(p) = gle_p(eq) {
        lg -= ctx.log_sigma(z - p) + ctx.log_sigma(z + p);
    }
    lg
}

/// Log of the leading Laurent coefficient of the raw product.
fn phi_scale_log(eq: &TorusEquation, data: &AnsatzData) -> Option<C> {
    let ctx = eq.ctx();
    let n = eq.n();
    for j in 0..4 {
        let nj = n.get(j);
        if nj == 0 {
            continue;
        }
        let h = ctx.half_period(j);
        if data.a.iter().any(|&ai| same_point(ctx, ai, h)) {
            continue;
        }
        let mut lg = C::new(0.0, 0.0);
        for &ai in &data.a {
            lg += ctx.log_sigma(h - ai) + ctx.log_sigma(h + ai);
        }
        for k in 0..4 {
            if k != j && n.get(k) > 0 {
                let hk = ctx.half_period(k);
                lg -= (ctx.log_sigma(h - hk) + ctx.log_sigma(h + hk)) * n.get(k) as f64;
            }
        }
        if let Some(p) = gle_p(eq) {
            lg -= ctx.log_sigma(h - p) + ctx.log_sigma(h + p);
        }
        if j > 0 {
            // sigma(omega_j + u) ~ -exp(eta_j omega_j / 2) u
            let lead = ctx.eta_k(j) * ctx.omega(j) * 0.5 + C::new(0.0, PI);
            lg -= lead * nj as f64;
        }
        return Some(lg);
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroOptions {
    pub monodromy: MonodromyOptions,
    /// Boxes per side of the period cell.
    pub boxes: usize,
    /// Samples per box edge.
    pub samples: usize,
}

impl Default for ZeroOptions {
    fn default() -> Self {
        ZeroOptions { monodromy: MonodromyOptions::default(), boxes: 16, samples: 64 }
    }
}

impl ZeroOptions {
    pub fn with_tol(tol: f64) -> Self {
        ZeroOptions { monodromy: MonodromyOptions::with_tol(tol), ..Default::default() }
    }
}

/// Result of the zero search with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSearch {
    pub data: AnsatzData,
    /// Zeros of the eigen-solution itself.
    #[serde(with = "vec_c")]
    pub zeros: Vec<C>,
    /// Singular points appended to reach the expected count.
    #[serde(with = "vec_c")]
    pub padding: Vec<C>,
    /// Local exponent of the eigen-solution at each singular point in the cell.
    pub exponents: Vec<([f64; 2], f64)>,
    /// Eigenvalues of the eigen-solution under `z -> z + 1`, `z -> z + tau`.
    pub eigenvalues: [[f64; 2]; 2],
    /// Mismatch of `y'/y` at the base point against the ansatz.
    pub log_derivative_error: f64,
}

struct Grid {
    origin: C,
    m: usize,
    k: usize,
    /// Horizontal lines `origin + j tau / m + [0, 1]`, `m k + 1` samples each.
    rows: Vec<Vec<[C; 2]>>,
    /// Vertical lines `origin + i / m + [0, tau]`.
    cols: Vec<Vec<[C; 2]>>,
}

impl Grid {
    fn row_point(&self, ctx: &EllipticContext, j: usize, idx: usize) -> C {
        self.origin + ctx.tau * (j as f64 / self.m as f64) + (idx as f64 / (self.m * self.k) as f64)
    }

    fn col_point(&self, ctx: &EllipticContext, i: usize, idx: usize) -> C {
        self.origin + (i as f64 / self.m as f64) + ctx.tau * (idx as f64 / (self.m * self.k) as f64)
    }
}

fn line_points(start: C, dir: C, count: usize) -> Vec<C> {
    (0..=count).map(|i| start + dir * (i as f64 / count as f64)).collect()
}

/// Transports along the sample points, subdividing where the argument of `y`
/// moves too fast between samples.
fn transport_samples(eq: &TorusEquation, pts: &[C], v0: [C; 2], tol: f64) -> Result<Vec<[C; 2]>, AnsatzError> {
    let mut out = Vec::with_capacity(pts.len());
    out.push(v0);
    let mut v = v0;
    for win in pts.windows(2) {
        let vals = transport_vector(eq, &[win[0], win[1]], v, tol)?;
        let next = vals[1];
        v = next;
        out.push(next);
    }
    Ok(out)
}

/// Phase change of `y^2` along consecutive samples.
fn phase_y2(vals: &[[C; 2]]) -> Option<f64> {
    let mut acc = 0.0;
    for w in vals.windows(2) {
        let r = w[1][0] / w[0][0];
        let d = r.arg();
        if !d.is_finite() || d.abs() > 1.2 {
            return None;
        }
        acc += 2.0 * d;
    }
    Some(acc)
}

fn refined_phase(eq: &TorusEquation, a: C, b: C, va: [C; 2], vb: [C; 2], tol: f64, depth: u32) -> Option<f64> {
    let direct = phase_y2(&[va, vb]);
    if let Some(ph) = direct {
        if ph.abs() < 0.5 || depth == 0 {
            return Some(ph);
        }
    } else if depth == 0 {
        return None;
    }
    let pts = line_points(a, b - a, 8);
    let vals = transport_samples(eq, &pts, va, tol).ok()?;
    let mut acc = 0.0;
    for i in 0..8 {
        acc += refined_phase(eq, pts[i], pts[i + 1], vals[i], vals[i + 1], tol, depth - 1)?;
    }
    // Consistency with the direct endpoint value, up to sign of y.
    let _ = vb;
    Some(acc)
}

fn segment_phase(eq: &TorusEquation, pts: &[C], vals: &[[C; 2]], tol: f64) -> Option<f64> {
    let mut acc = 0.0;
    for i in 0..pts.len() - 1 {
        acc += refined_phase(eq, pts[i], pts[i + 1], vals[i], vals[i + 1], tol, 3)?;
    }
    Some(acc)
}

fn trapezoid_moment(pts: &[C], vals: &[[C; 2]], center: C, power: u32) -> C {
    let f = |i: usize| (pts[i] - center).powu(power) * vals[i][1] / vals[i][0];
    let mut acc = C::new(0.0, 0.0);
    for i in 0..pts.len() - 1 {
        acc += (f(i) + f(i + 1)) * 0.5 * (pts[i + 1] - pts[i]);
    }
    acc
}

/// Roots of a monic polynomial given by its coefficients `c[0] + c[1] x + ... + x^d`.
fn poly_roots(coef: &[C]) -> Vec<C> {
    let d = coef.len();
    if d == 0 {
        return Vec::new();
    }
    let eval = |x: C| {
        let mut acc = C::new(1.0, 0.0);
        for c in coef.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    let scale = 1.0 + coef.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut roots: Vec<C> = (0..d).map(|k| C::from_polar(0.4 * scale, 0.4 + 2.0 * PI * k as f64 / d as f64)).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..d {
            let mut den = C::new(1.0, 0.0);
            for j in 0..d {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            if den.norm() == 0.0 {
                den = C::new(1e-12, 0.0);
            }
            let step = eval(roots[i]) / den;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * scale {
            break;
        }
    }
    roots
}

/// Power sums `p_1..p_d` to the monic polynomial with those roots (Newton's identities).
fn power_sums_to_poly(ps: &[C]) -> Vec<C> {
    let d = ps.len();
    // e_0 = 1, k e_k = sum_{i=1..k} (-1)^{i-1} e_{k-i} p_i
    let mut e = vec![C::new(1.0, 0.0)];
    for k in 1..=d {
        let mut acc = C::new(0.0, 0.0);
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += e[k - i] * ps[i - 1] * sign;
        }
        e.push(acc / k as f64);
    }
    // x^d - e1 x^{d-1} + e2 x^{d-2} - ...
    (0..d)
        .map(|j| {
            let k = d - j;
            if k % 2 == 0 {
                e[k]
            } else {
                -e[k]
            }
        })
        .collect()
}

fn newton_zero(eq: &TorusEquation, start: C, v_start: [C; 2], guess: C, tol: f64) -> Option<C> {
    let ctx = eq.ctx();
    let (pts, _) = obstacles_near(eq, start, guess);
    let gap = pts.iter().map(|&q| (q - guess).norm()).fold(f64::INFINITY, f64::min);
    let clearance = (0.3 * gap).min(0.5 * pts.iter().map(|&q| (q - start).norm()).fold(f64::INFINITY, f64::min));
    let plan = plan_path(start, guess, &pts, &[], clearance).ok()?;
    let vals = transport_vector(eq, &plan.vertices, v_start, tol).ok()?;
    let mut z = guess;
    let mut v = *vals.last()?;
    for _ in 0..40 {
        if v[1].norm() == 0.0 {
            return None;
        }
        let mut step = v[0] / v[1];
        let cap = 0.02 * (1.0 + ctx.tau.norm());
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        let z_new = z - step;
        if pts.iter().any(|&q| (q - z_new).norm() < 0.2 * gap) {
            return None;
        }
        v = transport_vector(eq, &[z, z_new], v, tol).ok()?[1];
        z = z_new;
        if step.norm() < 1e-13 * (1.0 + z.norm()) {
            break;
        }
    }
    (v[0].norm() < 1e-8 * (v[1].norm() + 1e-300).max(1.0)).then_some(z)
}

/// Grid offsets in box units: a Kronecker sequence, so that some offset keeps
/// every singular point away from the box edges.
fn grid_offsets() -> impl Iterator<Item = (f64, f64)> {
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_3;
    (1..200).map(|k| ((0.37 + k as f64 * A1).fract(), (0.29 + k as f64 * A2).fract()))
}

/// Full attempts (past the geometric check) before giving up.
const MAX_ATTEMPTS: usize = 5;

/// Locates the zeros of the common eigen-solution in one period cell and
/// assembles the ansatz data, padding with singular points where the solution
/// takes its larger local exponent.
pub fn locate_eigen_zeros(eq: &TorusEquation, opts: &ZeroOptions) -> Result<ZeroSearch, AnsatzError> {
    let cm = cycle_monodromy(eq, &opts.monodromy)?;
    let (v, l1, l2) = common_eigenvector(&cm.m[0], &cm.m[1]);
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let v = [v[0] / norm, v[1] / norm];
    let q0 = cm.q0;
    let mut last_err = String::from("no admissible grid offset");
    let mut attempts = 0;
    for (ds, dt) in grid_offsets() {
        if !grid_clears_singularities(eq, opts, q0, ds, dt) {
            continue;
        }
        attempts += 1;
        match zero_search_at(eq, opts, q0, v, ds, dt) {
            Ok(mut res) => {
                res.eigenvalues = [[l1.re, l1.im], [l2.re, l2.im]];
                return Ok(res);
            }
            Err(e @ AnsatzError::ZeroCountMismatch { .. }) => last_err = e.to_string(),
            Err(AnsatzError::Transport(e)) => last_err = e.to_string(),
            Err(e) => return Err(e),
        }
        if attempts == MAX_ATTEMPTS {
            break;
        }
    }
    Err(AnsatzError::ZeroCountMismatch { expected: zero_count(eq), found: 0, detail: last_err })
}

const GRID_MARGIN: f64 = 0.15;

fn grid_clears_singularities(eq: &TorusEquation, opts: &ZeroOptions, q0: C, ds: f64, dt: f64) -> bool {
    let ctx = eq.ctx();
    let m = opts.boxes.max(1) as f64;
    let origin = q0 + ds / m + ctx.tau * (dt / m);
    eq.singular_points().iter().all(|&s| {
        let (a, b) = ctx.coords(s - origin);
        let (fa, fb) = ((a - a.floor()) * m, (b - b.floor()) * m);
        [fa, fb].iter().all(|f| (GRID_MARGIN..1.0 - GRID_MARGIN).contains(&(f - f.floor())))
    })
}

/// Ansatz data of the common eigen-solution.
pub fn eigen_solution_zeros(eq: &TorusEquation, opts: &ZeroOptions) -> Result<AnsatzData, AnsatzError> {
    Ok(locate_eigen_zeros(eq, opts)?.data)
}

fn zero_search_at(
    eq: &TorusEquation,
    opts: &ZeroOptions,
    q0: C,
    v: [C; 2],
    ds: f64,
    dt: f64,
) -> Result<ZeroSearch, AnsatzError> {
    let ctx = eq.ctx();
    let tol = opts.monodromy.tol;
    let m = opts.boxes.max(1);
    let k = opts.samples.max(4);
    let box_w = 1.0 / m as f64;
    let origin = q0 + (ds * box_w) + ctx.tau * (dt * box_w);
    let expected = zero_count(eq);
    let mismatch = |found: usize, detail: String| AnsatzError::ZeroCountMismatch { expected, found, detail };

    // representatives of the singular points in the cell [0,1)^2 relative to origin
    let margin = GRID_MARGIN;
    let mut sing: Vec<(C, usize, usize)> = Vec::new();
    for s in eq.singular_points() {
        let (a, b) = ctx.coords(s - origin);
        let (a, b) = (a - a.floor(), b - b.floor());
        let (fa, fb) = (a * m as f64, b * m as f64);
        if fa - fa.floor() < margin || fa - fa.floor() > 1.0 - margin || fb - fb.floor() < margin || fb - fb.floor() > 1.0 - margin {
            return Err(mismatch(0, format!("singular point {s} too close to the grid")));
        }
        let rep = origin + ctx.lattice_point(a, b);
        sing.push((rep, (fa.floor() as usize).min(m - 1), (fb.floor() as usize).min(m - 1)));
    }
    let (pts_near, _) = obstacles_near(eq, q0, origin);
    let gap0 = pts_near.iter().map(|&q| (q - q0).norm().min((q - origin).norm())).fold(f64::INFINITY, f64::min);
    let plan = plan_path(q0, origin, &pts_near, &[], (0.5 * gap0).min(DEFAULT_CLEARANCE))?;
    let v_origin = *transport_vector(eq, &plan.vertices, v, tol)?.last().unwrap();

    let samples = m * k;
    let col0_pts = line_points(origin, ctx.tau, samples);
    let col0 = transport_samples(eq, &col0_pts, v_origin, tol)?;
    let row0_pts = line_points(origin, C::new(1.0, 0.0), samples);
    let row0 = transport_samples(eq, &row0_pts, v_origin, tol)?;
    let rows: Vec<Vec<[C; 2]>> = (0..=m)
        .into_par_iter()
        .map(|j| {
            if j == 0 {
                return Ok(row0.clone());
            }
            let start = origin + ctx.tau * (j as f64 / m as f64);
            transport_samples(eq, &line_points(start, C::new(1.0, 0.0), samples), col0[j * k], tol)
        })
        .collect::<Result<_, _>>()?;
    let cols: Vec<Vec<[C; 2]>> = (0..=m)
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                return Ok(col0.clone());
            }
            let start = origin + i as f64 / m as f64;
            transport_samples(eq, &line_points(start, ctx.tau, samples), row0[i * k], tol)
        })
        .collect::<Result<_, _>>()?;
    let grid = Grid { origin, m, k, rows, cols };

    // phases of y^2 along every grid segment
    let row_phase: Vec<Vec<Option<f64>>> = (0..=m)
        .into_par_iter()
        .map(|j| {
            (0..m)
                .map(|i| {
                    let pts: Vec<C> = (i * k..=(i + 1) * k).map(|idx| grid.row_point(ctx, j, idx)).collect();
                    segment_phase(eq, &pts, &grid.rows[j][i * k..=(i + 1) * k], tol)
                })
                .collect()
        })
        .collect();
    let col_phase: Vec<Vec<Option<f64>>> = (0..=m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| {
                    let pts: Vec<C> = (j * k..=(j + 1) * k).map(|idx| grid.col_point(ctx, i, idx)).collect();
                    segment_phase(eq, &pts, &grid.cols[i][j * k..=(j + 1) * k], tol)
                })
                .collect()
        })
        .collect();

    // local exponents from small circles
    let mut exps: Vec<f64> = Vec::new();
    for &(s, bi, bj) in &sing {
        let others: Vec<C> = {
            let (p, _) = obstacles_near(eq, s - 0.5, s + 0.5);
            p.into_iter().filter(|q| (q - s).norm() > 1e-12).collect()
        };
        let gap = others.iter().map(|q| (q - s).norm()).fold(f64::INFINITY, f64::min);
        // nearest sample on the bottom line of its box
        let idx = (0..=k)
            .map(|t| bi * k + t)
            .min_by(|&a, &b| (grid.row_point(ctx, bj, a) - s).norm().total_cmp(&(grid.row_point(ctx, bj, b) - s).norm()))
            .unwrap();
        let start = grid.row_point(ctx, bj, idx);
        let dist = (start - s).norm();
        let rho = (0.3 * gap).min(0.5 * dist).min(0.05);
        let dir = (start - s) / dist;
        let ring_start = s + dir * rho;
        let mut avoid = others.clone();
        avoid.push(s);
        let clearance = (0.5 * rho).min(0.45 * gap);
        let plan = plan_path(start, ring_start, &others, &[], clearance)?;
        let v_ring = *transport_vector(eq, &plan.vertices, grid.rows[bj][idx], tol)?.last().unwrap();
        let ring = circle_path(s, rho, dir.arg(), 48);
        let vals = transport_vector(eq, &ring, v_ring, tol)?;
        let ph = phase_y2(&vals).ok_or_else(|| mismatch(0, format!("exponent winding at {s} unresolved")))?;
        exps.push(0.5 * (ph / (2.0 * PI)).round());
    }
    // check exponents against the local data
    for (idx, &(lo, hi)) in eq.local_exponents().iter().enumerate() {
        let e = exps[idx];
        if (e - lo).abs() > 1e-9 && (e - hi).abs() > 1e-9 {
            return Err(mismatch(0, format!("exponent {e} at {} not in {{{lo}, {hi}}}", sing[idx].0)));
        }
    }

    // zero counts per box and initial guesses
    let mut guesses: Vec<(C, usize, usize)> = Vec::new();
    let mut total = 0i64;
    for j in 0..m {
        for i in 0..m {
            let bottom = row_phase[j][i];
            let top = row_phase[j + 1][i];
            let left = col_phase[i][j];
            let right = col_phase[i + 1][j];
            let (Some(b), Some(t), Some(l), Some(r)) = (bottom, top, left, right) else {
                return Err(mismatch(guesses.len(), format!("phase unresolved on box ({i},{j})")));
            };
            let wind = (b + r - t - l) / (2.0 * PI);
            let inside: f64 = sing.iter().zip(&exps).filter(|((_, bi, bj), _)| *bi == i && *bj == j).map(|(_, e)| 2.0 * e).sum();
            let z2 = wind - inside;
            let zc = (z2 / 2.0).round();
            if (z2 / 2.0 - zc).abs() > 0.2 || zc < 0.0 {
                return Err(mismatch(guesses.len(), format!("non-integral zero count {} in box ({i},{j})", z2 / 2.0)));
            }
            let count = zc as usize;
            total += count as i64;
            if count == 0 {
                continue;
            }
            // counterclockwise boundary samples
            let mut pts = Vec::new();
            let mut vals = Vec::new();
            for idx in i * k..=(i + 1) * k {
                pts.push(grid.row_point(ctx, j, idx));
                vals.push(grid.rows[j][idx]);
            }
            for idx in j * k + 1..=(j + 1) * k {
                pts.push(grid.col_point(ctx, i + 1, idx));
                vals.push(grid.cols[i + 1][idx]);
            }
            for idx in (i * k..(i + 1) * k).rev() {
                pts.push(grid.row_point(ctx, j + 1, idx));
                vals.push(grid.rows[j + 1][idx]);
            }
            for idx in (j * k..(j + 1) * k).rev() {
                pts.push(grid.col_point(ctx, i, idx));
                vals.push(grid.cols[i][idx]);
            }
            let center = grid.row_point(ctx, j, i * k + k / 2) + ctx.tau * (0.5 * box_w);
            let two_pi_i = C::new(0.0, 2.0 * PI);
            let mut psums = Vec::new();
            for pw in 1..=count as u32 {
                let mut mom = trapezoid_moment(&pts, &vals, center, pw) / two_pi_i;
                for ((s, bi, bj), e) in sing.iter().zip(&exps) {
                    if *bi == i && *bj == j {
                        mom -= (s - center).powu(pw) * *e;
                    }
                }
                psums.push(mom);
            }
            let poly = power_sums_to_poly(&psums);
            for r in poly_roots(&poly) {
                guesses.push((center + r, i, j));
            }
        }
    }
    let _ = total;

    // Newton refinement from the nearest grid sample
    let mut zeros = Vec::new();
    for &(g, i, j) in &guesses {
        let idx = i * k + k / 2;
        let start = grid.row_point(ctx, j, idx);
        let v0 = grid.rows[j][idx];
        let z = newton_zero(eq, start, v0, g, tol).ok_or_else(|| mismatch(zeros.len(), format!("Newton failed from {g}")))?;
        zeros.push(ctx.reduce(z).0);
    }
    let mut padding = Vec::new();
    for (idx, ((s, _, _), e)) in sing.iter().zip(&exps).enumerate() {
        let (lo, _) = eq.local_exponents()[idx];
        if (e - lo).abs() > 1e-9 {
            // larger exponent: y ~ u^{hi} needs hi - lo extra sigma factors
            let copies = (e - lo).round() as usize;
            for _ in 0..copies {
                padding.push(ctx.reduce(*s).0);
            }
        }
    }
    let mut a = zeros.clone();
    a.extend(padding.iter().copied());
    if a.len() != expected {
        return Err(mismatch(a.len(), format!("zeros {:?}, padding {:?}", zeros, padding)));
    }
    let c = c_from_a(eq, &a)?;
    let data = AnsatzData { a, c };
    let l0 = v[1] / v[0];
    let err = (log_derivative(eq, &data, q0)? - l0).norm() / (1.0 + l0.norm());
    if err > 1e-5 {
        return Err(mismatch(data.a.len(), format!("log-derivative mismatch {err:e} at q0")));
    }
    Ok(ZeroSearch {
        data,
        zeros,
        padding,
        exponents: sing.iter().zip(&exps).map(|((s, _, _), e)| ([s.re, s.im], *e)).collect(),
        eigenvalues: [[0.0; 2]; 2],
        log_derivative_error: err,
    })
}

/// One spectral sample of a Heun family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralSample {
    #[serde(with = "crate::monodromy::c_serde")]
    pub b: C,
    /// `W^2` at the base point.
    #[serde(with = "crate::monodromy::c_serde")]
    pub w2: C,
    /// `W^2` at a second point, for the z-independence check.
    #[serde(with = "crate::monodromy::c_serde")]
    pub w2_check: C,
}

/// `W^2` for `W` the Wronskian of `y_1(z)` and `y_1(-z)`, with `y_1(z) y_1(-z)`
/// scaled to leading Laurent coefficient `-1/2` at the first half period with
/// `n_k >= 1`. With this scaling `W^2 = B^3 - g2 B / 4 - g3 / 4` for `n = (1,0,0,0)`.
pub fn spectral_sample(n: Multiplicity, ctx: &EllipticContext, b: C, opts: &MonodromyOptions) -> Result<SpectralSample, AnsatzError> {
    let eq = TorusEquation::heun(n, b, ctx)?;
    let tol = opts.tol;
    let cm = cycle_monodromy(&eq, opts)?;
    let (v, l1, l2) = common_eigenvector(&cm.m[0], &cm.m[1]);
    let nv = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let v = [v[0] / nv, v[1] / nv];
    let q0 = cm.q0;
    let j = (0..4).find(|&k| n.get(k) > 0).unwrap();
    let h = ctx.half_period(j);
    let mu = match j {
        0 => C::new(1.0, 0.0),
        1 => l1,
        2 => l2,
        _ => l1 * l2,
    };
    // Laurent coefficient of y1(z) y1(-z) at h
    let (others, _) = obstacles_near(&eq, h - 1.0, h + 1.0);
    let gap = others.iter().filter(|q| (*q - h).norm() > 1e-12).map(|q| (q - h).norm()).fold(f64::INFINITY, f64::min);
    let rho = (0.25 * gap).min(0.2);
    let ring_start = h + C::from_polar(rho, (q0 - h).arg());
    let plan = plan_for(&eq, q0, ring_start, (0.5 * rho).min(DEFAULT_CLEARANCE))?;
    let v_ring = *transport_vector(&eq, &plan.vertices, v, tol)?.last().unwrap();
    let verts = 64;
    let ring = circle_path(h, rho, (q0 - h).arg(), verts);
    let vals = transport_vector(&eq, &ring, v_ring, tol)?;
    let order = 2 * n.get(j) as i32;
    let mut lead = C::new(0.0, 0.0);
    for i in 0..verts {
        let opp = (i + verts / 2) % verts;
        let prod = vals[i][0] * vals[opp][0] / mu;
        lead += prod * (ring[i] - h).powi(order);
    }
    lead /= verts as f64;
    if lead.norm() < 1e-300 {
        return Err(AnsatzError::DegeneratePosition("vanishing Laurent coefficient".into()));
    }
    let scale = C::new(-0.5, 0.0) / lead;
    let wronskian = |z: C| -> Result<C, AnsatzError> {
        let plan_a = plan_for(&eq, q0, z, DEFAULT_CLEARANCE.min(0.4 * singular_gap(&eq, z)))?;
        let va = *transport_vector(&eq, &plan_a.vertices, v, tol)?.last().unwrap();
        let plan_b = plan_for(&eq, z, -z, DEFAULT_CLEARANCE.min(0.4 * singular_gap(&eq, z)))?;
        let vb = *transport_vector(&eq, &plan_b.vertices, va, tol)?.last().unwrap();
        // y2(z) = y1(-z), y2'(z) = -y1'(-z)
        Ok(va[0] * (-vb[1]) - va[1] * vb[0])
    };
    let w_a = wronskian(q0)?;
    let q1 = q0 + C::new(0.07, 0.05);
    let w_b = wronskian(q1)?;
    Ok(SpectralSample { b, w2: w_a * w_a * scale * scale, w2_check: w_b * w_b * scale * scale })
}

/// [`spectral_sample`] over a list of `B`, in parallel.
pub fn spectral_samples(
    n: Multiplicity,
    ctx: &EllipticContext,
    bs: &[C],
    opts: &MonodromyOptions,
) -> Result<Vec<SpectralSample>, AnsatzError> {
    if n.max() == 0 {
        return Err(EquationError::InvalidMultiplicity(n.0).into());
    }
    bs.par_iter().map(|&b| spectral_sample(n, ctx, b, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_identities() {
        let roots = [C::new(0.3, 0.1), C::new(-0.2, 0.5), C::new(0.05, -0.4)];
        let ps: Vec<C> = (1..=3).map(|k| roots.iter().map(|r| r.powu(k)).sum()).collect();
        let found = poly_roots(&power_sums_to_poly(&ps));
        for r in roots {
            assert!(found.iter().any(|f| (f - r).norm() < 1e-10), "{r} not in {found:?}");
        }
    }

    #[test]
    fn c_for_lame_one() {
        let ctx = EllipticContext::new(C::new(0.1, 1.1), 1e-12).unwrap();
        let a = C::new(0.3, 0.25);
        let eq = TorusEquation::heun(Multiplicity::lame(1), ctx.wp_only(a).unwrap(), &ctx).unwrap();
        let c = c_from_a(&eq, &[a]).unwrap();
        assert!((c - ctx.zeta(a).unwrap()).norm() < 1e-12);
        let data = AnsatzData { a: vec![a], c };
        for z in [C::new(0.11, 0.4), C::new(-0.3, 0.2)] {
            assert!(ode_residual(&eq, &data, z).unwrap() < 1e-10);
        }
    }
}
