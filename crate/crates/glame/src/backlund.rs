//! Backlund transformations of PVI and the Fuchsian equation on `P^1`.
//!
//! Parameters live on the affine space `2 theta0 + theta1 + theta2 + theta3 + theta4 = 1`.
//! The generators `kappa_0..kappa_4` act on `(theta, lambda, mu)` and leave `t`
//! alone. The Fuchsian equation with parameters `theta` and apparent
//! singularity `lambda` is
//!
//! ```text
//! f'' + p1 f' + p2 f = 0,
//! p1 = (1-theta1)/x + (1-theta2)/(x-1) + (1-theta3)/(x-t) - 1/(x-lambda),
//! p2 = theta0 (theta0+theta4) / (x(x-1)) - t(t-1) K / (x(x-1)(x-t))
//!      + lambda(lambda-1) mu / (x(x-1)(x-lambda)),
//! ```
//!
//! and its normal form `F = f / phi` with
//! `phi = (x-lambda) x^{theta1/2} (x-1)^{theta2/2} (x-t)^{theta3/2}` has
//! monodromy in `SL(2)`. The invariants are `ϰ1 = tr M2 M3`, `ϰ2 = tr M1 M3`,
//! `ϰ3 = tr M1 M2` for loops around `0, 1, t`.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use crate::lattice::{EllipticContext, LatticeError};
use crate::monodromy::{cycle_monodromy, MonodromyError, MonodromyOptions};
use crate::painleve::{sphere_coordinate, to_pvi, PainleveError, PviState};
use crate::transport::{circle_path, default_base_point, plan_path, transport, SecondOrderOde, TransportError};
use crate::{Mat2, Multiplicity, TorusEquation, C};

/// Singular values of the rational coefficients closer than this are poles.
const POLE: f64 = 1e-10;

const LOOP_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BacklundError {
    #[error("kappa_{generator} (position {position} in the word) hits a vanishing denominator")]
    DenominatorVanishes { generator: usize, position: usize },
    #[error("no word of length <= {depth} maps the parameters")]
    WordNotFound { depth: usize },
    #[error("generator index must be 0..=4, got {0}")]
    InvalidGenerator(usize),
    #[error("theta violates 2 theta0 + theta1 + theta2 + theta3 + theta4 = 1 (off by {0:e})")]
    Constraint(f64),
    #[error("theta is not half-integral")]
    NotHalfIntegral,
    #[error("degenerate position: {0}")]
    DegeneratePosition(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Painleve(#[from] PainleveError),
    #[error(transparent)]
    Monodromy(#[from] MonodromyError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaVector(#[serde(with = "theta_serde")] pub [C; 5]);

mod theta_serde {
    use crate::C;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &[C; 5], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|z| [z.re, z.im]))
    }
}

impl ThetaVector {
    pub fn new(theta: [C; 5]) -> Result<Self, BacklundError> {
        let v = ThetaVector(theta);
        let off = v.constraint_defect();
        if off > 1e-12 {
            return Err(BacklundError::Constraint(off));
        }
        Ok(v)
    }

    pub fn from_real(theta: [f64; 5]) -> Result<Self, BacklundError> {
        Self::new(theta.map(|x| C::new(x, 0.0)))
    }

    pub fn constraint_defect(&self) -> f64 {
        let t = self.0;
        (2.0 * t[0] + t[1] + t[2] + t[3] + t[4] - 1.0).norm()
    }

    /// `2 theta` if every entry is a real half-integer.
    fn doubled(&self) -> Option<[i64; 5]> {
        let mut out = [0i64; 5];
        for (o, z) in out.iter_mut().zip(self.0) {
            let d = 2.0 * z.re;
            if z.im.abs() > 1e-12 || (d - d.round()).abs() > 1e-12 {
                return None;
            }
            *o = d.round() as i64;
        }
        Some(out)
    }
}

/// `theta^n = (-(1 + sum n)/2, n1 + 1/2, n2 + 1/2, n3 + 1/2, n0 + 1/2)`.
pub fn theta_of_n(n: Multiplicity) -> ThetaVector {
    let h = |k: usize| n.get(k) as f64 + 0.5;
    ThetaVector([
        -(1.0 + n.total() as f64) / 2.0,
        h(1),
        h(2),
        h(3),
        h(0),
    ]
    .map(|x| C::new(x, 0.0)))
}

fn kappa_theta<T>(j: usize, t: [T; 5]) -> [T; 5]
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Neg<Output = T>,
{
    let mut o = t;
    if j == 0 {
        o[0] = -t[0];
        for i in 1..5 {
            o[i] = t[i] + t[0];
        }
    } else {
        o[0] = t[0] + t[j];
        o[j] = -t[j];
    }
    o
}

/// One generator on `(theta, lambda, mu)`.
pub fn kappa_apply(j: usize, theta: &ThetaVector, state: &PviState) -> Result<(ThetaVector, PviState), BacklundError> {
    if j > 4 {
        return Err(BacklundError::InvalidGenerator(j));
    }
    let th = theta.0;
    let PviState { lambda, mu, t } = *state;
    let den = match j {
        0 => mu,
        1 => lambda,
        2 => lambda - 1.0,
        3 => lambda - t,
        _ => C::new(1.0, 0.0),
    };
    let applies = j == 4 || th[j].norm() > 0.0;
    if applies && den.norm() < POLE {
        return Err(BacklundError::DenominatorVanishes { generator: j, position: 0 });
    }
    let new_state = match j {
        0 => PviState { lambda: lambda + th[0] / mu, mu, t },
        1..=3 if th[j].norm() == 0.0 => *state,
        1..=3 => PviState { lambda, mu: mu - th[j] / den, t },
        _ => *state,
    };
    Ok((ThetaVector(kappa_theta(j, th)), new_state))
}

/// Applies the word left to right.
pub fn apply_word(word: &[usize], theta: &ThetaVector, state: &PviState) -> Result<(ThetaVector, PviState), BacklundError> {
    let (mut th, mut st) = (*theta, *state);
    for (position, &j) in word.iter().enumerate() {
        (th, st) = kappa_apply(j, &th, &st).map_err(|e| match e {
            BacklundError::DenominatorVanishes { generator, .. } => BacklundError::DenominatorVanishes { generator, position },
            other => other,
        })?;
    }
    Ok((th, st))
}

/// Action of a word on `theta` alone.
pub fn apply_word_theta(word: &[usize], theta: &ThetaVector) -> ThetaVector {
    word.iter().fold(*theta, |th, &j| ThetaVector(kappa_theta(j, th.0)))
}

/// Default depth bound of [`find_word`] for the target `theta^n`.
pub fn default_depth(n: Multiplicity) -> usize {
    6 * n.total() as usize + 12
}

/// A shortest word mapping `from` to `to`, by breadth-first search over
/// half-integral parameter vectors.
pub fn find_word(from: &ThetaVector, to: &ThetaVector, depth: usize) -> Result<Vec<usize>, BacklundError> {
    let (a, b) = match (from.doubled(), to.doubled()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(BacklundError::NotHalfIntegral),
    };
    if a == b {
        return Ok(Vec::new());
    }
    // value: (parent, generator, depth)
    let mut seen: HashMap<[i64; 5], ([i64; 5], usize, usize)> = HashMap::new();
    let mut queue = VecDeque::new();
    seen.insert(a, (a, usize::MAX, 0));
    queue.push_back(a);
    while let Some(v) = queue.pop_front() {
        let d = seen[&v].2;
        if d >= depth {
            continue;
        }
        for j in 0..5 {
            let w = kappa_theta(j, v);
            if seen.contains_key(&w) {
                continue;
            }
            seen.insert(w, (v, j, d + 1));
            if w == b {
                let mut word = Vec::with_capacity(d + 1);
                let mut cur = w;
                while cur != a {
                    let (parent, g, _) = seen[&cur];
                    word.push(g);
                    cur = parent;
                }
                word.reverse();
                return Ok(word);
            }
            queue.push_back(w);
        }
    }
    Err(BacklundError::WordNotFound { depth })
}

/// The word from `theta^0` to `theta^n`.
pub fn word_for(n: Multiplicity) -> Result<Vec<usize>, BacklundError> {
    find_word(&theta_of_n(Multiplicity::ZERO), &theta_of_n(n), default_depth(n))
}

/// PVI Hamiltonian `K(lambda, mu, t)`.
pub fn pvi_hamiltonian(theta: &ThetaVector, s: &PviState) -> C {
    let th = theta.0;
    let PviState { lambda: l, mu, t } = *s;
    let q = th[1] * (l - 1.0) * (l - t) + th[2] * l * (l - t) + (th[3] - 1.0) * l * (l - 1.0);
    (l * (l - 1.0) * (l - t) * mu * mu + th[0] * (th[0] + th[4]) * (l - t) - q * mu) / (t * (t - 1.0))
}

/// `(dlambda/dt, dmu/dt) = (dK/dmu, -dK/dlambda)`.
pub fn pvi_hamilton_rhs(theta: &ThetaVector, s: &PviState) -> (C, C) {
    let th = theta.0;
    let PviState { lambda: l, mu, t } = *s;
    let cubic = l * (l - 1.0) * (l - t);
    let dcubic = (l - 1.0) * (l - t) + l * (l - t) + l * (l - 1.0);
    let q = th[1] * (l - 1.0) * (l - t) + th[2] * l * (l - t) + (th[3] - 1.0) * l * (l - 1.0);
    let dq = th[1] * (2.0 * l - 1.0 - t) + th[2] * (2.0 * l - t) + (th[3] - 1.0) * (2.0 * l - 1.0);
    let tt = t * (t - 1.0);
    let dl = (2.0 * cubic * mu - q) / tt;
    let dm = -(dcubic * mu * mu + th[0] * (th[0] + th[4]) - dq * mu) / tt;
    (dl, dm)
}

fn check_state(s: &PviState) -> Result<(), BacklundError> {
    let PviState { lambda, t, .. } = *s;
    for (name, x) in [("0", C::new(0.0, 0.0)), ("1", C::new(1.0, 0.0)), ("t", t)] {
        if (lambda - x).norm() < 1e-8 {
            return Err(BacklundError::DegeneratePosition(format!("lambda coincides with {name}")));
        }
    }
    if t.norm() < 1e-8 || (t - 1.0).norm() < 1e-8 {
        return Err(BacklundError::DegeneratePosition("t is 0 or 1".into()));
    }
    Ok(())
}

fn pole(x: C, at: C) -> Result<C, LatticeError> {
    let d = x - at;
    if d.norm() < POLE {
        return Err(LatticeError::PoleProximity { z: x, radius: POLE });
    }
    Ok(C::new(1.0, 0.0) / d)
}

/// The Fuchsian equation with parameters `theta` at the PVI point `state`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuchsianCoeffs {
    pub theta: ThetaVector,
    pub state: PviState,
    pub k: C,
}

pub fn fuchsian_coeffs(theta: &ThetaVector, state: &PviState) -> Result<FuchsianCoeffs, BacklundError> {
    if theta.constraint_defect() > 1e-12 {
        return Err(BacklundError::Constraint(theta.constraint_defect()));
    }
    check_state(state)?;
    Ok(FuchsianCoeffs { theta: *theta, state: *state, k: pvi_hamiltonian(theta, state) })
}

impl FuchsianCoeffs {
    pub fn p1(&self, x: C) -> Result<C, LatticeError> {
        let th = self.theta.0;
        let PviState { lambda, t, .. } = self.state;
        Ok((1.0 - th[3]) * pole(x, t)? + (1.0 - th[1]) * pole(x, C::new(0.0, 0.0))?
            + (1.0 - th[2]) * pole(x, C::new(1.0, 0.0))?
            - pole(x, lambda)?)
    }

    pub fn p2(&self, x: C) -> Result<C, LatticeError> {
        let th = self.theta.0;
        let PviState { lambda, mu, t } = self.state;
        let i0 = pole(x, C::new(0.0, 0.0))?;
        let i1 = pole(x, C::new(1.0, 0.0))?;
        let it = pole(x, t)?;
        let il = pole(x, lambda)?;
        Ok(th[0] * (th[0] + th[4]) * i0 * i1 - t * (t - 1.0) * self.k * i0 * i1 * it
            + lambda * (lambda - 1.0) * mu * i0 * i1 * il)
    }

    /// `b0 + mu (a0 + mu)` with `a0`, `b0` the regular parts of `p1`, `p2` at
    /// `lambda`; vanishes exactly when `lambda` is apparent. Scaled by the size
    /// of the terms.
    pub fn apparentness_residual(&self) -> f64 {
        let th = self.theta.0;
        let PviState { lambda: l, mu, t } = self.state;
        let a0 = (1.0 - th[3]) / (l - t) + (1.0 - th[1]) / l + (1.0 - th[2]) / (l - 1.0);
        let b0 = th[0] * (th[0] + th[4]) / (l * (l - 1.0)) - t * (t - 1.0) * self.k / (l * (l - 1.0) * (l - t))
            - mu * (2.0 * l - 1.0) / (l * (l - 1.0));
        let r = b0 + mu * (a0 + mu);
        r.norm() / (1.0 + b0.norm() + (mu * a0).norm() + mu.norm_sqr())
    }

    /// Regular singular points in the finite plane.
    pub fn singular_points(&self) -> [C; 4] {
        [C::new(0.0, 0.0), C::new(1.0, 0.0), self.state.t, self.state.lambda]
    }
}

impl SecondOrderOde for FuchsianCoeffs {
    fn coefficients(&self, x: C) -> Result<(C, C), LatticeError> {
        Ok((self.p1(x)?, self.p2(x)?))
    }
}

/// The normal form `F'' + P1 F' + P2 F = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalForm {
    pub fuchsian: FuchsianCoeffs,
}

pub fn normal_form(theta: &ThetaVector, state: &PviState) -> Result<NormalForm, BacklundError> {
    Ok(NormalForm { fuchsian: fuchsian_coeffs(theta, state)? })
}

impl NormalForm {
    /// `phi'/phi` and its derivative.
    fn log_phi(&self, x: C) -> Result<(C, C), LatticeError> {
        let th = self.fuchsian.theta.0;
        let PviState { lambda, t, .. } = self.fuchsian.state;
        let terms = [(lambda, C::new(1.0, 0.0)), (C::new(0.0, 0.0), th[1] / 2.0), (C::new(1.0, 0.0), th[2] / 2.0), (t, th[3] / 2.0)];
        let mut l = C::new(0.0, 0.0);
        let mut dl = C::new(0.0, 0.0);
        for (at, w) in terms {
            let i = pole(x, at)?;
            l += w * i;
            dl -= w * i * i;
        }
        Ok((l, dl))
    }

    #[allow(non_snake_case)]
    pub fn P1(&self, x: C) -> Result<C, LatticeError> {
        let (l, _) = self.log_phi(x)?;
        Ok(self.fuchsian.p1(x)? + 2.0 * l)
    }

    #[allow(non_snake_case)]
    pub fn P2(&self, x: C) -> Result<C, LatticeError> {
        let (l, dl) = self.log_phi(x)?;
        let p1 = self.fuchsian.p1(x)?;
        Ok(self.fuchsian.p2(x)? + l * p1 + dl + l * l)
    }
}

impl SecondOrderOde for NormalForm {
    fn coefficients(&self, x: C) -> Result<(C, C), LatticeError> {
        Ok((self.P1(x)?, self.P2(x)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereMonodromy {
    /// Loops around `0`, `1`, `t`, as transfer matrices on `(F, F')` columns.
    #[serde(skip)]
    pub m: [Mat2; 3],
    #[serde(with = "crate::ansatz::vec_c")]
    pub kappa: Vec<C>,
    #[serde(with = "crate::monodromy::c_serde")]
    pub x0: C,
    pub err: f64,
}

impl SphereMonodromy {
    /// `max_j |det M_j - 1|`.
    pub fn det_defect(&self) -> f64 {
        self.m.iter().map(|m| (m.determinant() - 1.0).norm()).fold(0.0, f64::max)
    }

    /// `max_j |M_j^2 + I|`.
    pub fn square_defect(&self) -> f64 {
        self.m.iter().map(|m| (m * m + Mat2::identity()).norm()).fold(0.0, f64::max)
    }
}

/// Loops from `x0` around `0, 1, t`: a straight spoke (bent only around other
/// singular points, on the side it already passes) to a circle of radius a
/// third of the smallest gap between singular points.
pub fn sphere_loops(state: &PviState, x0: C) -> Result<[Vec<C>; 3], BacklundError> {
    check_state(state)?;
    let pts = [C::new(0.0, 0.0), C::new(1.0, 0.0), state.t, state.lambda];
    let mut gap = f64::INFINITY;
    for i in 0..4 {
        for j in i + 1..4 {
            gap = gap.min((pts[i] - pts[j]).norm());
        }
        gap = gap.min(3.0 * (pts[i] - x0).norm() / 2.0);
    }
    let radius = gap / 3.0;
    let mut out: [Vec<C>; 3] = Default::default();
    for (j, slot) in out.iter_mut().enumerate() {
        let s = pts[j];
        let dir = (x0 - s) / (x0 - s).norm();
        let entry = s + dir * radius;
        let others: Vec<C> = pts.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &p)| p).collect();
        let spoke = plan_path(x0, entry, &others, &[], radius * 0.5)?.vertices;
        let mut path = spoke.clone();
        path.extend(circle_path(s, radius, dir.arg(), LOOP_VERTICES).into_iter().skip(1));
        path.extend(spoke.iter().rev().skip(1));
        *slot = path;
    }
    Ok(out)
}

/// Monodromy of the normal form and its invariants.
pub fn sphere_monodromy(theta: &ThetaVector, state: &PviState, x0: C, tol: f64) -> Result<SphereMonodromy, BacklundError> {
    let nf = normal_form(theta, state)?;
    let loops = sphere_loops(state, x0)?;
    let res: Vec<Result<crate::transport::TransferMatrix, TransportError>> =
        loops.par_iter().map(|path| transport(&nf, path, tol)).collect();
    let mut m = [Mat2::identity(); 3];
    let mut err = 0.0;
    for (j, r) in res.into_iter().enumerate() {
        let t = r?;
        m[j] = t.m;
        err += t.err;
    }
    let kappa = vec![(m[1] * m[2]).trace(), (m[0] * m[2]).trace(), (m[0] * m[1]).trace()];
    Ok(SphereMonodromy { m, kappa, x0, err })
}

/// `x0` as the image of the torus base point.
pub fn base_point_image(ctx: &EllipticContext, q0: Option<C>) -> Result<C, BacklundError> {
    Ok(sphere_coordinate(ctx, q0.unwrap_or_else(|| default_base_point(ctx)))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceDictionary {
    /// `(tr N1, tr N2, tr N1^{-1} N2)` on the torus.
    #[serde(with = "crate::ansatz::vec_c")]
    pub torus: Vec<C>,
    /// `(-ϰ1, -ϰ2, -ϰ3)`.
    #[serde(with = "crate::ansatz::vec_c")]
    pub sphere: Vec<C>,
    pub max_error: f64,
}

/// Compares the torus traces of `GLE(n, p, A)` with the sphere invariants of
/// its image under `x = (wp(z) - e1)/(e2 - e1)` with parameters `theta^n`.
pub fn trace_dictionary(eq: &TorusEquation, opts: &MonodromyOptions) -> Result<TraceDictionary, BacklundError> {
    let TorusEquation::Gle { n, p, a, ctx, .. } = eq else {
        return Err(BacklundError::DegeneratePosition("the trace dictionary needs a GLE".into()));
    };
    let cm = cycle_monodromy(eq, opts)?;
    let (n1, n2) = (cm.n[0], cm.n[1]);
    let n1inv = n1.try_inverse().ok_or_else(|| BacklundError::DegeneratePosition("singular N1".into()))?;
    let torus = vec![n1.trace(), n2.trace(), (n1inv * n2).trace()];
    let state = to_pvi(ctx, *n, *p, *a)?;
    let x0 = base_point_image(ctx, Some(cm.q0))?;
    let sm = sphere_monodromy(&theta_of_n(*n), &state, x0, opts.tol)?;
    let sphere: Vec<C> = sm.kappa.iter().map(|k| -k).collect();
    let max_error = torus.iter().zip(&sphere).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(TraceDictionary { torus, sphere, max_error })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub word: Vec<usize>,
    pub theta_after: ThetaVector,
    #[serde(with = "crate::ansatz::vec_c")]
    pub kappa_before: Vec<C>,
    #[serde(with = "crate::ansatz::vec_c")]
    pub kappa_after: Vec<C>,
    pub max_delta: f64,
}

/// ϰ before and after applying `word`.
pub fn invariance_check(
    word: &[usize],
    theta: &ThetaVector,
    state: &PviState,
    x0: C,
    tol: f64,
) -> Result<InvarianceReport, BacklundError> {
    let before = sphere_monodromy(theta, state, x0, tol)?;
    let (th, st) = apply_word(word, theta, state)?;
    let after = if word.is_empty() { before.clone() } else { sphere_monodromy(&th, &st, x0, tol)? };
    let max_delta = before.kappa.iter().zip(&after.kappa).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(InvarianceReport {
        word: word.to_vec(),
        theta_after: th,
        kappa_before: before.kappa,
        kappa_after: after.kappa,
        max_delta,
    })
}

/// Local exponents of the normal form at a finite singular point, read off the
/// monodromy of a small loop as `e^{2 pi i rho}`. Used as a consistency check.
pub fn local_eigenvalues(nf: &NormalForm, at: C, radius: f64, tol: f64) -> Result<(C, C), BacklundError> {
    let path = circle_path(at, radius, 0.0, LOOP_VERTICES);
    let m = transport(nf, &path, tol)?.m;
    let tr = m.trace();
    let disc = (tr * tr - 4.0 * m.determinant()).sqrt();
    Ok(((tr + disc) / 2.0, (tr - disc) / 2.0))
}

/// `e^{+-pi i theta}`, the eigenvalues the normal form should have at a
/// singular point with exponent `theta`.
pub fn expected_eigenvalues(theta: C) -> (C, C) {
    let i_pi = C::new(0.0, PI);
    ((i_pi * theta).exp(), (-i_pi * theta).exp())
}
