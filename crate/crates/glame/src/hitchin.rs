//! Closed-form solutions of the elliptic form with `n = 0`.
//!
//! Completely reducible solutions are labelled by `(r, s)` outside `Z^2 / 2`:
//!
//! ```text
//! wp(p_{r,s}) = wp(r + s tau) + wp'(r + s tau) / (2 Z_{r,s}),
//! Z_{r,s}     = zeta(r + s tau) - r eta1 - s eta2.
//! ```
//!
//! The others form four one-parameter families `p_{k,C}`, `C` in `P^1`, whose
//! `lambda(t)` solve Riccati equations. Each `wp(p)` is paired with the zero
//! `a1` of the eigen-solution of the associated `GLE(0, p, A)`: `r + s tau`
//! for `(r, s)`, `omega_k / 2` for `(k, C)`.

use serde::Serialize;

use crate::lattice::{EllipticContext, LatticeError};
use crate::monodromy::ProjectiveC;
use crate::painleve::{a_to_A, ctx_at, diff1, diff2, epvi_rhs, hamiltonian_rhs, EllipticState, PainleveError, DIFF_STEP};
use crate::{Multiplicity, C};

/// Pairs closer than this to `Z^2 / 2` are rejected.
pub const HALF_INTEGER_RADIUS: f64 = 1e-8;

/// `|Z_{r,s}|` below this counts as a pole of Hitchin's formula.
pub const ZRS_POLE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HitchinError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Painleve(#[from] PainleveError),
    #[error("(r, s) = ({r}, {s}) is a half-integer pair")]
    HalfIntegerPair { r: C, s: C },
    #[error("Z_(r,s) vanishes at tau = {tau} (|Z| = {abs:e})")]
    ZrsVanishes { tau: C, abs: f64 },
    #[error("denominator vanishes in the family formula")]
    DenominatorVanishes,
    #[error("family index must be 0..=3, got {0}")]
    InvalidFamily(usize),
}

/// Label of a solution of the `n = 0` elliptic form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum SolutionTag {
    #[serde(rename = "RS")]
    Rs {
        #[serde(with = "crate::monodromy::c_serde")]
        r: C,
        #[serde(with = "crate::monodromy::c_serde")]
        s: C,
    },
    #[serde(rename = "KC")]
    Kc { k: usize, #[serde(rename = "C")] c: ProjectiveC },
}

impl SolutionTag {
    /// Stores the canonical representative of `+-(r, s) + Z^2`.
    pub fn rs(r: C, s: C) -> Result<Self, HitchinError> {
        if half_integer_distance(r, s) < HALF_INTEGER_RADIUS {
            return Err(HitchinError::HalfIntegerPair { r, s });
        }
        let (r, s) = crate::monodromy::canonical_rs(r, s);
        Ok(SolutionTag::Rs { r, s })
    }

    pub fn kc(k: usize, c: ProjectiveC) -> Result<Self, HitchinError> {
        if k > 3 {
            return Err(HitchinError::InvalidFamily(k));
        }
        Ok(SolutionTag::Kc { k, c })
    }

    /// Zero `a1` of the eigen-solution of the associated GLE.
    pub fn zero(&self, ctx: &EllipticContext) -> C {
        match *self {
            SolutionTag::Rs { r, s } => r + s * ctx.tau,
            SolutionTag::Kc { k, .. } => ctx.half_period(k),
        }
    }
}

fn half_integer_distance(r: C, s: C) -> f64 {
    let d = |x: C| (x - (2.0 * x.re).round() / 2.0).norm();
    d(r).max(d(s))
}

#[allow(non_snake_case)]
pub fn Z_rs(ctx: &EllipticContext, r: C, s: C) -> Result<C, HitchinError> {
    Ok(ctx.zeta(r + s * ctx.tau)? - r * ctx.eta[0] - s * ctx.eta[1])
}

/// Hitchin's formula.
pub fn hitchin_wp(ctx: &EllipticContext, r: C, s: C) -> Result<C, HitchinError> {
    if half_integer_distance(r, s) < HALF_INTEGER_RADIUS {
        return Err(HitchinError::HalfIntegerPair { r, s });
    }
    let z = Z_rs(ctx, r, s)?;
    if z.norm() < ZRS_POLE {
        return Err(HitchinError::ZrsVanishes { tau: ctx.tau, abs: z.norm() });
    }
    let w = ctx.wp(r + s * ctx.tau)?;
    Ok(w.wp + w.dwp / (2.0 * z))
}

fn check_den(den: C, scale: f64) -> Result<(), HitchinError> {
    if den.norm() < 1e-12 * (1.0 + scale) {
        Err(HitchinError::DenominatorVanishes)
    } else {
        Ok(())
    }
}

/// `wp(p_{k,C})`.
pub fn riccati_wp(ctx: &EllipticContext, k: usize, c: ProjectiveC) -> Result<C, HitchinError> {
    if k > 3 {
        return Err(HitchinError::InvalidFamily(k));
    }
    let (eta1, eta2, tau) = (ctx.eta[0], ctx.eta[1], ctx.tau);
    if k == 0 {
        return match c {
            ProjectiveC::Infinity(_) => Ok(-eta1),
            ProjectiveC::Finite(c) => {
                let den = c - tau;
                check_den(den, c.norm())?;
                Ok((eta2 - c * eta1) / den)
            }
        };
    }
    let ek = ctx.e_k(k);
    let g = ctx.g2 / 4.0 - 2.0 * ek * ek;
    let (num, den, scale) = match c {
        ProjectiveC::Infinity(_) => (ek * eta1 + g, eta1 + ek, 1.0),
        ProjectiveC::Finite(c) => (ek * (c * eta1 - eta2) + g * (c - tau), c * eta1 - eta2 + ek * (c - tau), c.norm()),
    };
    check_den(den, scale * (eta1.norm() + ek.norm()))?;
    Ok(num / den)
}

/// `wp(p)` for any tag.
pub fn family_wp(ctx: &EllipticContext, tag: &SolutionTag) -> Result<C, HitchinError> {
    match *tag {
        SolutionTag::Rs { r, s } => hitchin_wp(ctx, r, s),
        SolutionTag::Kc { k, c } => riccati_wp(ctx, k, c),
    }
}

/// `mu` of the family at `t(tau)`.
pub fn mu_family(ctx: &EllipticContext, tag: &SolutionTag) -> Result<C, HitchinError> {
    let de = ctx.e[1] - ctx.e[0];
    let w = family_wp(ctx, tag)?;
    let base = match *tag {
        SolutionTag::Kc { k: 0, .. } => return Ok(C::new(0.0, 0.0)),
        SolutionTag::Kc { k, .. } => ctx.e_k(k),
        SolutionTag::Rs { r, s } => ctx.wp_only(r + s * ctx.tau)?,
    };
    let den = w - base;
    check_den(den, w.norm())?;
    Ok(de / (2.0 * den))
}

/// `(p, A)` of the family at `ctx.tau`; `seed` selects the branch of `p`.
pub fn family_state(ctx: &EllipticContext, tag: &SolutionTag, seed: Option<C>) -> Result<EllipticState, HitchinError> {
    let w = family_wp(ctx, tag)?;
    let p = ctx.invert_wp(w, seed)?;
    let a = a_to_A(ctx, p, tag.zero(ctx))?;
    Ok(EllipticState { p, a, tau: ctx.tau })
}

/// `p(tau')` continued from `p(tau) = p0` by seeded inversion.
fn continued_p(ctx: &EllipticContext, tag: &SolutionTag, p0: C, tau: C) -> Result<C, HitchinError> {
    let c = ctx_at(ctx, tau)?;
    let w = family_wp(&c, tag)?;
    Ok(c.invert_wp(w, Some(p0))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyResiduals {
    #[serde(with = "crate::monodromy::c_serde")]
    pub tau: C,
    /// `|p'' - rhs| / (1 + |rhs|)` for the elliptic form.
    pub epvi: f64,
    /// Same for the two Hamilton equations.
    pub dp: f64,
    #[serde(rename = "dA")]
    pub da: f64,
}

/// Checks that the family solves the `n = 0` elliptic form and, with `A` from
/// the eigen-solution zero, the Hamiltonian system. Derivatives in `tau` come
/// from central differences with step `h` and `h/2`, Richardson-extrapolated.
pub fn family_residuals(ctx: &EllipticContext, tag: &SolutionTag, h: Option<f64>) -> Result<FamilyResiduals, HitchinError> {
    let h = C::new(h.unwrap_or(DIFF_STEP), 0.0);
    let tau = ctx.tau;
    let p0 = ctx.invert_wp(family_wp(ctx, tag)?, None)?;
    let p_at = |t: C| -> Result<C, PainleveError> {
        if t == tau {
            return Ok(p0);
        }
        continued_p(ctx, tag, p0, t).map_err(|e| PainleveError::DegeneratePosition(e.to_string()))
    };
    let a_at = |t: C| -> Result<C, PainleveError> {
        let c = ctx_at(ctx, t)?;
        a_to_A(&c, p_at(t)?, tag.zero(&c))
    };
    let n = Multiplicity::ZERO;
    let ddp = diff2(p_at, tau, h)?;
    let rhs = epvi_rhs(ctx, n, p0)?;
    let a0 = a_to_A(ctx, p0, tag.zero(ctx))?;
    let (want_dp, want_da) = hamiltonian_rhs(ctx, n, p0, a0)?;
    let dp = diff1(p_at, tau, h)?;
    let da = diff1(a_at, tau, h)?;
    Ok(FamilyResiduals {
        tau,
        epvi: (ddp - rhs).norm() / (1.0 + rhs.norm()),
        dp: (dp - want_dp).norm() / (1.0 + want_dp.norm()),
        da: (da - want_da).norm() / (1.0 + want_da.norm()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerationReport {
    pub k: usize,
    #[serde(rename = "C")]
    pub c: ProjectiveC,
    pub s_values: Vec<f64>,
    pub errors: Vec<f64>,
    /// `errors[i + 1] / errors[i]`.
    pub ratios: Vec<f64>,
    /// Every ratio is below `1/2`.
    pub converging: bool,
}

/// The `(r, s)` in the `k`-th degeneration row at parameter `s`.
pub fn degeneration_pair(k: usize, c: ProjectiveC, s: f64) -> (C, C) {
    let half = C::new(0.5, 0.0);
    let zero = C::new(0.0, 0.0);
    let s = C::new(s, 0.0);
    match c {
        ProjectiveC::Finite(c) => match k {
            0 => (-c * s, s),
            1 => (half - c * s, s),
            2 => (c * s, half - s),
            _ => (half + c * s, half - s),
        },
        ProjectiveC::Infinity(_) => match k {
            0 => (s, zero),
            1 => (half + s, zero),
            2 => (s, half),
            _ => (half + s, half),
        },
    }
}

/// Distance between `wp(p_{k,C})` and Hitchin's formula along the row of
/// `(r, s)` that degenerates to it, for each `s` (for `C = inf` the values are
/// used as `r`).
pub fn degeneration_check(
    ctx: &EllipticContext,
    k: usize,
    c: ProjectiveC,
    s_values: &[f64],
) -> Result<DegenerationReport, HitchinError> {
    let target = riccati_wp(ctx, k, c)?;
    let mut errors = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let (r, ss) = degeneration_pair(k, c, s);
        errors.push((hitchin_wp(ctx, r, ss)? - target).norm());
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[1] / w[0]).collect();
    let converging = ratios.iter().all(|&q| q < 0.5);
    Ok(DegenerationReport { k, c, s_values: s_values.to_vec(), errors, ratios, converging })
}
