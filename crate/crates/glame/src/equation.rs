//! The two torus equations and their potentials.
//!
//! `H(n, B)`:      `I = sum n_k (n_k+1) wp(z + omega_k/2) + B`
//!
//! `GLE(n, p, A)`: `I = sum n_k (n_k+1) wp(z + omega_k/2) + 3/4 (wp(z+p) + wp(z-p))
//!                      + A (zeta(z+p) - zeta(z-p)) + B`
//!
//! with `B = A^2 - zeta(2p) A - 3/4 wp(2p) - sum n_k (n_k+1) wp(p + omega_k/2)`,
//! the value that makes `+-p` apparent.

use serde::{Deserialize, Serialize};

use crate::lattice::{EllipticContext, LatticeError};
use crate::C;

/// Positions closer than this to `E[2]` are degenerate for the GLE.
pub const DEGENERATE_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EquationError {
    #[error("multiplicity vector {0:?} is not allowed here")]
    InvalidMultiplicity([u32; 4]),
    #[error("p = {0} is too close to a 2-torsion point")]
    DegeneratePosition(C),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// `n = (n_0, n_1, n_2, n_3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Multiplicity(pub [u32; 4]);

impl Multiplicity {
    pub const ZERO: Multiplicity = Multiplicity([0; 4]);

    pub fn new(n: [u32; 4]) -> Self {
        Multiplicity(n)
    }

    pub fn lame(n0: u32) -> Self {
        Multiplicity([n0, 0, 0, 0])
    }

    pub fn get(&self, k: usize) -> u32 {
        self.0[k]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `sum n_k (n_k + 1)`.
    pub fn weight(&self) -> u32 {
        self.0.iter().map(|n| n * (n + 1)).sum()
    }

    pub fn max(&self) -> u32 {
        *self.0.iter().max().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0
    }

    /// `n^+ = (n_0 + 1, n_1, n_2, n_3)`.
    pub fn plus(&self) -> Self {
        self.bumped(0, 1).unwrap()
    }

    /// `n^- = (n_0 - 1, n_1, n_2, n_3)`, if `n_0 >= 1`.
    pub fn minus(&self) -> Option<Self> {
        self.bumped(0, -1)
    }

    /// `n` with `n_k` replaced by `n_k + 2`.
    pub fn plus_two(&self, k: usize) -> Self {
        self.bumped(k, 2).unwrap()
    }

    pub fn bumped(&self, k: usize, delta: i64) -> Option<Self> {
        let v = self.0[k] as i64 + delta;
        if v < 0 {
            return None;
        }
        let mut out = self.0;
        out[k] = v as u32;
        Some(Multiplicity(out))
    }
}

impl std::fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "({a},{b},{c},{d})")
    }
}

/// `y'' = I(z) y` for one of the two families.
#[derive(Debug, Clone, PartialEq)]
pub enum TorusEquation {
    Heun { n: Multiplicity, b: C, ctx: EllipticContext },
    /// `p` is stored reduced and on the canonical branch; `b` is derived.
    Gle { n: Multiplicity, p: C, a: C, b: C, ctx: EllipticContext },
}

impl TorusEquation {
    /// `H(n, B)`. Needs `max n_k >= 1`.
    pub fn heun(n: Multiplicity, b: C, ctx: &EllipticContext) -> Result<Self, EquationError> {
        if n.max() == 0 {
            return Err(EquationError::InvalidMultiplicity(n.0));
        }
        Ok(TorusEquation::Heun { n, b, ctx: ctx.clone() })
    }

    /// `GLE(n, p, A)` with `B` from [`apparent_b`]. Uses `GLE(n,p,A) = GLE(n,-p,-A)`
    /// to put `p` on the canonical branch.
    pub fn gle(n: Multiplicity, p: C, a: C, ctx: &EllipticContext) -> Result<Self, EquationError> {
        if ctx.two_torsion_distance(p) < DEGENERATE_RADIUS {
            return Err(EquationError::DegeneratePosition(p));
        }
        // The equation only depends on p mod the lattice once B is recomputed.
        let (pc, sign) = ctx.canonical_point_with_sign(p);
        let a = a * sign;
        let b = apparent_b(ctx, n, pc, a)?;
        Ok(TorusEquation::Gle { n, p: pc, a, b, ctx: ctx.clone() })
    }

    pub fn ctx(&self) -> &EllipticContext {
        match self {
            TorusEquation::Heun { ctx, .. } | TorusEquation::Gle { ctx, .. } => ctx,
        }
    }

    pub fn n(&self) -> Multiplicity {
        match self {
            TorusEquation::Heun { n, .. } | TorusEquation::Gle { n, .. } => *n,
        }
    }

    pub fn b(&self) -> C {
        match self {
            TorusEquation::Heun { b, .. } | TorusEquation::Gle { b, .. } => *b,
        }
    }

    pub fn is_gle(&self) -> bool {
        matches!(self, TorusEquation::Gle { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TorusEquation::Heun { .. } => "heun",
            TorusEquation::Gle { .. } => "gle",
        }
    }

    pub fn potential(&self, z: C) -> Result<C, LatticeError> {
        match self {
            TorusEquation::Heun { n, b, ctx } => dtv_potential(ctx, *n, *b, z),
            TorusEquation::Gle { n, p, a, b, ctx } => gle_potential(ctx, *n, *p, *a, *b, z),
        }
    }

    /// Singular points inside one period cell, as representatives of `E_tau`.
    /// For the GLE these are the half periods with `n_k > 0` and `+-p`.
    pub fn singular_points(&self) -> Vec<C> {
        let ctx = self.ctx();
        let n = self.n();
        let mut out: Vec<C> = (0..4).filter(|&k| n.get(k) > 0).map(|k| ctx.half_period(k)).collect();
        if let TorusEquation::Gle { p, .. } = self {
            out.push(*p);
            out.push(-*p);
        }
        out
    }

    /// Local exponents at each singular point, in the order of [`Self::singular_points`].
    pub fn local_exponents(&self) -> Vec<(f64, f64)> {
        let n = self.n();
        let mut out: Vec<(f64, f64)> = (0..4)
            .filter(|&k| n.get(k) > 0)
            .map(|k| (-(n.get(k) as f64), n.get(k) as f64 + 1.0))
            .collect();
        if self.is_gle() {
            out.push((-0.5, 1.5));
            out.push((-0.5, 1.5));
        }
        out
    }

    /// Branch cut of the GLE solutions: the segment from `-p` to `p` through 0.
    /// Translates by the lattice are implied.
    pub fn cut(&self) -> Option<(C, C)> {
        match self {
            TorusEquation::Gle { p, .. } => Some((-*p, *p)),
            _ => None,
        }
    }

    /// Same equation at a different `B` (Heun) or `A` (GLE).
    pub fn with_parameter(&self, value: C) -> Result<Self, EquationError> {
        match self {
            TorusEquation::Heun { n, ctx, .. } => TorusEquation::heun(*n, value, ctx),
            TorusEquation::Gle { n, p, ctx, .. } => TorusEquation::gle(*n, *p, value, ctx),
        }
    }

    pub fn record(&self) -> EquationRecord {
        let ctx = self.ctx();
        match self {
            TorusEquation::Heun { n, b, .. } => EquationRecord {
                kind: "heun".into(),
                n: n.0,
                tau: c2a(ctx.tau),
                b: Some(c2a(*b)),
                p: None,
                a: None,
            },
            TorusEquation::Gle { n, p, a, b, .. } => EquationRecord {
                kind: "gle".into(),
                n: n.0,
                tau: c2a(ctx.tau),
                b: Some(c2a(*b)),
                p: Some(c2a(*p)),
                a: Some(c2a(*a)),
            },
        }
    }

    /// Rebuilds an equation from a record, at the given tolerance. For the GLE,
    /// `B` is recomputed and any stored value is ignored.
    pub fn from_record(rec: &EquationRecord, tol: f64) -> Result<Self, EquationError> {
        let ctx = EllipticContext::new(a2c(rec.tau), tol)?;
        let n = Multiplicity(rec.n);
        match rec.kind.as_str() {
            "heun" => TorusEquation::heun(n, rec.b.map(a2c).unwrap_or_default(), &ctx),
            _ => TorusEquation::gle(
                n,
                rec.p.map(a2c).unwrap_or_default(),
                rec.a.map(a2c).unwrap_or_default(),
                &ctx,
            ),
        }
    }
}

/// Flat record used for serialization. Complex numbers are `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationRecord {
    pub kind: String,
    pub n: [u32; 4],
    pub tau: [f64; 2],
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    pub b: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<[f64; 2]>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none", default)]
    pub a: Option<[f64; 2]>,
}

pub fn c2a(z: C) -> [f64; 2] {
    [z.re, z.im]
}

pub fn a2c(a: [f64; 2]) -> C {
    C::new(a[0], a[1])
}

fn half_period_terms(ctx: &EllipticContext, n: Multiplicity, z: C) -> Result<C, LatticeError> {
    let mut acc = C::new(0.0, 0.0);
    for k in 0..4 {
        let nk = n.get(k);
        if nk > 0 {
            acc += ctx.wp_only(z + ctx.half_period(k))? * ((nk * (nk + 1)) as f64);
        }
    }
    Ok(acc)
}

/// `sum n_k (n_k+1) wp(z + omega_k/2) + B`.
pub fn dtv_potential(ctx: &EllipticContext, n: Multiplicity, b: C, z: C) -> Result<C, LatticeError> {
    Ok(half_period_terms(ctx, n, z)? + b)
}

/// Full GLE potential with an explicit `B`.
pub fn gle_potential(
    ctx: &EllipticContext,
    n: Multiplicity,
    p: C,
    a: C,
    b: C,
    z: C,
) -> Result<C, LatticeError> {
    let (wp_plus, zeta_plus) = ctx.wp_zeta(z + p)?;
    let (wp_minus, zeta_minus) = ctx.wp_zeta(z - p)?;
    Ok(half_period_terms(ctx, n, z)? + 0.75 * (wp_plus + wp_minus) + a * (zeta_plus - zeta_minus) + b)
}

/// The accessory value making `+-p` apparent.
pub fn apparent_b(ctx: &EllipticContext, n: Multiplicity, p: C, a: C) -> Result<C, EquationError> {
    if ctx.two_torsion_distance(p) < DEGENERATE_RADIUS {
        return Err(EquationError::DegeneratePosition(p));
    }
    let (wp2, zeta2) = ctx.wp_zeta(2.0 * p)?;
    Ok(a * a - zeta2 * a - 0.75 * wp2 - half_period_terms(ctx, n, p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> EllipticContext {
        EllipticContext::new(C::new(0.15, 1.05), 1e-12).unwrap()
    }

    #[test]
    fn heun_needs_positive_entry() {
        let ctx = ctx();
        assert!(matches!(
            TorusEquation::heun(Multiplicity::ZERO, C::new(1.0, 0.0), &ctx),
            Err(EquationError::InvalidMultiplicity(_))
        ));
        assert!(TorusEquation::heun(Multiplicity::new([0, 0, 1, 0]), C::new(1.0, 0.0), &ctx).is_ok());
    }

    #[test]
    fn gle_sign_symmetry() {
        let ctx = ctx();
        let n = Multiplicity::new([1, 0, 1, 0]);
        let (p, a) = (C::new(0.21, 0.17), C::new(0.4, -0.3));
        let e1 = TorusEquation::gle(n, p, a, &ctx).unwrap();
        let e2 = TorusEquation::gle(n, -p, -a, &ctx).unwrap();
        let e3 = TorusEquation::gle(n, p + ctx.tau - 1.0, a, &ctx).unwrap();
        for z in [C::new(0.31, 0.05), C::new(-0.2, 0.4)] {
            let v1 = e1.potential(z).unwrap();
            let v0 = gle_potential(&ctx, n, p, a, apparent_b(&ctx, n, p, a).unwrap(), z).unwrap();
            assert!((v1 - v0).norm() < 1e-9 * (1.0 + v0.norm()));
            assert!((e2.potential(z).unwrap() - v0).norm() < 1e-9 * (1.0 + v0.norm()));
            assert!((e3.potential(z).unwrap() - v0).norm() < 1e-9 * (1.0 + v0.norm()));
        }
    }

    #[test]
    fn degenerate_positions() {
        let ctx = ctx();
        let n = Multiplicity::lame(1);
        for k in 0..4 {
            let p = ctx.half_period(k) + C::new(1e-7, 0.0);
            assert!(matches!(
                apparent_b(&ctx, n, p, C::new(0.0, 0.0)),
                Err(EquationError::DegeneratePosition(_))
            ));
        }
    }

    #[test]
    fn record_round_trip() {
        let ctx = ctx();
        let eq = TorusEquation::gle(Multiplicity::new([2, 0, 1, 0]), C::new(0.1, 0.3), C::new(1.0, 2.0), &ctx).unwrap();
        let rec = eq.record();
        let back = TorusEquation::from_record(&rec, 1e-12).unwrap();
        assert_eq!(back.record(), rec);
        let h = TorusEquation::heun(Multiplicity::lame(3), C::new(-2.0, 0.5), &ctx).unwrap();
        assert_eq!(TorusEquation::from_record(&h.record(), 1e-12).unwrap(), h);
    }
}
