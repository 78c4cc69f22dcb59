//! The function `z_{n,p}` on the ansatz curve and the addition map.
//!
//! ```text
//! z_{n,p}(a) = zeta(sum a_i - sum_{k=1..3} n_k omega_k / 2)
//!              - 1/2 sum (zeta(a_i + p) + zeta(a_i - p)) + sum_{k=1..3} n_k eta_k / 2
//! ```
//!
//! is periodic in each `a_i` and odd under `a -> -a`. The addition map
//! `sigma_{n,p}(a) = sum a_i - sum n_k omega_k / 2` has degree
//! `sum n_k (n_k + 1) + 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::ansatz::{ode_defect, ode_residual, sigma_sum, AnsatzData, AnsatzError};
use crate::lattice::{EllipticContext, LatticeError};
use crate::monodromy::{local_minima, monodromy_data, secant, MonodromyData, MonodromyError, MonodromyOptions};
use crate::{Multiplicity, TorusEquation, C};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeneratorError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Monodromy(#[from] MonodromyError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error("expected {expected} points of the ansatz, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("the target {0} is a 2-torsion point")]
    TorsionTarget(C),
}

/// `z_{n,p}(a_1, ..., a_N)`.
pub fn z_np(ctx: &EllipticContext, n: Multiplicity, p: C, a: &[C]) -> Result<C, GeneratorError> {
    let mut z = ctx.zeta(sigma_sum(ctx, n, a))?;
    for &ai in a {
        z -= 0.5 * (ctx.zeta(ai + p)? + ctx.zeta(ai - p)?);
    }
    for k in 1..4 {
        z += ctx.eta_k(k) * (0.5 * n.get(k) as f64);
    }
    Ok(z)
}

/// `sigma_{n,p}(a)` reduced to the fundamental cell.
pub fn addition_map(ctx: &EllipticContext, n: Multiplicity, a: &[C]) -> C {
    ctx.reduce(sigma_sum(ctx, n, a)).0
}

pub fn deg_sigma(n: Multiplicity) -> u32 {
    n.0.iter().map(|&k| k * (k + 1)).sum::<u32>() + 1
}

/// `A` and `c` for which the ansatz with zeros `a` can solve `GLE(n, p, A)`:
/// `c` from the condition at `+-p` and `A` from the simple-pole term of
/// `y''/y` at `p`, which is `-A/(z-p)` in the potential and `-l0/(z-p)` for
/// `y'/y = -1/(2(z-p)) + l0 + ...`.
pub fn ansatz_parameters(ctx: &EllipticContext, n: Multiplicity, p: C, a: &[C]) -> Result<(C, C), GeneratorError> {
    let mut c = C::new(0.0, 0.0);
    for &ai in a {
        c += 0.5 * (ctx.zeta(ai + p)? + ctx.zeta(ai - p)?);
    }
    for k in 1..4 {
        c -= ctx.eta_k(k) * (0.5 * n.get(k) as f64);
    }
    let mut big_a = c - 0.5 * ctx.zeta(2.0 * p)?;
    for &ai in a {
        big_a += ctx.zeta(p - ai)?;
    }
    for k in 0..4 {
        if n.get(k) > 0 {
            big_a -= ctx.zeta(p - ctx.half_period(k))? * n.get(k) as f64;
        }
    }
    Ok((big_a, c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberPoint {
    #[serde(with = "crate::ansatz::vec_c")]
    pub a: Vec<C>,
    #[serde(rename = "A", with = "crate::monodromy::c_serde")]
    pub a_param: C,
    #[serde(with = "crate::monodromy::c_serde")]
    pub sigma: C,
    #[serde(with = "crate::monodromy::c_serde")]
    pub z: C,
    /// Largest ODE residual of the ansatz at the probe points.
    pub residual: f64,
    /// `r + s tau` from the transported monodromy of `GLE(n, p, A)`, if CR.
    #[serde(with = "opt_c")]
    pub monodromy_sigma: Option<C>,
}

mod opt_c {
    use crate::C;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Option<C>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(z) => s.serialize_some(&[z.re, z.im]),
            None => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberWitness {
    #[serde(with = "crate::monodromy::c_serde")]
    pub sigma0: C,
    #[serde(with = "crate::monodromy::c_serde")]
    pub p: C,
    pub degree: u32,
    pub points: Vec<FiberPoint>,
    /// Smallest `|z_i - z_j|` over distinct fiber points.
    pub min_separation: f64,
}

impl FiberWitness {
    pub fn distinct(&self) -> bool {
        self.points.len() >= 2 && self.min_separation > 1e-6
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberOptions {
    /// Grid points per side of the period cell for `a_1`.
    pub grid: usize,
    /// Accepted ODE residual of a fiber point.
    pub residual_tol: f64,
    pub monodromy: MonodromyOptions,
}

impl Default for FiberOptions {
    fn default() -> Self {
        FiberOptions { grid: 24, residual_tol: 1e-8, monodromy: MonodromyOptions::default() }
    }
}

const PROBES: [(f64, f64); 3] = [(0.37, 0.29), (0.11, 0.63), (0.71, 0.83)];

fn same_set(ctx: &EllipticContext, x: &[C], y: &[C]) -> bool {
    x.len() == y.len()
        && x.iter().all(|&u| y.iter().any(|&v| ctx.lattice_distance(u - v) < 1e-6))
}

/// Points of the ansatz curve over `sigma0` for `sum n_k = 1`.
///
/// With `a_2 = sigma0 + sum_{k>=1} n_k omega_k / 2 - a_1` and `(A, c)` from
/// [`ansatz_parameters`], the ODE defect at one probe point is a meromorphic
/// function of `a_1` on the torus. Its zeros are found from local minima on a
/// grid over the period cell followed by a secant iteration, and every zero is
/// checked against the ODE at the remaining probes.
pub fn fiber_witness(
    ctx: &EllipticContext,
    n: Multiplicity,
    p: C,
    sigma0: C,
    opts: &FiberOptions,
) -> Result<FiberWitness, GeneratorError> {
    let big_n = n.total() as usize + 1;
    if big_n != 2 {
        return Err(GeneratorError::Arity { expected: 2, got: big_n });
    }
    if ctx.two_torsion_distance(sigma0) < 1e-6 {
        return Err(GeneratorError::TorsionTarget(sigma0));
    }
    let p = ctx.canonical_point(p);
    let shift: C = (1..4).map(|k| ctx.half_period(k) * n.get(k) as f64).sum();
    let total = sigma0 + shift;
    let probes: Vec<C> = PROBES.iter().map(|&(s, t)| ctx.lattice_point(s, t)).collect();
    let build = |a1: C| -> Option<(TorusEquation, AnsatzData)> {
        let a = vec![a1, total - a1];
        let (big_a, c) = ansatz_parameters(ctx, n, p, &a).ok()?;
        let eq = TorusEquation::gle(n, p, big_a, ctx).ok()?;
        // `gle` may flip the sign of `p`; the ansatz is symmetric in it.
        Some((eq, AnsatzData { a, c }))
    };
    let f = |a1: C| -> Option<C> {
        let (eq, data) = build(a1)?;
        let (d, scale) = ode_defect(&eq, &data, probes[0]).ok()?;
        Some(d / scale)
    };
    let m = opts.grid.max(4);
    let values: Vec<C> = (0..m * m)
        .map(|idx| ctx.lattice_point(((idx % m) as f64 + 0.5) / m as f64, ((idx / m) as f64 + 0.5) / m as f64))
        .collect();
    let samples: Vec<f64> = values.par_iter().map(|&a1| f(a1).map_or(f64::INFINITY, |v| v.norm())).collect();
    let step = 0.05 / m as f64;
    let roots: Vec<C> = local_minima(&samples, m)
        .par_iter()
        .filter_map(|&idx| secant(f, values[idx], step, 4.0 * (1.0 + ctx.tau.norm()), C::new(0.0, 0.0)))
        .collect();
    let mut points: Vec<FiberPoint> = Vec::new();
    for a1 in roots {
        let Some((eq, data)) = build(a1) else { continue };
        if points.iter().any(|q| same_set(ctx, &q.a, &data.a)) {
            continue;
        }
        let degenerate = data.a.iter().any(|&x| {
            ctx.lattice_distance(x - p) < 1e-6
                || ctx.lattice_distance(x + p) < 1e-6
                || (0..4).any(|k| n.get(k) > 0 && ctx.lattice_distance(x - ctx.half_period(k)) < 1e-6)
        }) || ctx.lattice_distance(data.a[0] - data.a[1]) < 1e-6;
        if degenerate {
            continue;
        }
        let mut residual = 0.0f64;
        for &z in &probes {
            match ode_residual(&eq, &data, z) {
                Ok(r) => residual = residual.max(r),
                Err(_) => residual = f64::INFINITY,
            }
        }
        if residual > opts.residual_tol {
            continue;
        }
        let a: Vec<C> = data.a.iter().map(|&x| ctx.reduce(x).0).collect();
        let z = z_np(ctx, n, p, &a)?;
        let monodromy_sigma = match monodromy_data(&eq, &opts.monodromy) {
            Ok((MonodromyData::Cr { r, s }, _)) => Some(r + s * ctx.tau),
            _ => None,
        };
        let a_param = match eq {
            TorusEquation::Gle { a, p: pe, .. } if (pe - p).norm() > 1e-12 => -a,
            TorusEquation::Gle { a, .. } => a,
            _ => unreachable!(),
        };
        points.push(FiberPoint { a, a_param, sigma: addition_map(ctx, n, &data.a), z, residual, monodromy_sigma });
    }
    points.sort_by(|x, y| x.a_param.re.total_cmp(&y.a_param.re).then(x.a_param.im.total_cmp(&y.a_param.im)));
    let mut min_separation = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            min_separation = min_separation.min((points[i].z - points[j].z).norm());
        }
    }
    Ok(FiberWitness { sigma0, p, degree: deg_sigma(n), points, min_separation })
}
