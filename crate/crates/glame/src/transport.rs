//! Path planning and transport of the fundamental matrix.
//!
//! A path is a polyline. Along each edge `z(t) = a + t (b - a)` the companion
//! system `Y' = [[0, 1], [-b(z), -a(z)]] Y` of `y'' + a y' + b y = 0` is
//! integrated with Dormand-Prince 5(4). Starting from `Y = I`, the result is
//! the transfer matrix acting on `(y, y')` columns.
//!
//! Paths keep a clearance from singular points and never cross the branch
//! cuts `[-p, p] + Lambda` of a GLE, so that continuation of GLE solutions is
//! unambiguous.

use serde::Serialize;
use std::f64::consts::PI;

use crate::equation::TorusEquation;
use crate::lattice::{EllipticContext, LatticeError};
use crate::ode::{integrate, Dp5Options, OdeError};
use crate::{Mat2, C};

pub const DEFAULT_CLEARANCE: f64 = 0.05;
const DETOUR_POINTS: usize = 8;
const LOOP_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("path planning failed: {0}")]
    PlanningFailed(String),
    #[error("integration failed near z = {z}: {reason}")]
    StepFailure { z: C, reason: String },
    #[error("coefficient evaluation failed: {0}")]
    Singular(#[from] LatticeError),
    #[error("loop around {center} (radius {radius}) encloses {count} singular points")]
    NotIsolated { center: C, radius: f64, count: usize },
}

/// `y'' + a(z) y' + b(z) y = 0`.
pub trait SecondOrderOde: Sync {
    fn coefficients(&self, z: C) -> Result<(C, C), LatticeError>;
}

impl SecondOrderOde for TorusEquation {
    fn coefficients(&self, z: C) -> Result<(C, C), LatticeError> {
        Ok((C::new(0.0, 0.0), -self.potential(z)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPlan {
    pub vertices: Vec<C>,
    pub clearance: f64,
    pub avoided_points: Vec<C>,
    pub avoided_segments: Vec<(C, C)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m: Mat2,
    pub err: f64,
}

/// Default base point `q0 = -(1 + tau)/4`.
pub fn default_base_point(ctx: &EllipticContext) -> C {
    -(ctx.tau + 1.0) * 0.25
}

fn cross(u: C, v: C) -> f64 {
    (u.conj() * v).im
}

/// Distance from `p` to the segment `[a, b]` and the parameter of the foot point.
pub fn point_segment_distance(p: C, a: C, b: C) -> (f64, f64) {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return ((p - a).norm(), 0.0);
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    ((p - (a + d * t)).norm(), t)
}

/// Proper intersection of `[a, b]` with `[c, d]`; returns the parameters along both.
pub fn segment_intersection(a: C, b: C, c: C, d: C) -> Option<(f64, f64)> {
    let r = b - a;
    let s = d - c;
    let den = cross(r, s);
    if den.abs() < 1e-300 {
        return None;
    }
    let t = cross(c - a, s) / den;
    let u = cross(c - a, r) / den;
    if t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0 {
        Some((t, u))
    } else {
        None
    }
}

enum Violation {
    Point { edge: usize, at: f64, pt: C },
    Cut { edge: usize, seg: (C, C), along: f64 },
}

/// Polyline from `start` to `end` keeping `clearance` from `points` and never
/// crossing `segments`. Detours are 8 point arcs; a point is passed on the same
/// side as the straight edge, a segment is passed around its nearer end.
pub fn plan_path(
    start: C,
    end: C,
    points: &[C],
    segments: &[(C, C)],
    clearance: f64,
) -> Result<PathPlan, TransportError> {
    for &pt in points {
        for z in [start, end] {
            if (z - pt).norm() < clearance {
                return Err(TransportError::PlanningFailed(format!(
                    "endpoint {z} lies within {clearance} of singular point {pt}"
                )));
            }
        }
    }
    let radius = 1.6 * clearance;
    let mut verts = vec![start, end];
    for _ in 0..400 {
        let mut found: Option<Violation> = None;
        'edges: for i in 0..verts.len() - 1 {
            let (a, b) = (verts[i], verts[i + 1]);
            let mut best: Option<(f64, Violation)> = None;
            for &seg in segments {
                if let Some((t, u)) = segment_intersection(a, b, seg.0, seg.1) {
                    if best.as_ref().is_none_or(|(bt, _)| t < *bt) {
                        best = Some((t, Violation::Cut { edge: i, seg, along: u }));
                    }
                }
            }
            for &pt in points {
                let (d, t) = point_segment_distance(pt, a, b);
                if d < clearance * 0.999 && best.as_ref().is_none_or(|(bt, _)| t < *bt) {
                    best = Some((t, Violation::Point { edge: i, at: t, pt }));
                }
            }
            if let Some((_, v)) = best {
                found = Some(v);
                break 'edges;
            }
        }
        let Some(v) = found else {
            return Ok(PathPlan {
                vertices: verts,
                clearance,
                avoided_points: points.to_vec(),
                avoided_segments: segments.to_vec(),
            });
        };
        match v {
            Violation::Point { edge, at, pt } => {
                let (a, b) = (verts[edge], verts[edge + 1]);
                let d = (b - a) / (b - a).norm();
                let foot = a + (b - a) * at;
                let mut w = foot - pt;
                if w.norm() < 1e-12 {
                    w = d * C::new(0.0, 1.0);
                }
                let w = w / w.norm();
                let arc: Vec<C> = (0..DETOUR_POINTS)
                    .map(|j| {
                        let phi = PI * j as f64 / (DETOUR_POINTS - 1) as f64;
                        pt + (-d * phi.cos() + w * phi.sin()) * radius
                    })
                    .collect();
                verts.splice(edge + 1..edge + 1, arc);
            }
            Violation::Cut { edge, seg, along, .. } => {
                let a = verts[edge];
                let (tip, other) = if along > 0.5 { (seg.1, seg.0) } else { (seg.0, seg.1) };
                let out = (tip - other) / (tip - other).norm();
                let side = if cross(out, a - tip) >= 0.0 { 1.0 } else { -1.0 };
                let arc: Vec<C> = (0..DETOUR_POINTS)
                    .map(|j| {
                        let phi = side * 0.5 * PI * (1.0 - 2.0 * j as f64 / (DETOUR_POINTS - 1) as f64);
                        tip + out * C::from_polar(radius, phi)
                    })
                    .collect();
                verts.splice(edge + 1..edge + 1, arc);
            }
        }
        if verts.len() > 2000 {
            break;
        }
    }
    Err(TransportError::PlanningFailed(format!(
        "no admissible path from {start} to {end} with clearance {clearance}"
    )))
}

/// Lattice translates of the singular points and of the GLE cut near the
/// segment `[a, b]`.
pub fn obstacles_near(eq: &TorusEquation, a: C, b: C) -> (Vec<C>, Vec<(C, C)>) {
    let ctx = eq.ctx();
    let reach = 1.5 + 0.5 * ctx.tau.norm();
    let (mc, nc) = ctx.nearest_lattice_point((a + b) * 0.5);
    let span = (b - a).norm();
    let range = ((span + 2.0 * reach) / ctx.tau.im.min(1.0)).ceil() as i64 + 1;
    let base = eq.singular_points();
    let cut = eq.cut();
    let mut pts = Vec::new();
    let mut segs = Vec::new();
    for m in (mc - range)..=(mc + range) {
        for n in (nc - range)..=(nc + range) {
            let w = ctx.lattice_point(m as f64, n as f64);
            for &s in &base {
                let q = s + w;
                if point_segment_distance(q, a, b).0 < reach {
                    pts.push(q);
                }
            }
            if let Some((c0, c1)) = cut {
                let (s0, s1) = (c0 + w, c1 + w);
                let near = point_segment_distance(s0, a, b).0 < reach + (c1 - c0).norm()
                    || point_segment_distance(s1, a, b).0 < reach + (c1 - c0).norm();
                if near {
                    segs.push((s0, s1));
                }
            }
        }
    }
    (pts, segs)
}

/// Admissible path for the equation between two points.
pub fn plan_for(eq: &TorusEquation, a: C, b: C, clearance: f64) -> Result<PathPlan, TransportError> {
    let (pts, segs) = obstacles_near(eq, a, b);
    plan_path(a, b, &pts, &segs, clearance)
}

/// The two fundamental cycles `l_j : q0 -> q0 + omega_j`.
pub fn plan_cycle_paths(eq: &TorusEquation, q0: C, clearance: f64) -> Result<[PathPlan; 2], TransportError> {
    let ctx = eq.ctx();
    let p1 = plan_for(eq, q0, q0 + ctx.omega(1), clearance)?;
    let p2 = plan_for(eq, q0, q0 + ctx.omega(2), clearance)?;
    Ok([p1, p2])
}

fn step_failure<E: std::fmt::Display>(z: C, e: OdeError<E>) -> TransportError {
    TransportError::StepFailure { z, reason: e.to_string() }
}

fn edge_rhs<'a, O: SecondOrderOde + ?Sized, const N: usize>(
    ode: &'a O,
    a: C,
    b: C,
) -> impl FnMut(f64, &[C; N]) -> Result<[C; N], LatticeError> + 'a {
    let dz = b - a;
    move |t, y| {
        let (ca, cb) = ode.coefficients(a + dz * t)?;
        let half = N / 2;
        let mut out = [C::new(0.0, 0.0); N];
        for j in 0..half {
            let (y0, y1) = (y[j], y[half + j]);
            out[j] = dz * y1;
            out[half + j] = dz * (-cb * y0 - ca * y1);
        }
        Ok(out)
    }
}

/// Transports the state (first half values, second half derivatives) along
/// one edge.
pub fn transport_edge<O: SecondOrderOde + ?Sized, const N: usize>(
    ode: &O,
    a: C,
    b: C,
    y0: [C; N],
    tol: f64,
) -> Result<([C; N], f64), TransportError> {
    let opts = Dp5Options::with_tol(tol);
    let (y, rep) = integrate(edge_rhs::<O, N>(ode, a, b), 0.0, 1.0, y0, &opts).map_err(|e| step_failure(a, e))?;
    Ok((y, rep.err))
}

/// Transfer matrix along a polyline.
pub fn transport<O: SecondOrderOde + ?Sized>(ode: &O, path: &[C], tol: f64) -> Result<TransferMatrix, TransportError> {
    let one = C::new(1.0, 0.0);
    let zero = C::new(0.0, 0.0);
    // [y_a, y_b, y_a', y_b']
    let mut y = [one, zero, zero, one];
    let mut err = 0.0;
    for w in path.windows(2) {
        let (y1, e) = transport_edge::<O, 4>(ode, w[0], w[1], y, tol)?;
        y = y1;
        err += e;
    }
    Ok(TransferMatrix { m: Mat2::new(y[0], y[1], y[2], y[3]), err })
}

/// Transports one solution `(y, y')` along a polyline; returns the value at
/// every vertex.
pub fn transport_vector<O: SecondOrderOde + ?Sized>(
    ode: &O,
    path: &[C],
    v0: [C; 2],
    tol: f64,
) -> Result<Vec<[C; 2]>, TransportError> {
    let mut out = Vec::with_capacity(path.len());
    let mut v = v0;
    out.push(v);
    for w in path.windows(2) {
        let (v1, _) = transport_edge::<O, 2>(ode, w[0], w[1], v, tol)?;
        v = v1;
        out.push(v);
    }
    Ok(out)
}

/// Polygon approximating the counterclockwise circle, starting at `center + radius`.
pub fn circle_path(center: C, radius: f64, start_angle: f64, vertices: usize) -> Vec<C> {
    (0..=vertices)
        .map(|k| center + C::from_polar(radius, start_angle + 2.0 * PI * k as f64 / vertices as f64))
        .collect()
}

/// Monodromy of a counterclockwise loop based at `center + radius`, for a
/// general equation. No isolation check.
pub fn loop_transport_ode<O: SecondOrderOde + ?Sized>(
    ode: &O,
    center: C,
    radius: f64,
    tol: f64,
) -> Result<TransferMatrix, TransportError> {
    transport(ode, &circle_path(center, radius, 0.0, LOOP_VERTICES), tol)
}

/// Local monodromy around a singular point of a torus equation. The disk must
/// contain exactly one singular point of `E_tau` (counted with translates).
pub fn loop_transport(eq: &TorusEquation, center: C, radius: f64, tol: f64) -> Result<TransferMatrix, TransportError> {
    let (pts, _) = obstacles_near(eq, center - radius, center + radius);
    let mut uniq: Vec<C> = Vec::new();
    for p in pts {
        if (p - center).norm() < radius && !uniq.iter().any(|q| (q - p).norm() < 1e-12) {
            uniq.push(p);
        }
    }
    if uniq.len() != 1 {
        return Err(TransportError::NotIsolated { center, radius, count: uniq.len() });
    }
    loop_transport_ode(eq, center, radius, tol)
}
