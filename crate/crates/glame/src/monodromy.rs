//! Monodromy along the fundamental cycles and its classification.
//!
//! With `Y(q0) = I`, transport along `l_j` gives `M_j` acting on the columns
//! `(y, y')`. Acting on the solution vector, continuation is `N_j = M_j^T`,
//! which is the convention for the normal forms below.
//!
//! - completely reducible: `N_1 ~ diag(e^{-2 pi i s}, e^{2 pi i s})`,
//!   `N_2 ~ diag(e^{2 pi i r}, e^{-2 pi i r})`, data `(r, s)` up to sign and `Z^2`;
//! - otherwise `N_1 = eps_1 [[1,0],[1,1]]`, `N_2 = eps_2 [[1,0],[C,1]]`
//!   after conjugation, `C` in `C u {inf}`.
//!
//! `C` is computed as the ratio of the nilpotent parts `eps_j N_j - I`, which
//! are proportional in every basis.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::equation::{EquationError, Multiplicity, TorusEquation};
use crate::lattice::EllipticContext;
use crate::transport::{default_base_point, plan_cycle_paths, transport, PathPlan, TransportError, DEFAULT_CLEARANCE};
use crate::{Mat2, C};

/// Coincidence threshold used by the scans.
pub const SCAN_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MonodromyError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error("cycle monodromies do not commute (|[N1,N2]| = {0:e})")]
    NotCommuting(f64),
    #[error("both cycle monodromies are +-I")]
    TrivialProjective,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyOptions {
    pub tol: f64,
    pub clearance: f64,
    /// Base point; `None` means `-(1 + tau)/4`.
    pub q0: Option<C>,
    pub classify: ClassifyOptions,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        MonodromyOptions { tol: 1e-10, clearance: DEFAULT_CLEARANCE, q0: None, classify: ClassifyOptions::default() }
    }
}

impl MonodromyOptions {
    pub fn with_tol(tol: f64) -> Self {
        MonodromyOptions { tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Bound on `|[N1, N2]| / max(1, |N1| |N2|)`.
    pub commute_tol: f64,
    /// Traces within this of `+-2` count as parabolic.
    pub trace_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { commute_tol: 1e-6, trace_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleMonodromy {
    /// Transfer matrices on `(y, y')` columns.
    pub m: [Mat2; 2],
    /// `N_j = M_j^T`.
    pub n: [Mat2; 2],
    pub err: f64,
    pub q0: C,
    pub plans: [PathPlan; 2],
}

impl CycleMonodromy {
    pub fn traces(&self) -> (C, C) {
        (self.n[0].trace(), self.n[1].trace())
    }

    pub fn commutator_norm(&self) -> f64 {
        (self.n[0] * self.n[1] - self.n[1] * self.n[0]).norm()
    }
}

pub fn cycle_monodromy(eq: &TorusEquation, opts: &MonodromyOptions) -> Result<CycleMonodromy, MonodromyError> {
    let q0 = opts.q0.unwrap_or_else(|| default_base_point(eq.ctx()));
    let plans = plan_cycle_paths(eq, q0, opts.clearance)?;
    let t1 = transport(eq, &plans[0].vertices, opts.tol)?;
    let t2 = transport(eq, &plans[1].vertices, opts.tol)?;
    Ok(CycleMonodromy {
        m: [t1.m, t2.m],
        n: [t1.m.transpose(), t2.m.transpose()],
        err: t1.err + t2.err,
        q0,
        plans,
    })
}

/// Point of `P^1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ProjectiveC {
    Finite(#[serde(with = "crate::monodromy::c_serde")] C),
    Infinity(InfinityTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InfinityTag {
    #[serde(rename = "inf")]
    Inf,
}

impl ProjectiveC {
    pub const INFINITY: ProjectiveC = ProjectiveC::Infinity(InfinityTag::Inf);

    pub fn is_infinite(&self) -> bool {
        matches!(self, ProjectiveC::Infinity(_))
    }

    pub fn finite(&self) -> Option<C> {
        match self {
            ProjectiveC::Finite(c) => Some(*c),
            _ => None,
        }
    }
}

pub(crate) mod c_serde {
    use crate::C;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(z: &C, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq([z.re, z.im])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum MonodromyData {
    #[serde(rename = "CR")]
    Cr {
        #[serde(with = "c_serde")]
        r: C,
        #[serde(with = "c_serde")]
        s: C,
    },
    #[serde(rename = "NCR")]
    Ncr { eps1: i32, eps2: i32, #[serde(rename = "C")] c: ProjectiveC },
}

impl MonodromyData {
    pub fn is_cr(&self) -> bool {
        matches!(self, MonodromyData::Cr { .. })
    }

    /// Traces `(tr N1, tr N2)` predicted by the data.
    pub fn traces(&self) -> (C, C) {
        match *self {
            MonodromyData::Cr { r, s } => {
                let two_pi = C::new(2.0 * PI, 0.0);
                ((two_pi * s).cos() * 2.0, (two_pi * r).cos() * 2.0)
            }
            MonodromyData::Ncr { eps1, eps2, .. } => (C::new(2.0 * eps1 as f64, 0.0), C::new(2.0 * eps2 as f64, 0.0)),
        }
    }
}

/// Component of the unique (up to scale) eigen-direction of an SL(2) matrix for
/// eigenvalue `lam`.
fn eigenvector(x: &Mat2, lam: C) -> [C; 2] {
    let v1 = [x[(0, 1)], lam - x[(0, 0)]];
    let v2 = [lam - x[(1, 1)], x[(1, 0)]];
    let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
    let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
    if n1 >= n2 {
        v1
    } else {
        v2
    }
}

fn sl2_eigenvalue(x: &Mat2) -> C {
    let t = x.trace();
    (t + (t * t - 4.0).sqrt()) * 0.5
}

fn rayleigh(x: &Mat2, v: [C; 2]) -> C {
    let xv = [x[(0, 0)] * v[0] + x[(0, 1)] * v[1], x[(1, 0)] * v[0] + x[(1, 1)] * v[1]];
    (v[0].conj() * xv[0] + v[1].conj() * xv[1]) / (v[0].norm_sqr() + v[1].norm_sqr())
}

/// A common eigenvector of two commuting SL(2) matrices, taken from whichever
/// is further from `+-I`, with the two eigenvalues on it.
pub fn common_eigenvector(a: &Mat2, b: &Mat2) -> ([C; 2], C, C) {
    let da = (a.trace() * a.trace() - 4.0).norm();
    let db = (b.trace() * b.trace() - 4.0).norm();
    let ua = (a - Mat2::identity() * (a.trace() * 0.5)).norm();
    let ub = (b - Mat2::identity() * (b.trace() * 0.5)).norm();
    let use_a = if da.max(db) > 1e-6 { da >= db } else { ua >= ub };
    let (x, y) = if use_a { (a, b) } else { (b, a) };
    let lam = sl2_eigenvalue(x);
    let v = eigenvector(x, lam);
    let mu = rayleigh(y, v);
    if use_a {
        (v, lam, mu)
    } else {
        (v, mu, lam)
    }
}

fn frob(a: &Mat2, b: &Mat2) -> C {
    let mut acc = C::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}

/// Reads the monodromy data off `(N1, N2)`.
pub fn classify(n1: &Mat2, n2: &Mat2, opts: &ClassifyOptions) -> Result<MonodromyData, MonodromyError> {
    let comm = (n1 * n2 - n2 * n1).norm() / (n1.norm() * n2.norm()).max(1.0);
    if comm > opts.commute_tol {
        return Err(MonodromyError::NotCommuting(comm));
    }
    let (t1, t2) = (n1.trace(), n2.trace());
    let near = |t: C| (t - 2.0).norm() < opts.trace_tol || (t + 2.0).norm() < opts.trace_tol;
    if near(t1) && near(t2) {
        let eps1 = if t1.re > 0.0 { 1 } else { -1 };
        let eps2 = if t2.re > 0.0 { 1 } else { -1 };
        let u1 = n1 * C::new(eps1 as f64, 0.0) - Mat2::identity();
        let u2 = n2 * C::new(eps2 as f64, 0.0) - Mat2::identity();
        let (a1, a2) = (u1.norm(), u2.norm());
        let floor = 1e3 * opts.trace_tol.max(opts.commute_tol);
        if a1.max(a2) < floor {
            return Err(MonodromyError::TrivialProjective);
        }
        let c = if a1 < 1e-7 * a2 {
            ProjectiveC::INFINITY
        } else {
            ProjectiveC::Finite(frob(&u1, &u2) / frob(&u1, &u1))
        };
        return Ok(MonodromyData::Ncr { eps1, eps2, c });
    }
    let (_, l1, l2) = common_eigenvector(n1, n2);
    let two_pi_i = C::new(0.0, 2.0 * PI);
    let s = -l1.ln() / two_pi_i;
    let r = l2.ln() / two_pi_i;
    let (r, s) = canonical_rs(r, s);
    Ok(MonodromyData::Cr { r, s })
}

fn reduce_unit(z: C) -> C {
    let mut re = z.re - z.re.floor();
    if re > 1.0 - 1e-10 {
        re -= 1.0;
    }
    C::new(re, z.im)
}

/// Canonical representative of `(r, s)` under `(r, s) -> +-(r, s) + Z^2`:
/// real parts in `[0, 1)`, sign chosen so that `(Re s, Re r, Im s, Im r)` is
/// lexicographically smallest.
pub fn canonical_rs(r: C, s: C) -> (C, C) {
    let a = (reduce_unit(r), reduce_unit(s));
    let b = (reduce_unit(-r), reduce_unit(-s));
    let key = |(r, s): (C, C)| [s.re, r.re, s.im, r.im];
    let (ka, kb) = (key(a), key(b));
    for i in 0..4 {
        if (ka[i] - kb[i]).abs() > 1e-9 {
            return if ka[i] < kb[i] { a } else { b };
        }
    }
    a
}

fn wrap(z: C) -> C {
    C::new(z.re - z.re.round(), z.im)
}

/// Distance between monodromy data: `max(|dr|, |ds|)` modulo sign and `Z^2` for
/// CR data, `|dC| / (1 + |C|)` for NCR data with equal signs, infinite otherwise.
pub fn data_distance(a: &MonodromyData, b: &MonodromyData) -> f64 {
    match (a, b) {
        (MonodromyData::Cr { r: r1, s: s1 }, MonodromyData::Cr { r: r2, s: s2 }) => [1.0, -1.0]
            .iter()
            .map(|&sg| wrap(*r1 - *r2 * sg).norm().max(wrap(*s1 - *s2 * sg).norm()))
            .fold(f64::INFINITY, f64::min),
        (
            MonodromyData::Ncr { eps1: e1, eps2: e2, c: c1 },
            MonodromyData::Ncr { eps1: f1, eps2: f2, c: c2 },
        ) => {
            if e1 != f1 || e2 != f2 {
                return f64::INFINITY;
            }
            match (c1, c2) {
                (ProjectiveC::Finite(x), ProjectiveC::Finite(y)) => (x - y).norm() / (1.0 + x.norm().max(y.norm())),
                (ProjectiveC::Finite(x), _) | (_, ProjectiveC::Finite(x)) => 1.0 / (1.0 + x.norm()),
                _ => 0.0,
            }
        }
        _ => f64::INFINITY,
    }
}

/// Transport plus classification.
pub fn monodromy_data(
    eq: &TorusEquation,
    opts: &MonodromyOptions,
) -> Result<(MonodromyData, CycleMonodromy), MonodromyError> {
    let cm = cycle_monodromy(eq, opts)?;
    let data = classify(&cm.n[0], &cm.n[1], &opts.classify)?;
    Ok((data, cm))
}

/// Square grid of complex parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamGrid {
    #[serde(with = "c_serde")]
    pub center: C,
    pub half_width: f64,
    pub points: usize,
}

impl ParamGrid {
    pub fn new(center: C, half_width: f64, points: usize) -> Self {
        ParamGrid { center, half_width, points: points.max(1) }
    }

    pub fn spacing(&self) -> f64 {
        if self.points < 2 {
            0.0
        } else {
            2.0 * self.half_width / (self.points - 1) as f64
        }
    }

    /// Row-major values, real part varying fastest.
    pub fn values(&self) -> Vec<C> {
        let h = self.spacing();
        let lo = self.center - C::new(self.half_width, self.half_width);
        let mut out = Vec::with_capacity(self.points * self.points);
        for j in 0..self.points {
            for i in 0..self.points {
                out.push(lo + C::new(i as f64 * h, j as f64 * h));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BMatch {
    #[serde(with = "c_serde")]
    pub b: C,
    pub data: MonodromyData,
    pub distance: f64,
}

fn heun_traces(n: Multiplicity, ctx: &EllipticContext, b: C, opts: &MonodromyOptions) -> Result<(C, C), MonodromyError> {
    let eq = TorusEquation::heun(n, b, ctx)?;
    Ok(cycle_monodromy(&eq, opts)?.traces())
}

pub(crate) fn secant<F: Fn(C) -> Option<C>>(g: F, x0: C, step: f64, bound: f64, center: C) -> Option<C> {
    let mut a = x0;
    let mut b = x0 + C::new(step, 0.5 * step);
    let mut fa = g(a)?;
    let mut fb = g(b)?;
    for _ in 0..60 {
        let den = fb - fa;
        if den.norm() == 0.0 {
            break;
        }
        let c = b - fb * (b - a) / den;
        if (c - center).norm() > bound || !c.re.is_finite() {
            return None;
        }
        let fc = g(c)?;
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        if (b - a).norm() < 1e-12 * (1.0 + b.norm()) {
            return Some(b);
        }
    }
    if fb.norm() < 1e-8 {
        Some(b)
    } else {
        None
    }
}

pub(crate) fn local_minima(vals: &[f64], n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let v = vals[j * n + i];
            if !v.is_finite() {
                continue;
            }
            let mut is_min = true;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                        continue;
                    }
                    let w = vals[jj as usize * n + ii as usize];
                    if w.is_finite() && w < v {
                        is_min = false;
                    }
                }
            }
            if is_min {
                out.push(j * n + i);
            }
        }
    }
    out
}

/// All `B` in the grid box for which `H(n, B)` has the target data.
///
/// The traces are sampled on the grid; from every local minimum of
/// `|tr N1 - T1|`, `|tr N2 - T2|` and their sum, a secant iteration solves one
/// trace equation; candidates are then classified in full and kept when they
/// are within `match_tol` of the target.
pub fn find_b_for_data(
    n: Multiplicity,
    ctx: &EllipticContext,
    target: &MonodromyData,
    grid: &ParamGrid,
    match_tol: f64,
    opts: &MonodromyOptions,
) -> Result<Vec<BMatch>, MonodromyError> {
    if n.max() == 0 {
        return Err(EquationError::InvalidMultiplicity(n.0).into());
    }
    let (t1, t2) = target.traces();
    let values = grid.values();
    let traces: Vec<Option<(C, C)>> =
        values.par_iter().map(|&b| heun_traces(n, ctx, b, opts).ok()).collect();
    let g1: Vec<f64> = traces.iter().map(|t| t.map_or(f64::INFINITY, |t| (t.0 - t1).norm())).collect();
    let g2: Vec<f64> = traces.iter().map(|t| t.map_or(f64::INFINITY, |t| (t.1 - t2).norm())).collect();
    let gs: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
    let np = grid.points;
    let mut seeds: Vec<(usize, usize)> = Vec::new();
    for (which, vals) in [(0usize, &g1), (1, &g2), (2, &gs)] {
        for idx in local_minima(vals, np) {
            if which == 2 {
                seeds.push((idx, 0));
                seeds.push((idx, 1));
            } else {
                seeds.push((idx, which));
            }
        }
    }
    seeds.sort();
    seeds.dedup();
    let step = (grid.spacing() * 0.05).max(1e-4);
    let bound = 2.0 * grid.half_width * std::f64::consts::SQRT_2 + 1.0;
    let roots: Vec<C> = seeds
        .par_iter()
        .filter_map(|&(idx, which)| {
            let target_t = if which == 0 { t1 } else { t2 };
            let g = |b: C| {
                heun_traces(n, ctx, b, opts).ok().map(|t| if which == 0 { t.0 - target_t } else { t.1 - target_t })
            };
            secant(g, values[idx], step, bound, grid.center)
        })
        .collect();
    let mut uniq: Vec<C> = Vec::new();
    for r in roots {
        let inside = (r.re - grid.center.re).abs() <= grid.half_width + 1e-9
            && (r.im - grid.center.im).abs() <= grid.half_width + 1e-9;
        if inside && !uniq.iter().any(|u| (u - r).norm() < 1e-6 * (1.0 + r.norm())) {
            uniq.push(r);
        }
    }
    let mut out: Vec<BMatch> = uniq
        .par_iter()
        .filter_map(|&b| {
            let eq = TorusEquation::heun(n, b, ctx).ok()?;
            let (data, _) = monodromy_data(&eq, opts).ok()?;
            let distance = data_distance(&data, target);
            (distance < match_tol).then_some(BMatch { b, data, distance })
        })
        .collect();
    out.sort_by(|a, b| a.b.re.total_cmp(&b.b.re).then(a.b.im.total_cmp(&b.b.im)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanEntry {
    #[serde(with = "c_serde")]
    pub b: C,
    pub data: MonodromyData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coincidence {
    #[serde(with = "c_serde")]
    pub b1: C,
    #[serde(with = "c_serde")]
    pub b2: C,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub n: Multiplicity,
    /// Second family for cross scans.
    pub n_other: Option<Multiplicity>,
    pub grid: ParamGrid,
    pub threshold: f64,
    pub entries: Vec<ScanEntry>,
    pub entries_other: Vec<ScanEntry>,
    pub failures: Vec<(String, String)>,
    pub coincidences: Vec<Coincidence>,
}

fn scan_family(
    n: Multiplicity,
    ctx: &EllipticContext,
    grid: &ParamGrid,
    opts: &MonodromyOptions,
) -> (Vec<ScanEntry>, Vec<(String, String)>) {
    let results: Vec<(C, Result<MonodromyData, MonodromyError>)> = grid
        .values()
        .par_iter()
        .map(|&b| {
            let res = TorusEquation::heun(n, b, ctx)
                .map_err(MonodromyError::from)
                .and_then(|eq| monodromy_data(&eq, opts).map(|d| d.0));
            (b, res)
        })
        .collect();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (b, r) in results {
        match r {
            Ok(data) => entries.push(ScanEntry { b, data }),
            Err(e) => failures.push((format!("{b}"), e.to_string())),
        }
    }
    (entries, failures)
}

/// Pairs of distinct grid values of `B` whose `H(n, B)` have the same data
/// within `threshold`.
pub fn uniqueness_scan(
    n: Multiplicity,
    ctx: &EllipticContext,
    grid: &ParamGrid,
    threshold: f64,
    opts: &MonodromyOptions,
) -> Result<ScanReport, MonodromyError> {
    if n.max() == 0 {
        return Err(EquationError::InvalidMultiplicity(n.0).into());
    }
    let (entries, failures) = scan_family(n, ctx, grid, opts);
    let mut coincidences = Vec::new();
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            let d = data_distance(&entries[i].data, &entries[j].data);
            if d < threshold && (entries[i].b - entries[j].b).norm() > 1e-9 {
                coincidences.push(Coincidence { b1: entries[i].b, b2: entries[j].b, distance: d });
            }
        }
    }
    Ok(ScanReport {
        n,
        n_other: None,
        grid: *grid,
        threshold,
        entries,
        entries_other: Vec::new(),
        failures,
        coincidences,
    })
}

/// Compares `H(n, .)` with `H(n + 2 e_k, .)` over the same grid.
pub fn cross_scan(
    n: Multiplicity,
    k: usize,
    ctx: &EllipticContext,
    grid: &ParamGrid,
    threshold: f64,
    opts: &MonodromyOptions,
) -> Result<ScanReport, MonodromyError> {
    if n.max() == 0 {
        return Err(EquationError::InvalidMultiplicity(n.0).into());
    }
    let other = n.plus_two(k);
    let (entries, mut failures) = scan_family(n, ctx, grid, opts);
    let (entries_other, f2) = scan_family(other, ctx, grid, opts);
    failures.extend(f2);
    let mut coincidences = Vec::new();
    for a in &entries {
        for b in &entries_other {
            let d = data_distance(&a.data, &b.data);
            if d < threshold {
                coincidences.push(Coincidence { b1: a.b, b2: b.b, distance: d });
            }
        }
    }
    Ok(ScanReport { n, n_other: Some(other), grid: *grid, threshold, entries, entries_other, failures, coincidences })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    #[serde(with = "c_serde")]
    pub tau: C,
    pub target: MonodromyData,
    pub n1: Multiplicity,
    pub n2: Multiplicity,
    pub grid1: ParamGrid,
    pub grid2: ParamGrid,
    pub b1: Vec<BMatch>,
    pub b2: Vec<BMatch>,
}

/// `tau0 = 1/2 + i sqrt(3)/2`, where `g2` vanishes.
pub fn tau0() -> C {
    C::new(0.5, 3f64.sqrt() / 2.0)
}

/// Searches `H(n1, .)` and `H(n2, .)` for the data `(1/3, 1/3)`.
pub fn counterexample(
    ctx: &EllipticContext,
    n1: Multiplicity,
    n2: Multiplicity,
    grid1: &ParamGrid,
    grid2: &ParamGrid,
    match_tol: f64,
    opts: &MonodromyOptions,
) -> Result<CounterexampleReport, MonodromyError> {
    let third = C::new(1.0 / 3.0, 0.0);
    let target = MonodromyData::Cr { r: third, s: third };
    let b1 = find_b_for_data(n1, ctx, &target, grid1, match_tol, opts)?;
    let b2 = find_b_for_data(n2, ctx, &target, grid2, match_tol, opts)?;
    Ok(CounterexampleReport { tau: ctx.tau, target, n1, n2, grid1: *grid1, grid2: *grid2, b1, b2 })
}
