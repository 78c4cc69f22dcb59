use glame::ansatz::{
    c_from_a, eigen_solution_zeros, eval_ansatz, ode_residual, phi_even, rs_from_a, spectral_sample, spectral_samples,
    AnsatzData, ZeroOptions,
};
use glame::hitchin::{family_state, SolutionTag};
use glame::monodromy::{canonical_rs, monodromy_data, tau0, MonodromyOptions};
use glame::{EllipticContext, MonodromyData, Multiplicity, TorusEquation, C};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn ctx() -> EllipticContext {
    EllipticContext::new(c(0.1, 1.1), 1e-13).unwrap()
}

fn lame_one(ctx: &EllipticContext, a: C) -> (TorusEquation, AnsatzData) {
    let eq = TorusEquation::heun(Multiplicity::lame(1), ctx.wp_only(a).unwrap(), ctx).unwrap();
    (eq, AnsatzData { a: vec![a], c: ctx.zeta(a).unwrap() })
}

fn same_mod_sign(ctx: &EllipticContext, x: C, y: C, tol: f64) -> bool {
    ctx.lattice_distance(x - y) < tol || ctx.lattice_distance(x + y) < tol
}

/// Roots of a monic polynomial (coefficients from the constant term up) by
/// Durand-Kerner.
fn roots(coeffs: &[C]) -> Vec<C> {
    let deg = coeffs.len() - 1;
    let eval = |x: C| coeffs.iter().rev().fold(c(0.0, 0.0), |acc, &k| acc * x + k);
    let mut z: Vec<C> = (0..deg).map(|k| c(0.4, 0.9).powu(k as u32) * 3.0).collect();
    for _ in 0..500 {
        for i in 0..deg {
            let mut den = c(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
        }
    }
    z
}

#[test]
fn lame_one_ansatz_solves_the_equation() {
    let ctx = ctx();
    let mut rng = StdRng::seed_from_u64(3);
    let (eq, data) = lame_one(&ctx, c(0.31, 0.22));
    let mut checked = 0;
    while checked < 50 {
        let z = ctx.lattice_point(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        if ctx.lattice_distance(z) < 0.05 || ctx.lattice_distance(z - data.a[0]) < 0.05 {
            continue;
        }
        assert!(ode_residual(&eq, &data, z).unwrap() < 1e-9);
        checked += 1;
    }
}

#[test]
fn translation_law() {
    let ctx = ctx();
    let a = c(0.31, 0.22);
    let (eq, data) = lame_one(&ctx, a);
    let q0 = c(-0.2, -0.3);
    let z = c(0.13, 0.27);
    let y = eval_ansatz(&eq, &data, q0, z).unwrap();
    for j in 1..3 {
        let w = ctx.omega(j);
        let got = eval_ansatz(&eq, &data, q0, z + w).unwrap() / y;
        let want = (data.c * w - ctx.eta_k(j) * a).exp();
        assert!((got - want).norm() < 1e-9 * want.norm(), "{got} vs {want}");
    }
}

#[test]
fn c_examples() {
    let ctx = ctx();
    let a = c(0.27, -0.14);
    let (eq, _) = lame_one(&ctx, a);
    assert!((c_from_a(&eq, &[a]).unwrap() - ctx.zeta(a).unwrap()).norm() < 1e-12);
    assert!((c_from_a(&eq, &[-a]).unwrap() + ctx.zeta(a).unwrap()).norm() < 1e-12);
    let p = c(0.2, 0.35);
    let gle = TorusEquation::gle(Multiplicity::ZERO, p, c(0.1, 0.0), &ctx).unwrap();
    let TorusEquation::Gle { p, .. } = gle else { unreachable!() };
    let want = 0.5 * (ctx.zeta(a + p).unwrap() + ctx.zeta(a - p).unwrap());
    assert!((c_from_a(&gle, &[a]).unwrap() - want).norm() < 1e-12);
}

#[test]
fn rs_at_tau0_and_lattice_shifts() {
    let ctx = EllipticContext::new(tau0(), 1e-13).unwrap();
    let a = (1.0 + ctx.tau) / 3.0;
    let (eq, data) = lame_one(&ctx, a);
    let (r, s) = canonical_rs(rs_from_a(&eq, &data).0, rs_from_a(&eq, &data).1);
    assert!((r - 1.0 / 3.0).norm() < 1e-9 && (s - 1.0 / 3.0).norm() < 1e-9, "{r} {s}");

    let ctx = self::ctx();
    let a = c(0.31, 0.22);
    let (eq, data) = lame_one(&ctx, a);
    let (r, s) = rs_from_a(&eq, &data);
    let shifted = a + 2.0 - ctx.tau;
    let data2 = AnsatzData { a: vec![shifted], c: ctx.zeta(shifted).unwrap() };
    let (r2, s2) = rs_from_a(&eq, &data2);
    let (dr, ds) = (r2 - r, s2 - s);
    assert!(dr.im.abs() < 1e-9 && (dr.re - dr.re.round()).abs() < 1e-9);
    assert!(ds.im.abs() < 1e-9 && (ds.re - ds.re.round()).abs() < 1e-9);
    let (cr, cs) = canonical_rs(r, s);
    let (cr2, cs2) = canonical_rs(r2, s2);
    assert!((cr - cr2).norm() + (cs - cs2).norm() < 1e-9);
}

#[test]
fn ansatz_and_transport_agree() {
    let ctx = ctx();
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..4 {
        let a = ctx.lattice_point(rng.random_range(0.05..0.45), rng.random_range(-0.45..0.45));
        let (eq, data) = lame_one(&ctx, a);
        let (r, s) = rs_from_a(&eq, &data);
        let (r, s) = canonical_rs(r, s);
        match monodromy_data(&eq, &MonodromyOptions::default()).unwrap().0 {
            MonodromyData::Cr { r: r2, s: s2 } => assert!((r - r2).norm() + (s - s2).norm() < 1e-6),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn zeros_of_the_lame_eigen_solution() {
    let ctx = ctx();
    let a = ctx.lattice_point(0.3, 0.2);
    let (eq, _) = lame_one(&ctx, a);
    let found = eigen_solution_zeros(&eq, &ZeroOptions::default()).unwrap();
    assert_eq!(found.a.len(), 1);
    assert!(same_mod_sign(&ctx, found.a[0], a, 1e-6), "{:?}", found.a);
    assert!(ode_residual(&eq, &found, c(0.11, 0.37)).unwrap() < 1e-7);
}

#[test]
fn zeros_of_a_hitchin_gle() {
    let ctx = ctx();
    let (r, s) = (c(0.3, 0.0), c(0.2, 0.0));
    let st = family_state(&ctx, &SolutionTag::rs(r, s).unwrap(), None).unwrap();
    let eq = TorusEquation::gle(Multiplicity::ZERO, st.p, st.a, &ctx).unwrap();
    let found = eigen_solution_zeros(&eq, &ZeroOptions::default()).unwrap();
    assert_eq!(found.a.len(), 1);
    assert!(same_mod_sign(&ctx, found.a[0], r + s * ctx.tau, 1e-6), "{:?}", found.a);
}

#[test]
fn ncr_zeros_are_symmetric() {
    let ctx = ctx();
    let eq = TorusEquation::heun(Multiplicity::lame(1), ctx.e[1], &ctx).unwrap();
    let found = eigen_solution_zeros(&eq, &ZeroOptions::default()).unwrap();
    for &x in &found.a {
        assert!(found.a.iter().any(|&y| ctx.lattice_distance(x + y) < 1e-6), "{:?}", found.a);
    }
}

#[test]
fn even_elliptic_solution() {
    let ctx = ctx();
    let a = c(0.31, 0.22);
    let (eq, data) = lame_one(&ctx, a);
    let wa = ctx.wp_only(a).unwrap();
    let mut ratios = Vec::new();
    for k in 0..10 {
        let z = ctx.lattice_point(0.07 + 0.083 * k as f64, 0.41 - 0.071 * k as f64);
        let phi = phi_even(&eq, &data, z).unwrap();
        assert!((phi_even(&eq, &data, -z).unwrap() - phi).norm() < 1e-9 * phi.norm());
        assert!((phi_even(&eq, &data, z + ctx.tau).unwrap() - phi).norm() < 1e-9 * phi.norm());
        ratios.push(phi / (ctx.wp_only(z).unwrap() - wa));
    }
    for r in &ratios {
        assert!((r - ratios[0]).norm() < 1e-8 * ratios[0].norm());
    }

    let p = c(0.2, 0.35);
    let gle = TorusEquation::gle(Multiplicity::ZERO, p, c(0.1, 0.2), &ctx).unwrap();
    let data = AnsatzData { a: vec![a], c: c(0.0, 0.0) };
    let TorusEquation::Gle { p, .. } = gle else { unreachable!() };
    let d = 1e-5;
    let near = phi_even(&gle, &data, p + d).unwrap() * (ctx.wp_only(p + d).unwrap() - ctx.wp_only(p).unwrap());
    assert!(near.is_finite() && near.norm() > 1e-8);
}

#[test]
fn wronskian_vanishes_at_half_period_values() {
    let ctx = ctx();
    let opts = MonodromyOptions::default();
    for k in 1..4 {
        let s = spectral_sample(Multiplicity::lame(1), &ctx, ctx.e_k(k), &opts).unwrap();
        assert!(s.w2.norm() < 1e-6, "k = {k}: {}", s.w2);
    }
}

/// `W^2 = wp'(a)^2 / 4` for `B = wp(a)`, so the samples lie on a cubic with
/// roots `e_k`.
#[test]
fn spectral_cubic() {
    let ctx = ctx();
    let opts = MonodromyOptions::default();
    let bs: Vec<C> = (0..7).map(|k| c(-1.5 + 0.5 * k as f64, 0.3 * (k as f64 - 3.0))).collect();
    let samples = spectral_samples(Multiplicity::lame(1), &ctx, &bs, &opts).unwrap();
    for s in &samples {
        assert!((s.w2 - s.w2_check).norm() < 1e-8 * (1.0 + s.w2.norm()));
    }
    let m = DMatrix::from_fn(7, 4, |i, j| bs[i].powu(j as u32));
    let rhs = DVector::from_iterator(7, samples.iter().map(|s| s.w2));
    let coef = m.svd(true, true).solve(&rhs, 1e-14).unwrap();
    let lead = coef[3];
    let fitted: Vec<C> = coef.iter().map(|x| x / lead).collect();
    let want = [-ctx.g3 / 4.0, -ctx.g2 / 4.0, c(0.0, 0.0), c(1.0, 0.0)];
    let scale = want.iter().map(|x| x.norm()).fold(1.0, f64::max);
    for (f, w) in fitted.iter().zip(&want) {
        assert!((f - w).norm() < 1e-6 * scale, "{fitted:?}");
    }
    assert!((lead - 1.0).norm() < 1e-6);
    for r in roots(&fitted) {
        assert!(ctx.e.iter().any(|e| (e - r).norm() < 1e-6), "{r}");
    }
}
