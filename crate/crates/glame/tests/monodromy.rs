use std::f64::consts::PI;

use glame::ansatz::{rs_from_a, AnsatzData};
use glame::equation::apparent_b;
use glame::monodromy::{
    canonical_rs, classify, cycle_monodromy, data_distance, find_b_for_data, monodromy_data, tau0, ClassifyOptions,
    MonodromyOptions, ParamGrid,
};
use glame::transport::{loop_transport, loop_transport_ode, plan_cycle_paths, point_segment_distance};
use glame::{EllipticContext, Mat2, MonodromyData, Multiplicity, ProjectiveC, TorusEquation, C};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn entry_max(m: &Mat2) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn random_c(rng: &mut StdRng, r: f64) -> C {
    c(rng.random_range(-r..r), rng.random_range(-r..r))
}

fn random_n(rng: &mut StdRng, heun: bool) -> Multiplicity {
    loop {
        let n = Multiplicity::new([0, 0, 0, 0].map(|_: u32| rng.random_range(0..2u32)));
        if !heun || n.max() > 0 {
            return n;
        }
    }
}

/// Five Heun and five GLE instances at random `tau`.
fn instances() -> Vec<TorusEquation> {
    let mut rng = StdRng::seed_from_u64(7);
    let mut out = Vec::new();
    while out.len() < 10 {
        let tau = c(rng.random_range(-0.3..0.3), rng.random_range(0.8..1.4));
        let ctx = EllipticContext::new(tau, 1e-13).unwrap();
        let heun = out.len() < 5;
        let n = random_n(&mut rng, heun);
        let eq = if heun {
            TorusEquation::heun(n, random_c(&mut rng, 2.0), &ctx)
        } else {
            let p = ctx.lattice_point(rng.random_range(0.1..0.4), rng.random_range(0.1..0.4));
            TorusEquation::gle(n, p, random_c(&mut rng, 1.0), &ctx)
        };
        if let Ok(eq) = eq {
            out.push(eq);
        }
    }
    out
}

fn loop_radius(eq: &TorusEquation, at: C) -> f64 {
    let ctx = eq.ctx();
    let mut gap = f64::INFINITY;
    for q in eq.singular_points() {
        let d = ctx.lattice_distance(q - at);
        if d > 1e-9 {
            gap = gap.min(d);
        }
    }
    gap.min(0.5) / 3.0
}

#[test]
fn local_monodromy_is_plus_or_minus_identity() {
    for eq in instances() {
        let ctx = eq.ctx();
        let n = eq.n();
        for k in 0..4 {
            if n.get(k) == 0 {
                continue;
            }
            let h = ctx.half_period(k);
            let m = loop_transport(&eq, h, loop_radius(&eq, h), 1e-11).unwrap().m;
            assert!(entry_max(&(m - Mat2::identity())) < 1e-6, "{} at {h}: {m}", eq.kind());
        }
        if let TorusEquation::Gle { p, .. } = eq {
            for q in [p, -p] {
                let m = loop_transport(&eq, q, loop_radius(&eq, q), 1e-11).unwrap().m;
                assert!(entry_max(&(m + Mat2::identity())) < 1e-6, "at {q}: {m}");
            }
        }
        let regular = ctx.lattice_point(0.37, -0.29);
        if eq.singular_points().iter().all(|&q| ctx.lattice_distance(q - regular) > 0.1) {
            let m = loop_transport_ode(&eq, regular, 0.05, 1e-11).unwrap().m;
            assert!(entry_max(&(m - Mat2::identity())) < 1e-8);
        }
    }
}

#[test]
fn global_monodromy_commutes_and_is_unimodular() {
    let opts = MonodromyOptions::with_tol(1e-12);
    let moved = MonodromyOptions { q0: Some(c(-0.31, 0.47)), ..opts };
    for eq in instances() {
        let cm = cycle_monodromy(&eq, &opts).unwrap();
        assert!(cm.commutator_norm() < 1e-7, "{}", cm.commutator_norm());
        for n in &cm.n {
            assert!((n.determinant() - 1.0).norm() < 1e-8);
        }
        let a = monodromy_data(&eq, &opts).unwrap().0;
        let b = monodromy_data(&eq, &moved).unwrap().0;
        assert!(data_distance(&a, &b) < 1e-6, "{a:?} vs {b:?}");
    }
}

#[test]
fn straight_cycles_for_lame_at_i() {
    let ctx = EllipticContext::new(c(0.0, 1.0), 1e-13).unwrap();
    let eq = TorusEquation::heun(Multiplicity::lame(1), c(0.3, 0.0), &ctx).unwrap();
    let q0 = -(ctx.tau + 1.0) * 0.25;
    let plans = plan_cycle_paths(&eq, q0, 0.05).unwrap();
    assert_eq!(plans[0].vertices, vec![q0, q0 + 1.0]);
    assert_eq!(plans[1].vertices, vec![q0, q0 + ctx.tau]);
}

#[test]
fn gle_cycles_avoid_the_cut() {
    let ctx = EllipticContext::new(c(0.0, 1.0), 1e-13).unwrap();
    let p = ctx.lattice_point(0.31, 0.17);
    let eq = TorusEquation::gle(Multiplicity::ZERO, p, c(0.2, 0.1), &ctx).unwrap();
    let q0 = -(ctx.tau + 1.0) * 0.25;
    for plan in plan_cycle_paths(&eq, q0, 0.05).unwrap() {
        for w in plan.vertices.windows(2) {
            for m in -2..3 {
                for n in -2..3 {
                    let shift = ctx.lattice_point(m as f64, n as f64);
                    for q in [p + shift, -p + shift] {
                        assert!(point_segment_distance(q, w[0], w[1]).0 >= 0.049);
                    }
                }
            }
        }
    }
}

#[test]
fn gle_sign_flip_gives_same_b() {
    let ctx = EllipticContext::new(c(0.1, 1.1), 1e-13).unwrap();
    let n = Multiplicity::new([1, 0, 0, 1]);
    let (p, a) = (c(0.22, 0.31), c(-0.4, 0.7));
    let b = apparent_b(&ctx, n, p, a).unwrap();
    assert!((apparent_b(&ctx, n, -p, -a).unwrap() - b).norm() < 1e-10 * (1.0 + b.norm()));
    let b0 = apparent_b(&ctx, Multiplicity::ZERO, p, c(0.0, 0.0)).unwrap();
    assert!((b0 + 0.75 * ctx.wp_only(2.0 * p).unwrap()).norm() < 1e-10);
}

#[test]
fn potential_near_p_has_three_quarter_coefficient() {
    let ctx = EllipticContext::new(c(0.1, 1.1), 1e-13).unwrap();
    let p = c(0.22, 0.31);
    let eq = TorusEquation::gle(Multiplicity::new([1, 0, 0, 0]), p, c(0.3, 0.1), &ctx).unwrap();
    for q in [p, -p] {
        let d = C::from_polar(1e-5, 0.7);
        let lead = eq.potential(q + d).unwrap() * d * d;
        assert!((lead - 0.75).norm() < 1e-4, "{lead}");
    }
    let z = c(0.17, -0.41);
    let v = eq.potential(z).unwrap();
    assert!((eq.potential(z + ctx.tau).unwrap() - v).norm() < 1e-9 * (1.0 + v.norm()));
    assert!((eq.potential(z + 1.0).unwrap() - v).norm() < 1e-9 * (1.0 + v.norm()));
}

#[test]
fn classification_examples() {
    let o = ClassifyOptions::default();
    let w = (C::new(0.0, 2.0 * PI / 3.0)).exp();
    let z = c(0.0, 0.0);
    let n1 = Mat2::new(w.conj(), z, z, w);
    let n2 = Mat2::new(w, z, z, w.conj());
    let third = c(1.0 / 3.0, 0.0);
    let got = classify(&n1, &n2, &o).unwrap();
    assert!(data_distance(&got, &MonodromyData::Cr { r: third, s: third }) < 1e-12);

    let one = c(1.0, 0.0);
    let n1 = Mat2::new(one, z, one, one);
    let n2 = -Mat2::new(one, z, c(2.0, 0.0), one);
    match classify(&n1, &n2, &o).unwrap() {
        MonodromyData::Ncr { eps1: 1, eps2: -1, c: ProjectiveC::Finite(x) } => assert!((x - 2.0).norm() < 1e-12),
        other => panic!("{other:?}"),
    }
    let got = classify(&Mat2::identity(), &Mat2::new(one, z, one, one), &o).unwrap();
    assert!(matches!(got, MonodromyData::Ncr { eps1: 1, eps2: 1, c: ProjectiveC::Infinity(_) }));
}

#[test]
fn ncr_ratio_survives_conjugation() {
    let o = ClassifyOptions::default();
    let one = c(1.0, 0.0);
    let z = c(0.0, 0.0);
    let cc = c(0.7, -0.2);
    let n1 = -Mat2::new(one, z, one, one);
    let n2 = Mat2::new(one, z, cc, one);
    let p = Mat2::new(c(1.0, 0.3), c(0.2, -0.5), c(-0.7, 0.1), c(0.9, 0.4));
    let pi = p.try_inverse().unwrap();
    match classify(&(p * n1 * pi), &(p * n2 * pi), &o).unwrap() {
        MonodromyData::Ncr { eps1: -1, eps2: 1, c: ProjectiveC::Finite(x) } => assert!((x - cc).norm() < 1e-10),
        other => panic!("{other:?}"),
    }
}

#[test]
fn canonical_rs_examples() {
    let t = 1.0 / 3.0;
    let close = |(a, b): (C, C), (x, y): (f64, f64)| (a - x).norm() + (b - y).norm() < 1e-12;
    assert!(close(canonical_rs(c(t, 0.0), c(t, 0.0)), (t, t)));
    assert!(close(canonical_rs(c(-t, 0.0), c(-t, 0.0)), (t, t)));
    assert!(close(canonical_rs(c(7.0 / 3.0, 0.0), c(-2.0 / 3.0, 0.0)), (t, t)));
}

/// For `n = (1, 0, 0, 0)` and `B = wp(a)` the ansatz `sigma(z - a) e^{zeta(a) z} / sigma(z)`
/// solves the equation, which gives `(r, s)` independently of the transport.
#[test]
fn lame_one_against_the_ansatz() {
    let mut rng = StdRng::seed_from_u64(11);
    let ctx = EllipticContext::new(c(0.1, 1.1), 1e-13).unwrap();
    for _ in 0..6 {
        let a = ctx.lattice_point(rng.random_range(0.05..0.45), rng.random_range(0.05..0.45));
        let eq = TorusEquation::heun(Multiplicity::lame(1), ctx.wp_only(a).unwrap(), &ctx).unwrap();
        let data = AnsatzData { a: vec![a], c: ctx.zeta(a).unwrap() };
        let (r, s) = rs_from_a(&eq, &data);
        let (r, s) = canonical_rs(r, s);
        let got = monodromy_data(&eq, &MonodromyOptions::default()).unwrap().0;
        assert!(data_distance(&got, &MonodromyData::Cr { r, s }) < 1e-6, "{got:?} vs ({r}, {s})");
    }
}

#[test]
fn lame_one_at_half_periods() {
    let ctx = EllipticContext::new(c(0.0, 1.0), 1e-13).unwrap();
    let want = [(1, -1), (-1, 1), (-1, -1)];
    for k in 1..4 {
        let eq = TorusEquation::heun(Multiplicity::lame(1), ctx.e_k(k), &ctx).unwrap();
        let (data, cm) = monodromy_data(&eq, &MonodromyOptions::default()).unwrap();
        let (t1, t2) = cm.traces();
        assert!((t1 - 2.0 * want[k - 1].0 as f64).norm() < 1e-6);
        assert!((t2 - 2.0 * want[k - 1].1 as f64).norm() < 1e-6);
        match data {
            MonodromyData::Ncr { eps1, eps2, .. } => assert_eq!((eps1, eps2), want[k - 1]),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn lame_one_at_tau0_has_thirds() {
    let ctx = EllipticContext::new(tau0(), 1e-13).unwrap();
    let eq = TorusEquation::heun(Multiplicity::lame(1), c(0.0, 0.0), &ctx).unwrap();
    let (t1, t2) = cycle_monodromy(&eq, &MonodromyOptions::default()).unwrap().traces();
    assert!((t1 + 1.0).norm() < 1e-7 && (t2 + 1.0).norm() < 1e-7);
}

#[test]
fn b_search_is_unique_at_generic_tau() {
    let ctx = EllipticContext::new(c(0.1, 1.1), 1e-13).unwrap();
    let third = c(1.0 / 3.0, 0.0);
    let target = MonodromyData::Cr { r: third, s: third };
    let grid = ParamGrid::new(c(0.0, 0.0), 4.0, 13);
    let hits = find_b_for_data(Multiplicity::lame(1), &ctx, &target, &grid, 1e-5, &MonodromyOptions::default()).unwrap();
    assert!(hits.len() <= 1, "{hits:?}");
    for h in &hits {
        assert!(data_distance(&h.data, &target) < 1e-5);
    }
}
