use glame::backlund::{
    apply_word, apply_word_theta, base_point_image, expected_eigenvalues, find_word, fuchsian_coeffs, invariance_check,
    kappa_apply, local_eigenvalues, normal_form, sphere_monodromy, theta_of_n, trace_dictionary, word_for,
    BacklundError, ThetaVector,
};
use glame::hitchin::{family_state, SolutionTag};
use glame::monodromy::{canonical_rs, data_distance, monodromy_data, MonodromyOptions};
use glame::painleve::{from_pvi, to_pvi, PviState};
use glame::{EllipticContext, Mat2, MonodromyData, Multiplicity, TorusEquation, C};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn ctx() -> EllipticContext {
    EllipticContext::new(c(0.1, 1.1), 1e-13).unwrap()
}

const R: C = C::new(0.23, 0.05);
const S: C = C::new(0.31, -0.02);

/// PVI point of the Hitchin solution with data `(R, S)`.
fn hitchin_pvi(ctx: &EllipticContext) -> PviState {
    let st = family_state(ctx, &SolutionTag::rs(R, S).unwrap(), None).unwrap();
    to_pvi(ctx, Multiplicity::ZERO, st.p, st.a).unwrap()
}

fn entry_max(m: &Mat2) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[test]
fn parameter_vectors() {
    let t0 = theta_of_n(Multiplicity::ZERO);
    assert_eq!(t0, ThetaVector::from_real([-0.5, 0.5, 0.5, 0.5, 0.5]).unwrap());
    let t1 = theta_of_n(Multiplicity::new([1, 0, 0, 0]));
    assert_eq!(t1, ThetaVector::from_real([-1.0, 0.5, 0.5, 0.5, 1.5]).unwrap());
    assert!(find_word(&t0, &t0, 4).unwrap().is_empty());
    assert!(matches!(ThetaVector::from_real([0.0, 0.0, 0.0, 0.0, 0.0]), Err(BacklundError::Constraint(_))));
    assert!(matches!(find_word(&t0, &t1, 1), Err(BacklundError::WordNotFound { depth: 1 })));
}

#[test]
fn kappa4_and_kappa0_rows() {
    let ctx = ctx();
    let st = hitchin_pvi(&ctx);
    let th = ThetaVector::from_real([-0.45, 0.7, 0.2, 0.5, 0.5]).unwrap();
    let (th4, st4) = kappa_apply(4, &th, &st).unwrap();
    assert_eq!(th4.0[4], -th.0[4]);
    assert_eq!(th4.0[0], th.0[0] + th.0[4]);
    assert_eq!(st4, st);

    let t0 = theta_of_n(Multiplicity::ZERO);
    let (_, s0) = kappa_apply(0, &t0, &st).unwrap();
    assert!((s0.lambda - (st.lambda - 0.5 / st.mu)).norm() < 1e-14 * (1.0 + s0.lambda.norm()));
    assert_eq!(s0.mu, st.mu);
}

#[test]
fn cross_family_replay() {
    let ctx = ctx();
    let st = hitchin_pvi(&ctx);
    let (want_r, want_s) = canonical_rs(R, S);
    let target = MonodromyData::Cr { r: want_r, s: want_s };
    for n in [[1, 0, 0, 0], [0, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1]] {
        let n = Multiplicity::new(n);
        let word = word_for(n).unwrap();
        let (th, pv) = apply_word(&word, &theta_of_n(Multiplicity::ZERO), &st).unwrap();
        assert_eq!(th, theta_of_n(n));
        let (p, a) = from_pvi(&ctx, n, &pv, None).unwrap();
        let eq = TorusEquation::gle(n, p, a, &ctx).unwrap();
        let data = monodromy_data(&eq, &MonodromyOptions::default()).unwrap().0;
        assert!(data_distance(&data, &target) < 1e-6, "{n}: {data:?}");
    }
}

#[test]
fn fuchsian_local_structure() {
    let ctx = ctx();
    let st = hitchin_pvi(&ctx);
    let th = theta_of_n(Multiplicity::ZERO);
    let f = fuchsian_coeffs(&th, &st).unwrap();
    assert!(f.apparentness_residual() < 1e-8, "{}", f.apparentness_residual());

    let eps = C::from_polar(1e-6, 0.4);
    let res = f.p1(st.lambda + eps).unwrap() * eps;
    assert!((res + 1.0).norm() < 1e-4, "{res}");

    // at infinity f ~ x^-rho with rho(rho+1) - a rho + b = 0, roots theta0 and theta0 + theta4
    let x = C::from_polar(1e6, 0.3);
    let a = f.p1(x).unwrap() * x;
    let b = f.p2(x).unwrap() * x * x;
    let t = th.0;
    let (r1, r2) = (t[0], t[0] + t[4]);
    assert!((a - 1.0 - (r1 + r2)).norm() < 1e-4);
    assert!((b - r1 * r2).norm() < 1e-4);
}

#[test]
fn normal_form_local_monodromy() {
    let ctx = ctx();
    let st = hitchin_pvi(&ctx);
    let th = theta_of_n(Multiplicity::new([1, 0, 0, 0]));
    let st = apply_word(&word_for(Multiplicity::new([1, 0, 0, 0])).unwrap(), &theta_of_n(Multiplicity::ZERO), &st)
        .unwrap()
        .1;
    let nf = normal_form(&th, &st).unwrap();
    let pts = [c(0.0, 0.0), c(1.0, 0.0), st.t, st.lambda];
    let gap = |i: usize| {
        pts.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, q)| (q - pts[i]).norm()).fold(f64::INFINITY, f64::min)
    };
    for (i, theta) in [th.0[1], th.0[2], th.0[3]].into_iter().enumerate() {
        let (u, v) = local_eigenvalues(&nf, pts[i], gap(i) / 3.0, 1e-11).unwrap();
        let (x, y) = expected_eigenvalues(theta);
        let ok = ((u - x).norm() < 1e-7 && (v - y).norm() < 1e-7) || ((u - y).norm() < 1e-7 && (v - x).norm() < 1e-7);
        assert!(ok, "at {}: {u} {v} vs {x} {y}", pts[i]);
    }
    // exponents -1, 1 at lambda and no logarithm
    let (u, v) = local_eigenvalues(&nf, st.lambda, gap(3) / 3.0, 1e-11).unwrap();
    assert!((u - 1.0).norm() < 1e-7 && (v - 1.0).norm() < 1e-7);
}

#[test]
fn sphere_monodromy_is_unimodular_and_of_order_four() {
    let ctx = ctx();
    let st = hitchin_pvi(&ctx);
    let x0 = base_point_image(&ctx, None).unwrap();
    let sm = sphere_monodromy(&theta_of_n(Multiplicity::ZERO), &st, x0, 1e-11).unwrap();
    assert!(sm.det_defect() < 1e-8, "{}", sm.det_defect());
    assert!(sm.square_defect() < 1e-6, "{}", sm.square_defect());
    for m in &sm.m {
        assert!(entry_max(&(m * m + Mat2::identity())) < 1e-6);
    }
}

/// The invariants do not depend on where the loops are based.
#[test]
fn base_point_perturbation() {
    let ctx = ctx();
    let st = hitchin_pvi(&ctx);
    let th = theta_of_n(Multiplicity::ZERO);
    let x0 = base_point_image(&ctx, None).unwrap();
    let a = sphere_monodromy(&th, &st, x0, 1e-11).unwrap();
    for d in [c(0.05, 0.03), c(-0.04, 0.06)] {
        let b = sphere_monodromy(&th, &st, x0 + d, 1e-11).unwrap();
        for (u, v) in a.kappa.iter().zip(&b.kappa) {
            assert!((u - v).norm() < 1e-7, "{u} vs {v}");
        }
    }
}

#[test]
fn trace_dictionary_holds() {
    let ctx = ctx();
    let st = family_state(&ctx, &SolutionTag::rs(R, S).unwrap(), None).unwrap();
    let cases = [
        TorusEquation::gle(Multiplicity::ZERO, st.p, st.a, &ctx).unwrap(),
        TorusEquation::gle(Multiplicity::ZERO, c(0.21, 0.33), c(0.4, -0.2), &ctx).unwrap(),
        TorusEquation::gle(Multiplicity::new([1, 0, 0, 0]), c(0.21, 0.33), c(0.4, -0.2), &ctx).unwrap(),
        TorusEquation::gle(Multiplicity::new([0, 1, 0, 1]), c(0.17, 0.29), c(-0.3, 0.5), &ctx).unwrap(),
    ];
    for eq in &cases {
        let d = trace_dictionary(eq, &MonodromyOptions::default()).unwrap();
        assert!(d.max_error < 1e-6, "{} {}: {d:?}", eq.kind(), eq.n());
    }
}

#[test]
fn invariants_survive_backlund() {
    let ctx = ctx();
    let st = hitchin_pvi(&ctx);
    let th = theta_of_n(Multiplicity::ZERO);
    let x0 = base_point_image(&ctx, None).unwrap();
    assert_eq!(invariance_check(&[], &th, &st, x0, 1e-11).unwrap().max_delta, 0.0);
    let one = invariance_check(&[1], &th, &st, x0, 1e-11).unwrap();
    assert!(one.max_delta < 1e-6, "{}", one.max_delta);
    let word = word_for(Multiplicity::new([1, 0, 0, 0])).unwrap();
    let rep = invariance_check(&word, &th, &st, x0, 1e-11).unwrap();
    assert!(rep.max_delta < 1e-6, "{}", rep.max_delta);

    let mut rng = StdRng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 8 {
        let len = rng.random_range(1..5);
        let word: Vec<usize> = (0..len).map(|_| rng.random_range(0..5)).collect();
        match invariance_check(&word, &th, &st, x0, 1e-11) {
            Ok(rep) => {
                assert!(rep.max_delta < 1e-6, "{word:?}: {}", rep.max_delta);
                checked += 1;
            }
            Err(BacklundError::DenominatorVanishes { .. }) => {}
            Err(e) => panic!("{word:?}: {e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generators_are_involutions(
        j in 0usize..5,
        t in prop::array::uniform4(-8i32..8),
        lr in -2.0f64..2.0, li in -2.0f64..2.0, mr in -2.0f64..2.0, mi in -2.0f64..2.0,
    ) {
        // half-integral parameters are dyadic, so the theta action must be exact
        let t = t.map(|k| k as f64 / 2.0);
        let t0 = (1.0 - t.iter().sum::<f64>()) / 2.0;
        let th = ThetaVector::from_real([t0, t[0], t[1], t[2], t[3]]).unwrap();
        let st = PviState { lambda: c(lr, li), mu: c(mr, mi), t: c(0.3, 0.8) };
        prop_assume!(st.mu.norm() > 0.05 && st.lambda.norm() > 0.05);
        prop_assume!((st.lambda - 1.0).norm() > 0.05 && (st.lambda - st.t).norm() > 0.05);
        let once = kappa_apply(j, &th, &st);
        prop_assume!(once.is_ok());
        let (th1, st1) = once.unwrap();
        prop_assert!(th1.constraint_defect() < 1e-14);
        let (th2, st2) = kappa_apply(j, &th1, &st1).unwrap();
        prop_assert_eq!(th2, th);
        prop_assert!((st2.lambda - st.lambda).norm() < 1e-12 * (1.0 + st.lambda.norm()));
        prop_assert!((st2.mu - st.mu).norm() < 1e-12 * (1.0 + st.mu.norm()));
        prop_assert_eq!(st2.t, st.t);
    }

    #[test]
    fn words_act_on_parameters_only_through_theta(word in prop::collection::vec(0usize..5, 0..6)) {
        let t0 = theta_of_n(Multiplicity::ZERO);
        let th = apply_word_theta(&word, &t0);
        prop_assert!(th.constraint_defect() < 1e-14);
        let mut back = word.clone();
        back.reverse();
        prop_assert_eq!(apply_word_theta(&back, &th), t0);
    }
}
