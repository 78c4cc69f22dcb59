use glame::ansatz::{ode_residual, AnsatzData};
use glame::generators::{addition_map, ansatz_parameters, deg_sigma, fiber_witness, z_np, FiberOptions, GeneratorError};
use glame::hitchin::{family_state, SolutionTag, Z_rs};
use glame::{EllipticContext, Multiplicity, TorusEquation, C};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn ctx() -> EllipticContext {
    EllipticContext::new(c(0.1, 1.1), 1e-13).unwrap()
}

#[test]
fn degrees() {
    assert_eq!(deg_sigma(Multiplicity::ZERO), 1);
    assert_eq!(deg_sigma(Multiplicity::new([1, 0, 0, 0])), 3);
}

/// On the Hitchin solution with data `(r, s)` the single zero is `r + s tau`
/// and the generator equals `Z_{r,s}`.
#[test]
fn hitchin_point_gives_zrs() {
    let ctx = ctx();
    let (r, s) = (c(0.23, 0.0), c(0.31, 0.0));
    let st = family_state(&ctx, &SolutionTag::rs(r, s).unwrap(), None).unwrap();
    let a = r + s * ctx.tau;
    let z = z_np(&ctx, Multiplicity::ZERO, st.p, &[a]).unwrap();
    let want = Z_rs(&ctx, r, s).unwrap();
    assert!((z - want).norm() < 1e-9 * (1.0 + want.norm()), "{z} vs {want}");
    assert!((addition_map(&ctx, Multiplicity::ZERO, &[a]) - ctx.reduce(a).0).norm() < 1e-12);
}

#[test]
fn ansatz_parameters_solve_the_gle() {
    let ctx = ctx();
    let n = Multiplicity::new([1, 0, 0, 0]);
    let p = c(0.21, 0.33);
    let w = fiber_witness(&ctx, n, p, c(0.27, 0.41), &FiberOptions::default()).unwrap();
    for pt in &w.points {
        let (big_a, cc) = ansatz_parameters(&ctx, n, p, &pt.a).unwrap();
        assert!((big_a - pt.a_param).norm() < 1e-8 * (1.0 + big_a.norm()));
        let eq = TorusEquation::gle(n, p, big_a, &ctx).unwrap();
        let data = AnsatzData { a: pt.a.clone(), c: cc };
        assert!(ode_residual(&eq, &data, c(0.13, -0.37)).unwrap() < 1e-8);
        assert!(ctx.lattice_distance(pt.sigma - c(0.27, 0.41)) < 1e-8);
        if let Some(m) = pt.monodromy_sigma {
            let d = ctx.lattice_distance(m - pt.sigma).min(ctx.lattice_distance(m + pt.sigma));
            // Transport loses digits when |A| is large.
            let tol = if pt.a_param.norm() < 5.0 { 1e-8 } else { 1e-3 };
            assert!(d < tol, "{m} vs {}", pt.sigma);
        }
    }
}

#[test]
fn fiber_has_full_degree_and_separates() {
    let ctx = ctx();
    let n = Multiplicity::new([1, 0, 0, 0]);
    let w = fiber_witness(&ctx, n, c(0.21, 0.33), c(0.27, 0.41), &FiberOptions::default()).unwrap();
    assert_eq!(w.degree, 3);
    assert_eq!(w.points.len(), 3, "{w:?}");
    assert!(w.distinct());
    assert!(matches!(
        fiber_witness(&ctx, n, c(0.21, 0.33), c(0.5, 0.0), &FiberOptions::default()),
        Err(GeneratorError::TorsionTarget(_))
    ));
    assert!(matches!(
        fiber_witness(&ctx, Multiplicity::ZERO, c(0.21, 0.33), c(0.27, 0.41), &FiberOptions::default()),
        Err(GeneratorError::Arity { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn z_is_periodic_and_odd(s1 in -0.5f64..0.5, t1 in -0.5f64..0.5, s2 in -0.5f64..0.5, t2 in -0.5f64..0.5) {
        let ctx = ctx();
        let n = Multiplicity::new([1, 0, 0, 0]);
        let p = c(0.21, 0.33);
        let a = [ctx.lattice_point(s1, t1), ctx.lattice_point(s2, t2)];
        let sig = a[0] + a[1];
        prop_assume!(ctx.lattice_distance(sig) > 0.05);
        prop_assume!(a.iter().all(|&x| ctx.lattice_distance(x - p) > 0.05 && ctx.lattice_distance(x + p) > 0.05));
        let z = z_np(&ctx, n, p, &a).unwrap();
        let scale = 1.0 + z.norm();
        let shifted = z_np(&ctx, n, p, &[a[0] + 1.0, a[1]]).unwrap();
        prop_assert!((shifted - z).norm() < 1e-9 * scale);
        let shifted = z_np(&ctx, n, p, &[a[0], a[1] - ctx.tau]).unwrap();
        prop_assert!((shifted - z).norm() < 1e-9 * scale);
        let neg = z_np(&ctx, n, p, &[-a[0], -a[1]]).unwrap();
        prop_assert!((neg + z).norm() < 1e-9 * scale);
        let sum = addition_map(&ctx, n, &a) + addition_map(&ctx, n, &[-a[0], -a[1]]);
        prop_assert!(ctx.lattice_distance(sum) < 1e-12);
    }
}
