mod common;

use ahg_core::geometry::random_unitary;
use ahg_core::hermitian::{budget_at, budget_in_frame, classify_gray_hervella, hermitian_jets, lambda_contract};
use ahg_core::tensor::{max_abs_diff, valued_form_norm2};
use ahg_core::{Axis, LocalGeometry};
use common::{expr_chart, point, FrameSource};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn generic_structure_satisfies_nabla_f_decomposition() {
    for n in [2, 3] {
        let chart = FrameSource::generic(n, 0.2).chart("generic");
        for s in [0.4, 1.3, 2.9] {
            let b = budget_at(&chart, &point(2 * n, s)).unwrap();
            let scale = b.norms.nabla_f.sqrt();
            assert!(scale > 1e-2, "structure should be far from Kähler");
            let res = b.decomposition_residual();
            assert!(res < 1e-10 * scale.max(1.0), "n={n} residual {res} vs |∇F| {scale}");
            let budget = b.norm_budget_rhs();
            assert!((b.norms.nabla_f - budget).abs() < 1e-10 * budget, "{} vs {budget}", b.norms.nabla_f);
        }
    }
}

#[test]
fn lee_form_matches_trace_of_df() {
    for n in [2, 3] {
        let chart = FrameSource::generic(n, 0.2).chart("generic");
        let b = budget_at(&chart, &point(2 * n, 0.8)).unwrap();
        assert!(b.norms.alpha > 1e-4);
        assert!(max_abs_diff(&b.lambda_df(), &b.alpha) < 1e-11);
        assert!(max_abs_diff(&b.lambda_df_plus(), &b.alpha) < 1e-11);
        // (dF)₀⁺ is primitive
        assert!(lambda_contract(&b.df0_plus, n).iter().all(|x| x.abs() < 1e-11));
    }
}

#[test]
fn nijenhuis_parts() {
    let chart = FrameSource::generic(3, 0.25).chart("generic");
    let b = budget_at(&chart, &point(6, 1.7)).unwrap();
    assert!(b.norms.nijenhuis > 1e-4);
    assert!(b.nijenhuis_anti_linearity() < 1e-11);
    let dim = 6;
    for x in 0..dim {
        for y in 0..dim {
            for z in 0..dim {
                let k = |a: usize, b: usize, c: usize| a * 36 + b * 6 + c;
                let cyc = b.n0[k(x, y, z)] + b.n0[k(y, z, x)] + b.n0[k(z, x, y)];
                assert!(cyc.abs() < 1e-11);
                assert!((b.nijenhuis[k(x, y, z)] + b.nijenhuis[k(x, z, y)]).abs() < 1e-11);
            }
        }
    }
}

#[test]
fn surfaces_have_only_nijenhuis_and_lee_parts() {
    let chart = FrameSource::generic(2, 0.2).chart("generic");
    let b = budget_at(&chart, &point(4, 2.2)).unwrap();
    assert!(b.norms.df_minus < 1e-22);
    assert!(b.norms.df0_plus < 1e-22);
    assert!(b.norms.n0 > 1e-4);
    assert!((b.norms.n0 - b.norms.nijenhuis).abs() < 1e-11);
}

#[test]
fn norms_do_not_depend_on_unitary_frame() {
    let chart = FrameSource::generic(3, 0.2).chart("generic");
    let p = point(6, 0.6);
    let geo = LocalGeometry::at(&chart, &p, 2).unwrap();
    let h = hermitian_jets(&geo).unwrap();
    let frame = geo.adapted_frame().unwrap();
    let b0 = budget_in_frame(&geo, &h, &frame).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let rotated = frame.rotated(&random_unitary(3, &mut rng));
        assert!(rotated.gram_residual(&geo.g_values()) < 1e-12);
        let b = budget_in_frame(&geo, &h, &rotated).unwrap();
        let pairs = [
            (b0.norms.alpha, b.norms.alpha),
            (b0.norms.n0, b.norms.n0),
            (b0.norms.df_minus, b.norms.df_minus),
            (b0.norms.df0_plus, b.norms.df0_plus),
            (b0.norms.nabla_f, b.norms.nabla_f),
        ];
        for (a, c) in pairs {
            assert!((a - c).abs() < 1e-11 * a.max(1.0));
        }
        assert!(valued_form_norm2(&b.nabla_f, 2, 6) > 0.0);
    }
}

#[test]
fn conformally_flat_torus_is_locally_conformally_kahler() {
    let e = "exp(0.1*sin(x1))";
    let z = "0";
    let g = [e, z, z, z, z, e, z, z, z, z, e, z, z, z, z, e];
    let j = ["0", "0", "-1", "0", "0", "0", "0", "-1", "1", "0", "0", "0", "0", "1", "0", "0"];
    let chart = expr_chart("t4c", 2, vec![Axis::new(0.0, std::f64::consts::TAU, true); 4], &g, Some(&j));
    let flags = classify_gray_hervella(&chart, 8, 3, 1e-8).unwrap();
    assert_eq!(flags.label(), "W4");
    let p = [0.7, 0.1, 0.2, 0.3];
    let b = budget_at(&chart, &p).unwrap();
    // g = e^{2f}δ with f = 0.05 sin x1 gives |α|² = (n−1)²·4|df|²_g
    let df = 0.05 * 0.7f64.cos();
    let expect = 4.0 * df * df * (-0.1 * 0.7f64.sin()).exp();
    assert!((b.norms.alpha - expect).abs() < 1e-13, "{} vs {expect}", b.norms.alpha);
}
