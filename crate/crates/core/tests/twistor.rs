use ahg_core::curvature::PointCurvature;
use ahg_core::hermitian::classify_gray_hervella;
use ahg_core::tensor;
use ahg_core::twistor::*;
use ahg_core::{catalog, GeomError};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BASES: [&str; 3] = ["t4_flat_base", "s4_round", "h4_hyperbolic"];
const SIGNS: [TwistorSign; 2] = [TwistorSign::Plus, TwistorSign::Minus];

fn spec(base: &str, sign: TwistorSign, t: f64) -> TwistorSpec {
    TwistorSpec::from_catalog(base, sign, t).unwrap()
}

fn points(spec: &TwistorSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let chart = build_twistor_chart(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| chart.domain.sample(&mut rng)).collect()
}

fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol * 1f64.max(b.abs()), "{a} vs {b}");
}

#[test]
fn closed_form_examples() {
    let flat = closed_form_scalars(0.0, 1.0).unwrap();
    assert_close(flat.s, 2.0, 1e-15);
    assert_close(flat.s_j_minus, 2.0, 1e-15);
    assert_close(flat.chern_plus, 2.0, 1e-15);
    assert_eq!(flat.chern_minus, 0.0);
    let sphere = closed_form_scalars(12.0, 1.0).unwrap();
    assert_close(sphere.s, 12.0, 1e-15);
    assert_close(sphere.s_j_plus, 12.0, 1e-15);
    assert_close(sphere.s_j_minus, 4.0, 1e-15);
    assert_close(sphere.chern_plus, 6.0, 1e-15);
    assert_close(closed_form_scalars(-12.0, 1.0).unwrap().chern_plus, -2.0, 1e-15);
    assert!(closed_form_scalars(-12.0, 0.5).unwrap().chern_plus > 0.0);
    for t in [0.0, -1.0, f64::NAN] {
        assert!(matches!(closed_form_scalars(1.0, t), Err(GeomError::InvalidParameter(_))));
    }
}

proptest! {
    #[test]
    fn hyperbolic_scalar_changes_sign_at_the_quadratic_root(t in 0.05f64..3.0) {
        let s = closed_form_scalars(-12.0, t).unwrap().s;
        let u = t * t;
        // s = −12 + 2/u − 2u = −2(u² + 6u − 1)/u
        prop_assert!((s + 2.0 * (u * u + 6.0 * u - 1.0) / u).abs() <= 1e-12 * (1.0 + s.abs()));
        let root = -3.0 + 10f64.sqrt();
        if (u - root).abs() > 1e-9 {
            prop_assert_eq!(s > 0.0, u < root);
        }
    }
}

#[test]
fn flags_and_labels() {
    for base in BASES {
        let s = spec(base, TwistorSign::Plus, 1.0);
        assert!(s.einstein && s.asd, "{base}");
    }
    assert_close(spec("s4_round", TwistorSign::Plus, 1.0).s_n, 12.0, 1e-10);
    assert_close(spec("h4_hyperbolic", TwistorSign::Plus, 1.0).s_n, -12.0, 1e-10);
    assert!(spec("t4_flat_base", TwistorSign::Plus, 1.0).s_n.abs() < 1e-12);
    // conformally flat, hence anti-self-dual, but not Einstein
    let perturbed = spec("t4_perturbed", TwistorSign::Minus, 1.0);
    assert!(perturbed.asd && !perturbed.einstein);
    assert_eq!(spec("s4_round", TwistorSign::Minus, 0.5).label(), "twistor:s4_round:-:t=0.5");
    assert_eq!("+".parse::<TwistorSign>().unwrap(), TwistorSign::Plus);
    assert_eq!("-".parse::<TwistorSign>().unwrap(), TwistorSign::Minus);
    assert!("x".parse::<TwistorSign>().is_err());
}

#[test]
fn invalid_inputs() {
    assert!(matches!(
        TwistorSpec::from_catalog("s6_nearly_kahler", TwistorSign::Plus, 1.0),
        Err(GeomError::InvalidBase(_))
    ));
    assert!(matches!(TwistorSpec::from_catalog("s4_round", TwistorSign::Plus, 0.0), Err(GeomError::InvalidParameter(_))));
    let s = spec("s4_round", TwistorSign::Plus, 1.0);
    let pole = [0.1, 0.2, 0.0, 0.0, 1e5, 0.0];
    assert!(matches!(TwistorCoframe::at(&s, &pole, 2), Err(GeomError::FiberPole(_))));
    assert!(matches!(structure_equation_residual(&s, &pole), Err(GeomError::FiberPole(_))));
    let nonein = spec("t4_perturbed", TwistorSign::Plus, 1.0);
    let chart = build_twistor_chart(&nonein).unwrap();
    let p = points(&nonein, 1, 3).remove(0);
    assert!(matches!(scalar_oracle_residuals(&nonein, &chart, &p), Err(GeomError::NotApplicable { .. })));
    // the generic Chern-Ricci form is still produced, only the Einstein reduction is skipped
    let cr = chern_ricci_forms(&nonein, &chart, &p).unwrap();
    assert!(cr.einstein.is_none() && cr.curvature_split.is_some());
    assert!(matches!(canonical_form_check(&nonein, &p), Err(GeomError::NotApplicable { .. })));
}

#[test]
fn emitted_chart_is_a_valid_almost_hermitian_chart() {
    for base in BASES {
        for sign in SIGNS {
            let s = spec(base, sign, 0.7);
            let chart = build_twistor_chart(&s).unwrap();
            assert_eq!(chart.dim(), 6);
            for p in points(&s, 5, 11) {
                let report = chart.check_invariants(&p).unwrap();
                assert!(report.holds(1e-12), "{base} {sign} {report:?}");
                for r in coframe_checks(&s, &p).unwrap() {
                    assert!(r.abs_residual <= 1e-9, "{r:?}");
                }
            }
        }
    }
}

#[test]
fn vertical_block_has_scale_two_t_squared() {
    for t in [0.5, 1.0, 2.0] {
        let s = spec("s4_round", TwistorSign::Plus, t);
        let fr = TwistorCoframe::at(&s, &[0.3, -0.1, 0.2, 0.4, 0.0, 0.0], 1).unwrap();
        let g = tensor::values(&fr.metric());
        for (i, j) in [(4, 4), (5, 5)] {
            assert_close(g[i * 6 + j], 4.0 * t * t, 1e-13);
        }
        assert!(g[4 * 6 + 5].abs() < 1e-13);
    }
}

#[test]
fn flat_base_scalar_is_two_over_t_squared() {
    for t in [0.5, 1.0, 2.0] {
        let s = spec("t4_flat_base", TwistorSign::Plus, t);
        let chart = build_twistor_chart(&s).unwrap();
        for p in points(&s, 10, 5) {
            let pc = PointCurvature::at(&chart, &p, 2).unwrap();
            assert_close(pc.scalar(), 2.0 / (t * t), 1e-10);
        }
    }
}

#[test]
fn round_sphere_spot_values() {
    let plus = spec("s4_round", TwistorSign::Plus, 1.0);
    let minus = spec("s4_round", TwistorSign::Minus, 1.0);
    let p = [0.4, -0.7, 0.2, 1.1, 0.6, -1.3];
    let pc_plus = PointCurvature::at(&build_twistor_chart(&plus).unwrap(), &p, 2).unwrap();
    let pc_minus = PointCurvature::at(&build_twistor_chart(&minus).unwrap(), &p, 2).unwrap();
    assert_close(pc_plus.scalar(), 12.0, 1e-10);
    assert_close(pc_plus.j_scalar(), 12.0, 1e-10);
    assert_close(pc_plus.chern_scalars().0, 6.0, 1e-10);
    assert_close(pc_minus.j_scalar(), 4.0, 1e-10);
    assert!(pc_minus.chern_scalars().0.abs() < 1e-10);
}

#[test]
fn closed_forms_match_generic_pipeline() {
    for base in BASES {
        for sign in SIGNS {
            for t in [0.5, 1.0, 2.0] {
                let s = spec(base, sign, t);
                let chart = build_twistor_chart(&s).unwrap();
                for p in points(&s, 3, 17) {
                    for r in scalar_oracle_residuals(&s, &chart, &p).unwrap() {
                        assert!(r.rel_residual <= 1e-6, "{base} {sign} t={t} {r:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn structure_equations_and_constant_curvature() {
    for (base, k) in [("t4_flat_base", 0.0), ("s4_round", 1.0), ("h4_hyperbolic", -1.0)] {
        let s = spec(base, TwistorSign::Plus, 1.0);
        for p in points(&s, 4, 23) {
            for r in structure_equation_residual(&s, &p).unwrap() {
                assert!(r.abs_residual <= 1e-8, "{base} {r:?}");
            }
            let fr = TwistorCoframe::at(&s, &p, 2).unwrap();
            let r = tensor::values(&fr.curvature);
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        for d in 0..4 {
                            let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                            let want = k * (delta(a, c) * delta(b, d) - delta(a, d) * delta(b, c));
                            let got = r[((a * 4 + b) * 4 + c) * 4 + d];
                            assert!((got - want).abs() <= 1e-10, "{base} R{a}{b}{c}{d} = {got}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn base_frame_curvature_feeds_the_asd_combinations() {
    let base = catalog::load("s4_round").unwrap().chart;
    let r = base_frame_curvature(&base, &[0.3, 0.1, -0.5, 0.8]).unwrap();
    assert!(tensor::sup_norm(&asd_combinations(&r)) < 1e-12);
    assert!(tensor::sup_norm(&self_dual_weyl(&r)) < 1e-12);
    let block = lambda_plus_block(&r);
    for i in 0..3 {
        assert_close(block[i * 4], 1.0, 1e-12);
    }
}

#[test]
fn levi_civita_forms_solve_the_structure_equations() {
    for base in BASES {
        for t in [0.5, 2.0] {
            let s = spec(base, TwistorSign::Plus, t);
            for p in points(&s, 3, 29) {
                let lc = levi_civita_forms(&s, &p).unwrap();
                assert!(lc.structure <= 1e-7, "{base} {}", lc.structure);
                assert!(lc.antisymmetry <= 1e-10, "{base} {}", lc.antisymmetry);
                let want = closed_form_scalars(s.s_n, t).unwrap().s;
                assert_close(lc.scalar, want, 1e-9);
            }
        }
    }
    let s = spec("s4_round", TwistorSign::Plus, 1.0);
    assert_close(levi_civita_forms(&s, &[0.2, 0.1, -0.3, 0.5, 0.4, 0.9]).unwrap().scalar, 12.0, 1e-10);
}

#[test]
fn flat_base_levi_civita_forms_reduce_to_the_base_connection() {
    let s = spec("t4_flat_base", TwistorSign::Plus, 1.3);
    let p = [0.5, 1.0, 2.0, 3.0, -0.8, 0.6];
    let fr = TwistorCoframe::at(&s, &p, 3).unwrap();
    let lc = fr.levi_civita_forms().unwrap();
    for b in 0..4 {
        for fiber in [4, 5] {
            assert!(tensor::sup_norm(&tensor::values(&lc[fiber * 6 + b])) < 1e-14);
        }
        for a in 0..4 {
            let base = tensor::values(&fr.omega[a * 4 + b]);
            assert!(tensor::max_abs_diff(&tensor::values(&lc[a * 6 + b]), &base) < 1e-14);
        }
    }
}

#[test]
fn chern_ricci_form_routes_agree() {
    for base in BASES {
        for sign in SIGNS {
            let s = spec(base, sign, 1.0);
            let chart = build_twistor_chart(&s).unwrap();
            for p in points(&s, 3, 31) {
                let cr = chern_ricci_forms(&s, &chart, &p).unwrap();
                assert!(cr.route_residual() <= 1e-7, "{base} {sign} {}", cr.route_residual());
                if sign == TwistorSign::Minus {
                    assert!(tensor::sup_norm(&cr.generic) <= 1e-7);
                    assert!(cr.curvature_split.is_none());
                } else {
                    assert!(cr.einstein.is_some());
                    assert_close(cr.pairing, closed_form_scalars(s.s_n, 1.0).unwrap().chern_plus, 1e-9);
                }
            }
        }
    }
    let flat = spec("t4_flat_base", TwistorSign::Plus, 1.0);
    let p = [1.0, 2.0, 3.0, 4.0, 0.1, 0.2];
    assert_close(chern_ricci_forms(&flat, &build_twistor_chart(&flat).unwrap(), &p).unwrap().pairing, 2.0, 1e-12);
}

#[test]
fn canonical_form_is_dbar_closed() {
    for base in BASES {
        let s = spec(base, TwistorSign::Minus, 0.8);
        for p in points(&s, 4, 37) {
            let c = canonical_form_check(&s, &p).unwrap();
            assert!(c.type_31 <= 1e-7, "{base} {c:?}");
            assert!(c.rhs_residual.unwrap() <= 1e-7, "{base} {c:?}");
            assert!(c.norm > 0.1);
        }
    }
    let plus = spec("s4_round", TwistorSign::Plus, 1.0);
    assert!(matches!(canonical_form_check(&plus, &[0.0; 6]), Err(GeomError::NotApplicable { .. })));
}

#[test]
fn lee_form_and_integrability() {
    for base in BASES {
        for sign in SIGNS {
            let s = spec(base, sign, 1.0);
            let chart = build_twistor_chart(&s).unwrap();
            for p in points(&s, 3, 41) {
                let c = lee_and_integrability_check(&chart, &p).unwrap();
                assert!(c.lee <= 1e-8 && c.f_wedge_df <= 1e-8, "{base} {sign} {c:?}");
                match sign {
                    TwistorSign::Plus => assert!(c.nijenhuis <= 1e-8, "{base} {c:?}"),
                    TwistorSign::Minus => assert!(c.nijenhuis > 0.1, "{base} {c:?}"),
                }
            }
        }
    }
}

#[test]
fn gray_hervella_placement() {
    for (base, t) in [("s4_round", 0.5), ("h4_hyperbolic", 0.7), ("t4_flat_base", 1.0)] {
        let plus = build_twistor_chart(&spec(base, TwistorSign::Plus, t)).unwrap();
        let flags = classify_gray_hervella(&plus, 6, 42, 1e-8).unwrap();
        assert_eq!(flags.label(), "W3", "{base} {flags}");
        let minus = build_twistor_chart(&spec(base, TwistorSign::Minus, t)).unwrap();
        let flags = classify_gray_hervella(&minus, 6, 42, 1e-8).unwrap();
        assert!(flags.sup_df_minus > 1e-2 && flags.sup_alpha <= 1e-8, "{base} {flags}");
    }
}

#[test]
fn sphere_twistor_at_unit_scale_is_fubini_study() {
    // s_N t² = 12 makes (g_t, 𝕁₊) Kähler
    let plus = build_twistor_chart(&spec("s4_round", TwistorSign::Plus, 1.0)).unwrap();
    assert!(classify_gray_hervella(&plus, 6, 42, 1e-8).unwrap().is_kahler());
}

#[test]
fn eells_salamon_special_scales() {
    // s_N t² = 6 gives a nearly Kähler structure, s_N t² = −12 an almost Kähler one
    let nearly = build_twistor_chart(&spec("s4_round", TwistorSign::Minus, 0.5f64.sqrt())).unwrap();
    let flags = classify_gray_hervella(&nearly, 6, 42, 1e-8).unwrap();
    assert_eq!(flags.label(), "W1", "{flags}");
    let almost = build_twistor_chart(&spec("h4_hyperbolic", TwistorSign::Minus, 1.0)).unwrap();
    let flags = classify_gray_hervella(&almost, 6, 42, 1e-8).unwrap();
    assert_eq!(flags.label(), "W2", "{flags}");
}

#[test]
fn gauge_rotation_leaves_invariants_unchanged() {
    let gauge = Gauge { angle: 0.7, right: [0.3, -0.5, 0.2, 0.6] };
    for sign in SIGNS {
        let plain = spec("h4_hyperbolic", sign, 0.9);
        let rotated = plain.clone().with_gauge(gauge);
        let p = [0.1, -0.2, 0.3, 0.05, 0.7, -0.4];
        let a = PointCurvature::at(&build_twistor_chart(&plain).unwrap(), &p, 2).unwrap();
        let b = PointCurvature::at(&build_twistor_chart(&rotated).unwrap(), &p, 2).unwrap();
        assert_close(b.scalar(), a.scalar(), 1e-10);
        assert_close(b.j_scalar(), a.j_scalar(), 1e-10);
        assert!((b.chern_scalars().0 - a.chern_scalars().0).abs() < 1e-10);
        let lc = levi_civita_forms(&rotated, &p).unwrap();
        assert!(lc.structure <= 1e-7);
        if sign == TwistorSign::Minus {
            assert!(canonical_form_check(&rotated, &p).unwrap().type_31 <= 1e-7);
        }
    }
}

#[test]
fn phi_forms_rebuild_the_fundamental_form() {
    let s = spec("s4_round", TwistorSign::Minus, 1.5);
    let fr = TwistorCoframe::at(&s, &[0.2, 0.4, -0.1, 0.3, -0.5, 1.2], 1).unwrap();
    // F = Σ Re φ^k ∧ Im φ^k with the fiber term weighted by ±(2t)²
    let mut f = vec![0.0; 36];
    for (k, w) in [(1, 1.0), (2, 1.0), (3, -4.0 * 1.5 * 1.5)] {
        let (re, im) = fr.phi(k);
        let wedge = tensor::wedge(&tensor::values(&re), 1, &tensor::values(&im), 1, 6);
        for (x, y) in f.iter_mut().zip(wedge) {
            *x += w * y;
        }
    }
    assert!(tensor::max_abs_diff(&f, &tensor::values(&fr.fundamental_form())) < 1e-13);
}
