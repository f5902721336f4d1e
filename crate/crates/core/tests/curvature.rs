use std::f64::consts::PI;

use ahg_core::catalog::{load, CATALOG_NAMES};
use ahg_core::curvature::*;
use ahg_core::geometry::random_unitary;
use ahg_core::hermitian::hermitian_jets;
use ahg_core::tensor::{max_abs_diff, sup_norm, values};
use ahg_core::{GeomError, LocalGeometry};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn points(name: &str, count: usize, seed: u64) -> (ahg_core::catalog::CatalogEntry, Vec<Vec<f64>>) {
    let e = load(name).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..count).map(|_| e.chart.domain.sample(&mut rng)).collect();
    (e, pts)
}

#[test]
fn constant_curvature_scalars() {
    for (name, s_expect) in [("s4_round", 12.0), ("h4_hyperbolic", -12.0), ("t4_kahler", 0.0)] {
        let (e, pts) = points(name, 5, 1);
        for p in pts {
            let (ric, s) = ricci_and_scalar(&e.chart, &p).unwrap();
            assert!((s - s_expect).abs() < 1e-9, "{name}: {s}");
            for a in 0..4 {
                for b in 0..4 {
                    assert!((ric.get(&[a, b]) - ric.get(&[b, a])).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn j_scalar_two_routes_agree() {
    for name in CATALOG_NAMES {
        let (e, pts) = points(name, 5, 2);
        for p in pts {
            let js = j_scalar(&e.chart, &p).unwrap();
            assert!(js.cross_residual() < 1e-9 * js.s.abs().max(1.0), "{name}: {js:?}");
        }
    }
    let e = load("hopf_surface").unwrap();
    let js = j_scalar(&e.chart, &e.witness).unwrap();
    assert!((js.s - js.s_j).abs() > 1.0);
}

#[test]
fn scalars_do_not_depend_on_adapted_frame() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for name in ["hopf_surface", "s6_nearly_kahler", "kodaira_thurston", "iwasawa"] {
        let e = load(name).unwrap();
        let geo = LocalGeometry::at(&e.chart, &e.witness, 2).unwrap();
        let frame = geo.adapted_frame().unwrap();
        let base = PointCurvature::with_frame(geo.clone(), frame.clone()).unwrap();
        let n = geo.n();
        for _ in 0..2 {
            let other = PointCurvature::with_frame(geo.clone(), frame.rotated(&random_unitary(n, &mut rng))).unwrap();
            let a = [base.scalar(), base.j_scalar(), base.chern_scalars().0, base.chern_scalars().1];
            let b = [other.scalar(), other.j_scalar(), other.chern_scalars().0, other.chern_scalars().1];
            assert!(max_abs_diff(&a, &b) < 1e-9, "{name}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn chern_connection_defining_properties() {
    for name in CATALOG_NAMES {
        let (e, pts) = points(name, 20, 3);
        for p in pts {
            let c = chern_connection(&e.chart, &p).unwrap();
            assert!(c.dj_residual < 1e-8 && c.dg_residual < 1e-8 && c.torsion11_residual < 1e-8, "{name}: {c:?}");
        }
    }
    let flat = load("t4_kahler").unwrap();
    let c = chern_connection(&flat.chart, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    assert_eq!(sup_norm(&c.difference), 0.0);
    let hopf = load("hopf_surface").unwrap();
    let c = chern_connection(&hopf.chart, &hopf.witness).unwrap();
    assert!(sup_norm(&c.difference) > 0.1);
}

#[test]
fn lichnerowicz_connection_is_hermitian() {
    for name in ["s6_nearly_kahler", "kodaira_thurston", "hopf_surface"] {
        let e = load(name).unwrap();
        let geo = LocalGeometry::at(&e.chart, &e.witness, 2).unwrap();
        let h = hermitian_jets(&geo).unwrap();
        let c = lichnerowicz_connection_jets(&geo, &h).unwrap();
        let [dj, dg, _] = hermitian_connection_defects(&geo, &c).unwrap();
        assert!(dj < 1e-9 && dg < 1e-9, "{name}: {dj} {dg}");
    }
}

#[test]
fn hopf_chern_scalar_is_constant() {
    let (e, pts) = points("hopf_surface", 10, 6);
    let values: Vec<f64> = pts.iter().map(|p| chern_scalars(&e.chart, p).unwrap().s1).collect();
    for v in &values {
        assert!((v - values[0]).abs() < 1e-8);
    }
    assert!(values[0] > 0.0);
}

#[test]
fn chern_ricci_form_routes_and_closedness() {
    for name in ["hopf_surface", "s6_nearly_kahler", "kodaira_thurston", "iwasawa", "t4_perturbed", "s4_round"] {
        let e = load(name).unwrap();
        let pc = PointCurvature::at(&e.chart, &e.witness, 3).unwrap();
        let rho = values(&pc.chern_ricci_form().unwrap());
        let rho_u = pc.chern_ricci_form_unitary();
        assert!(max_abs_diff(&rho, &rho_u) < 1e-9, "{name}");
        // ⟨ρ, F⟩ = S₁ with coordinate inner product
        let dim = pc.dim();
        let ginv = pc.geo.ginv_values();
        let f = values(&pc.herm.f);
        let mut pair = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        pair += 0.5 * rho[i * dim + j] * f[k * dim + l] * ginv[i * dim + k] * ginv[j * dim + l];
                    }
                }
            }
        }
        let s1 = pc.chern_scalars().0;
        assert!((pair - s1).abs() < 1e-9 * s1.abs().max(1.0), "{name}: {pair} vs {s1}");
        let d_rho = chern_scalars(&e.chart, &e.witness).unwrap().d_rho.unwrap();
        assert!(d_rho < 1e-7, "{name}: |dρ| = {d_rho}");
    }
}

#[test]
fn holomorphic_sectional_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (name, expect) in [("s4_round", Some(1.0)), ("s6_nearly_kahler", Some(1.0)), ("h4_hyperbolic", Some(-1.0)), ("hopf_surface", None)] {
        let e = load(name).unwrap();
        let n = e.chart.n;
        let pc = PointCurvature::at(&e.chart, &e.witness, 2).unwrap();
        for _ in 0..5 {
            let u = random_unitary(n, &mut rng);
            let xi: Vec<Complex64> = (0..n).map(|i| u[i * n] * 1.7).collect();
            let h = pc.hol_sect_curv(&xi).unwrap();
            let c = Complex64::new(0.3, -2.1);
            let scaled: Vec<Complex64> = xi.iter().map(|z| z * c).collect();
            assert!((pc.hol_sect_curv(&scaled).unwrap() - h).abs() < 1e-10);
            if let Some(v) = expect {
                assert!((h - v).abs() < 1e-9, "{name}: {h}");
            }
        }
    }
    let flat = load("t4_kahler").unwrap();
    assert_eq!(hol_sect_curv(&flat.chart, &flat.witness, &[Complex64::new(1.0, 0.0); 2]).unwrap(), 0.0);
    assert!(matches!(hol_sect_curv(&flat.chart, &flat.witness, &[Complex64::new(0.0, 0.0); 2]), Err(GeomError::ZeroVector)));
}

#[test]
fn berger_average_matches_closed_form() {
    let flat = load("t4_kahler").unwrap();
    let b = berger_average(&flat.chart, &flat.witness, 100, 1).unwrap();
    assert_eq!((b.lhs, b.rhs), (0.0, 0.0));
    // round S⁴: H ≡ 1, so the average is the sphere volume 2π²
    let s4 = load("s4_round").unwrap();
    let b = berger_average(&s4.chart, &s4.witness, 1000, 1).unwrap();
    assert!((b.rhs - 2.0 * PI * PI).abs() < 1e-9 && (b.lhs - b.rhs).abs() < 1e-9);
    let hopf = load("hopf_surface").unwrap();
    let b = berger_average(&hopf.chart, &hopf.witness, 100_000, 42).unwrap();
    assert!(b.within(3.0), "{b:?}");
    assert!(b.std_error > 0.0);
    assert!((sphere_volume(3) - PI.powi(3)).abs() < 1e-12);
}

#[test]
fn identity_registry_on_catalog() {
    for name in CATALOG_NAMES {
        let (e, pts) = points(name, 10, 12);
        for p in pts {
            let pc = PointCurvature::at(&e.chart, &p, 2).unwrap();
            for id in IDENTITY_IDS {
                match identity_at(&e.chart, &pc, id) {
                    Ok(r) => assert!(r.rel_residual <= 1e-7 || r.abs_residual <= 1e-10, "{name} {id}: {r:?}"),
                    Err(GeomError::NotApplicable { .. }) => assert!(requires_hermitian(id) && e.chart.integrable == Some(false)),
                    Err(other) => panic!("{name} {id}: {other}"),
                }
            }
        }
    }
}

#[test]
fn identity_registry_errors() {
    let e = load("s6_nearly_kahler").unwrap();
    assert!(matches!(identity_residual(&e.chart, &e.witness, "I9.9"), Err(GeomError::UnknownIdentity(_))));
    assert!(matches!(identity_residual(&e.chart, &e.witness, "I5.4"), Err(GeomError::NotApplicable { .. })));
    let flat = load("t4_kahler").unwrap();
    let r = identity_residual(&flat.chart, &flat.witness, "I2.7").unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
}

#[test]
fn complex_curves_have_no_lee_term() {
    use ahg_core::{parse_expression, Axis, ChartSpec, Domain};
    let e = |s: &str| parse_expression(s, 2).unwrap();
    let g = vec![e("exp(0.2*sin(x1))"), e("0"), e("0"), e("exp(0.2*sin(x1))")];
    let j = vec![e("0"), e("-1"), e("1"), e("0")];
    let axes = vec![Axis::new(0.0, 2.0 * PI, true); 2];
    let chart = ChartSpec::from_exprs("curve", 1, Domain::Box(axes), g, Some(j)).unwrap().with_integrable(true);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let p = chart.domain.sample(&mut rng);
        let pc = PointCurvature::at(&chart, &p, 2).unwrap();
        for id in IDENTITY_IDS {
            let r = identity_at(&chart, &pc, id).unwrap();
            assert!(r.abs_residual <= 1e-12, "{id}: {r:?}");
        }
        // Kähler curve: S₁ = S₂ = s/2 = −e^{−2u}Δu with u = 0.1 sin x1
        let u = 0.1 * p[0].sin();
        let expect = (-2.0 * u).exp() * 0.1 * p[0].sin();
        let (s1, s2) = pc.chern_scalars();
        assert!((s1 - expect).abs() < 1e-12 && (s2 - expect).abs() < 1e-12, "{s1} {s2} {expect}");
        assert!((pc.scalar() - 2.0 * expect).abs() < 1e-12);
    }
}
