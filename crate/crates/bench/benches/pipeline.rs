use ahg_core::catalog;
use ahg_core::conformal::{find_gauduchon_factor, solve_mixed_equation, GauduchonOptions, SolveOptions};
use ahg_core::curvature::{berger_from_point, CurvatureReport, PointCurvature};
use ahg_core::twistor::{build_twistor_chart, TwistorSign, TwistorSpec};
use ahg_core::{parse_expression, Jet};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn jets(c: &mut Criterion) {
    let e = parse_expression("exp(0.3*x1)*sin(x2 - x3^2) + x4*x5/(2 + cos(x6))", 6).unwrap();
    let p = [0.1, -0.2, 0.3, 0.4, -0.5, 0.6];
    c.bench_function("expr_jet_order3_6vars", |b| b.iter(|| e.eval_jet(black_box(&p), 3).unwrap()));
    let x = Jet::variable(6, 3, 0, 0.4).sin();
    let y = Jet::variable(6, 3, 3, -0.7).exp();
    c.bench_function("jet_mul_order3_6vars", |b| b.iter(|| black_box(&x) * black_box(&y)));
}

fn curvature(c: &mut Criterion) {
    for name in ["hopf_surface", "s6_nearly_kahler"] {
        let chart = catalog::load(name).unwrap().chart;
        let p = vec![0.2; chart.dim()];
        c.bench_function(&format!("point_curvature_{name}"), |b| {
            b.iter(|| CurvatureReport::from_point(&PointCurvature::at(&chart, black_box(&p), 2).unwrap()).unwrap())
        });
    }
    let chart = catalog::load("hopf_surface").unwrap().chart;
    let pc = PointCurvature::at(&chart, &[0.2, 0.1, -0.3, 0.4], 2).unwrap();
    c.bench_function("berger_10k_samples", |b| b.iter(|| berger_from_point(&pc, 10_000, 7).unwrap()));
}

fn twistor(c: &mut Criterion) {
    let spec = TwistorSpec::from_catalog("s4_round", TwistorSign::Minus, 0.8).unwrap();
    let chart = build_twistor_chart(&spec).unwrap();
    let p = vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6];
    c.bench_function("twistor_point_curvature", |b| {
        b.iter(|| CurvatureReport::from_point(&PointCurvature::at(&chart, black_box(&p), 2).unwrap()).unwrap())
    });
}

fn conformal(c: &mut Criterion) {
    let chart = catalog::load("t4_perturbed").unwrap().chart;
    let mut group = c.benchmark_group("conformal");
    group.sample_size(10);
    let gopts = GauduchonOptions { max_modes: 1, ..GauduchonOptions::default() };
    group.bench_function("gauduchon_modes1", |b| b.iter(|| find_gauduchon_factor(&chart, &gopts).unwrap()));
    let sopts = SolveOptions { resolution: 8, gauduchon: gopts, ..SolveOptions::default() };
    group.bench_function("solve_mixed_res8", |b| b.iter(|| solve_mixed_equation(&chart, 1.0, 0.0, &sopts).unwrap()));
    group.finish();
}

criterion_group!(benches, jets, curvature, twistor, conformal);
criterion_main!(benches);
