//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line to stdout
//! (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use ahg_core::catalog::{self, CATALOG_NAMES};
use ahg_core::conformal::solver::GridBackground;
use ahg_core::conformal::{
    conformal_scalar_residuals, integrate, scale_chart, solve_mixed_equation, QuadratureRule, ScalarField,
    SolveOptions, SpectralGrid, TrigSum, CONFORMAL_RESIDUAL_IDS,
};
use ahg_core::curvature::{berger_average, identity_at, requires_hermitian, PointCurvature, IDENTITY_IDS};
use ahg_core::hermitian::{class_label, classify_gray_hervella};
use ahg_core::twistor::{
    build_twistor_chart, canonical_form_check, chern_ricci_forms, closed_form_scalars, lee_and_integrability_check,
    scalar_oracle_residuals, TwistorSign, TwistorSpec,
};
use ahg_core::{parse_expression, tensor, ChartSpec, GeomError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BASES: [&str; 3] = ["t4_flat_base", "s4_round", "h4_hyperbolic"];
const SIGNS: [TwistorSign; 2] = [TwistorSign::Plus, TwistorSign::Minus];

/// Failures and summary figures of one criterion.
struct Check {
    id: u32,
    title: &'static str,
    start: Instant,
    failures: Vec<String>,
    figures: Vec<String>,
}

impl Check {
    fn new(id: u32, title: &'static str) -> Check {
        Check { id, title, start: Instant::now(), failures: Vec::new(), figures: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn figure(&mut self, s: impl Into<String>) {
        self.figures.push(s.into());
    }

    fn finish(self) {
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut line = format!(
            "criterion {} {status}: {} | {} | {:.1} s",
            self.id,
            self.title,
            self.figures.join("; "),
            self.start.elapsed().as_secs_f64()
        );
        if !self.failures.is_empty() {
            let shown: Vec<&str> = self.failures.iter().take(5).map(String::as_str).collect();
            line.push_str(&format!(" | {} failure(s): {}", self.failures.len(), shown.join("; ")));
        }
        let mut out = std::io::stdout().lock();
        writeln!(out, "{line}").unwrap();
        out.flush().unwrap();
        drop(out);
        assert!(self.failures.is_empty(), "{line}");
    }
}

/// Running maximum with the place it was reached.
#[derive(Default)]
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn see(&mut self, v: f64, at: impl FnOnce() -> String) {
        if v > self.value || self.at.is_empty() {
            self.value = self.value.max(v);
            self.at = at();
        }
    }
}

impl std::fmt::Display for Worst {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2e} ({})", self.value, self.at)
    }
}

fn sample_points(chart: &ChartSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| chart.domain.sample(&mut rng)).collect()
}

fn twistor(base: &str, sign: TwistorSign, t: f64) -> (TwistorSpec, ChartSpec) {
    let spec = TwistorSpec::from_catalog(base, sign, t).unwrap();
    let chart = build_twistor_chart(&spec).unwrap();
    (spec, chart)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

fn random_trig(seed: u64, modes: usize) -> TrigSum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = TrigSum::new(4);
    t.constant = rng.gen_range(-1.0..1.0);
    for _ in 0..modes {
        let k: Vec<f64> = (0..4).map(|_| rng.gen_range(-2i32..=2) as f64).collect();
        t.push(k, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
    }
    t
}

#[test]
fn criterion_1_identity_suite() {
    let mut c = Check::new(1, "identity suite on every catalog entry, 50 points, rel <= 1e-7 or abs <= 1e-10");
    let mut worst = Worst::default();
    let mut evaluated = 0usize;
    let mut skipped = Vec::new();
    for name in CATALOG_NAMES {
        let entry = catalog::load(name).unwrap();
        let hermitian = entry.chart.integrable == Some(true);
        for p in sample_points(&entry.chart, 50, 42) {
            let pc = PointCurvature::at(&entry.chart, &p, 2).unwrap();
            for id in IDENTITY_IDS {
                if requires_hermitian(id) && !hermitian {
                    continue;
                }
                let r = identity_at(&entry.chart, &pc, id).unwrap();
                evaluated += 1;
                worst.see(r.rel_residual, || format!("{name} {id}"));
                c.require(r.rel_residual <= 1e-7 || r.abs_residual <= 1e-10, || {
                    format!("{name} {id} at {:?}: rel {:.2e} abs {:.2e}", p, r.rel_residual, r.abs_residual)
                });
            }
        }
        if !hermitian {
            skipped.push(name);
        }
    }
    c.figure(format!("{evaluated} residuals"));
    c.figure(format!("worst rel {worst}"));
    c.figure(format!("I5.4/I5.5 skipped on non-integrable {}", skipped.join(",")));
    c.require(c.start.elapsed().as_secs_f64() < 120.0, || "runtime above 2 minutes".into());
    c.finish();
}

#[test]
fn criterion_2_twistor_oracle_equivalence() {
    let mut c = Check::new(2, "twistor s, s_J, S1 generic vs closed form, 3 bases x 2 signs x 3 scales, 10 points, rel <= 1e-6");
    let mut worst = Worst::default();
    let mut evaluated = 0usize;
    for base in BASES {
        for sign in SIGNS {
            for t in [0.5, 1.0, 2.0] {
                let (spec, chart) = twistor(base, sign, t);
                for p in sample_points(&chart, 10, 7) {
                    for r in scalar_oracle_residuals(&spec, &chart, &p).unwrap() {
                        evaluated += 1;
                        worst.see(r.rel_residual, || format!("{base} {sign} t={t} {}", r.id));
                        c.require(r.rel_residual <= 1e-6, || {
                            format!("{base} {sign} t={t} {}: {} vs {}", r.id, r.lhs, r.rhs)
                        });
                    }
                }
            }
        }
    }
    c.figure(format!("{evaluated} residuals, worst rel {worst}"));

    let cf = closed_form_scalars(12.0, 1.0).unwrap();
    let spots = [("s(1)", cf.s, 12.0), ("S1(J+,1)", cf.chern_plus, 6.0), ("S1(J-)", cf.chern_minus, 0.0), ("s_J-(1)", cf.s_j_minus, 4.0)];
    for (label, got, want) in spots {
        c.require(rel_close(got, want, 1e-12), || format!("closed form {label} = {got}, expected {want}"));
    }
    let (_, plus) = twistor("s4_round", TwistorSign::Plus, 1.0);
    let (_, minus) = twistor("s4_round", TwistorSign::Minus, 1.0);
    for p in sample_points(&plus, 3, 11) {
        let a = PointCurvature::at(&plus, &p, 2).unwrap();
        let b = PointCurvature::at(&minus, &p, 2).unwrap();
        let generic = [
            ("s(1)", a.scalar(), 12.0),
            ("S1(J+,1)", a.chern_scalars().0, 6.0),
            ("S1(J-,1)", b.chern_scalars().0, 0.0),
            ("s_J-(1)", b.j_scalar(), 4.0),
        ];
        for (label, got, want) in generic {
            c.require(rel_close(got, want, 1e-6), || format!("generic {label} = {got}, expected {want}"));
        }
    }
    c.figure("spot values s(1)=12, S1(J+,1)=6, S1(J-)=0, s_J-(1)=4 closed form and generic");
    c.require(c.start.elapsed().as_secs_f64() < 300.0, || "runtime above 5 minutes".into());
    c.finish();
}

#[test]
fn criterion_3_eells_salamon_canonical_form() {
    let mut c = Check::new(3, "rho_- = 0, (3,1) part of d(phi1^phi2^phibar3) <= 1e-7, (2,2) part with -s_N/24, 3 bases, 50 points");
    let mut rho = Worst::default();
    let mut t31 = Worst::default();
    let mut t22 = Worst::default();
    for base in BASES {
        let (spec, chart) = twistor(base, TwistorSign::Minus, 0.8);
        for p in sample_points(&chart, 50, 13) {
            let cr = chern_ricci_forms(&spec, &chart, &p).unwrap();
            let sup = tensor::sup_norm(&cr.generic);
            rho.see(sup, || base.to_string());
            c.require(sup <= 1e-7, || format!("{base}: |rho_-| = {sup:.2e}"));
            let cf = canonical_form_check(&spec, &p).unwrap();
            t31.see(cf.type_31, || base.to_string());
            c.require(cf.type_31 <= 1e-7, || format!("{base}: (3,1) part {:.2e}", cf.type_31));
            match cf.rhs_residual {
                Some(r) => {
                    t22.see(r, || base.to_string());
                    c.require(r <= 1e-7, || format!("{base}: (2,2) residual {r:.2e}"));
                }
                None => c.require(false, || format!("{base}: no (2,2) check on an Einstein base")),
            }
            c.require(cf.norm > 1e-2, || format!("{base}: d(phi1^phi2^phibar3) vanishes, check is vacuous"));
        }
    }
    c.figure(format!("sup |rho_-| {rho}"));
    c.figure(format!("(3,1) {t31}"));
    c.figure(format!("(2,2) {t22}"));
    c.finish();
}

#[test]
fn criterion_4_integrability_dichotomy() {
    let mut c = Check::new(4, "Nijenhuis of J+ <= 1e-8 over ASD bases, of J- >= 1e-2 at witness points");
    let mut plus = Worst::default();
    let mut minus_min = f64::INFINITY;
    for base in ["t4_flat_base", "s4_round", "h4_hyperbolic", "t4_perturbed"] {
        for t in [0.5, 1.0, 2.0] {
            let (spec, chart) = twistor(base, TwistorSign::Plus, t);
            c.require(spec.asd, || format!("{base} is not flagged anti-self-dual"));
            for p in sample_points(&chart, 10, 19) {
                let n = lee_and_integrability_check(&chart, &p).unwrap().nijenhuis;
                plus.see(n, || format!("{base} t={t}"));
                c.require(n <= 1e-8, || format!("J+ over {base} t={t}: |N| = {n:.2e}"));
            }
            let (_, chart) = twistor(base, TwistorSign::Minus, t);
            let mut witnesses = sample_points(&chart, 10, 23);
            witnesses.push(vec![0.0; 6]);
            for p in witnesses {
                let n = lee_and_integrability_check(&chart, &p).unwrap().nijenhuis;
                minus_min = minus_min.min(n);
                c.require(n >= 1e-2, || format!("J- over {base} t={t}: |N| = {n:.2e} at {p:?}"));
            }
        }
    }
    c.figure(format!("sup |N(J+)| {plus}"));
    c.figure(format!("min |N(J-)| {minus_min:.3e}"));
    c.finish();
}

#[test]
fn criterion_5_conformal_machinery() {
    let mut c = Check::new(5, "conformal residuals <= 1e-7 at 20 points; 16^4 solve residual <= 1e-10, sign check rel <= 1e-6; Gauduchon recovery <= 1e-5");
    let factors: [(&str, Arc<dyn ScalarField>); 2] = [
        ("t4_perturbed", Arc::new(parse_expression("0.1*sin(x1 + x2) - 0.05*cos(x3)*sin(x4)", 4).unwrap())),
        ("hopf_surface", Arc::new(parse_expression("0.1*sin(x1)*x2 + 0.05*x3*x4 - 0.07*cos(x4)", 4).unwrap())),
    ];
    for (name, f) in factors {
        let entry = catalog::load(name).unwrap();
        let pair = scale_chart(&entry.chart, f);
        let mut worst: Vec<Worst> = CONFORMAL_RESIDUAL_IDS.iter().map(|_| Worst::default()).collect();
        for p in sample_points(&entry.chart, 20, 29) {
            for (k, r) in conformal_scalar_residuals(&pair, &p).unwrap().into_iter().enumerate() {
                worst[k].see(r.abs_residual, || r.id.clone());
                c.require(r.abs_residual <= 1e-7, || format!("{name} {} abs {:.2e}", r.id, r.abs_residual));
            }
        }
        let sup = worst.iter().map(|w| w.value).fold(0.0, f64::max);
        c.figure(format!("{name} worst abs {sup:.2e}"));
    }

    let entry = catalog::load("t4_perturbed").unwrap();
    let opts = SolveOptions { resolution: 16, ..SolveOptions::default() };
    let sol = solve_mixed_equation(&entry.chart, 1.0, 0.5, &opts).unwrap();
    c.require(sol.residual <= 1e-10, || format!("solve residual {:.2e}", sol.residual));
    c.figure(format!("solve residual {:.2e} in {} iterations, gamma {:.6e}", sol.residual, sol.iterations, sol.gamma));
    let mut sign = Worst::default();
    for r in sol.sign_check(&entry.chart, 20, 31).unwrap() {
        sign.see(r.rel_residual, || format!("{:?}", r.point));
        c.require(r.rel_residual <= 1e-6, || format!("sign check rel {:.2e} at {:?}", r.rel_residual, r.point));
    }
    c.figure(format!("sign check worst rel {:.2e}", sign.value));

    // the metric is exp(2ε sin x1) times flat, so the factor is −ε sin x1 up to a constant
    let g = &sol.gauduchon;
    c.require(g.converged, || format!("Gauduchon search did not converge: {:?}", g.residual_history));
    let check = SpectralGrid::from_fn(vec![16; 4], |x| g.factor.value(x) + catalog::T4_PERTURBATION * x[0].sin()).unwrap();
    let mean = check.mean();
    let err = check.values().iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    c.require(err <= 1e-5, || format!("Gauduchon recovery error {err:.2e}"));
    c.figure(format!("Gauduchon recovery error {err:.2e}"));
    c.finish();
}

#[test]
fn criterion_6_global_integrals() {
    let mut c = Check::new(6, "integral of Chern Laplacian on the Gauduchon torus <= 1e-10; Hopf (S1-S2) vs |alpha|^2/2 rel <= 1e-3");
    let entry = catalog::load("t4_perturbed").unwrap();
    let gauduchon = ahg_core::conformal::find_gauduchon_factor(&entry.chart, &Default::default()).unwrap();
    let bg = GridBackground::new(&entry.chart, &gauduchon.total(), 8).unwrap();
    let mut worst: f64 = 0.0;
    for s in 0..5 {
        let v = random_trig(100 + s, 4).to_grid(vec![8; 4]).unwrap();
        let i = bg.chern_laplacian_integral(v.values());
        worst = worst.max(i.abs());
        c.require(i.abs() <= 1e-10, || format!("Gauduchon t4_perturbed: integral {i:.2e} for v #{s}"));
    }
    c.figure(format!("Gauduchon t4_perturbed, 5 random v, worst {worst:.2e}"));

    let hopf = catalog::load("hopf_surface").unwrap();
    let rule = QuadratureRule::for_entry(&hopf, 6).unwrap();
    let lhs = integrate(&hopf.chart, &rule, |p| {
        let (s1, s2) = PointCurvature::at(&hopf.chart, p, 2)?.chern_scalars();
        Ok(s1 - s2)
    })
    .unwrap();
    let rhs =
        integrate(&hopf.chart, &rule, |p| Ok(0.5 * PointCurvature::at(&hopf.chart, p, 2)?.budget.norms.alpha)).unwrap();
    let rel = (lhs.value - rhs.value).abs() / rhs.value.abs();
    c.require(rel <= 1e-3, || format!("Hopf identity: {} vs {}", lhs.value, rhs.value));
    c.figure(format!("Hopf {:.10} vs {:.10}, rel {rel:.2e}", lhs.value, rhs.value));
    c.finish();
}

#[test]
fn criterion_7_berger_averaging() {
    let mut c = Check::new(7, "Monte Carlo holomorphic sectional average within 3 standard errors, 1e5 samples");
    let (_, tw) = twistor("s4_round", TwistorSign::Minus, 0.8);
    let hopf = catalog::load("hopf_surface").unwrap().chart;
    let mut worst: f64 = 0.0;
    for (name, chart) in [("hopf_surface", &hopf), ("twistor:s4_round:-:t=0.8", &tw)] {
        for (i, p) in sample_points(chart, 5, 37).into_iter().enumerate() {
            let b = berger_average(chart, &p, 100_000, 1000 + i as u64).unwrap();
            let z = (b.lhs - b.rhs).abs() / b.std_error.max(f64::MIN_POSITIVE);
            worst = worst.max(z);
            c.require(b.within(3.0), || format!("{name} point {i}: {} vs {} (se {:.2e})", b.lhs, b.rhs, b.std_error));
        }
    }
    c.figure(format!("hopf_surface and twistor:s4_round:-:t=0.8, 5 points each, worst {worst:.2} standard errors"));
    c.finish();
}

#[test]
fn criterion_8_classification_table() {
    let mut c = Check::new(8, "classifier matches declared class on every entry; twistor J- has (dF)^-, J+ is W3");
    let mut table = Vec::new();
    for name in CATALOG_NAMES {
        let entry = catalog::load(name).unwrap();
        let flags = classify_gray_hervella(&entry.chart, 12, 42, 1e-8).unwrap();
        match entry.expected_vanishing {
            Some(v) => c.require(flags.vanishes == v, || {
                format!("{name}: classified {}, declared {}", flags.label(), class_label(v))
            }),
            None => c.require(false, || format!("{name} declares no class")),
        }
        table.push(format!("{name}={}", flags.label()));
    }
    c.figure(table.join(","));
    for (base, t) in [("s4_round", 0.5), ("h4_hyperbolic", 0.7), ("t4_flat_base", 1.0)] {
        let (_, minus) = twistor(base, TwistorSign::Minus, t);
        let flags = classify_gray_hervella(&minus, 6, 42, 1e-8).unwrap();
        c.require(!flags.vanishes[0] && flags.sup_df_minus > 1e-2, || {
            format!("J- over {base}: sup |(dF)^-| = {:.2e}", flags.sup_df_minus)
        });
        let (_, plus) = twistor(base, TwistorSign::Plus, t);
        let flags = classify_gray_hervella(&plus, 6, 42, 1e-8).unwrap();
        c.require(flags.label() == "W3", || format!("J+ over {base} t={t}: {}", flags.label()));
    }
    c.figure("J- outside W2+W3+W4, J+ in W3 over s4_round t=0.5, h4_hyperbolic t=0.7, t4_flat_base t=1");
    let err = TwistorSpec::from_catalog("s6_nearly_kahler", TwistorSign::Plus, 1.0).unwrap_err();
    c.require(matches!(err, GeomError::InvalidBase(_)), || format!("6-dimensional base accepted: {err}"));
    c.finish();
}
