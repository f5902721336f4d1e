//! Command implementations. Each returns a [`Report`] and whether every
//! check it ran passed.

use std::path::{Path, PathBuf};

use ahg_core::conformal::{
    find_gauduchon_factor, gamma_invariant, solve_mixed_equation, GauduchonOptions, QuadratureRule, SolveOptions,
};
use ahg_core::curvature::{
    berger_from_point, identity_at, is_known_identity, CurvatureReport, IdentityResidual, PointCurvature,
    IDENTITY_IDS,
};
use ahg_core::hermitian::{class_label, classify_gray_hervella};
use ahg_core::tensor;
use ahg_core::twistor::{
    build_twistor_chart, canonical_form_check, chern_ricci_forms, closed_form_scalars, coframe_checks,
    lee_and_integrability_check, levi_civita_forms, structure_equation_residual, TwistorSign, TwistorSpec,
};
use ahg_core::{ChartSpec, GeomError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::manifold::Manifold;
use crate::output::{Cell, Report};

pub struct Outcome {
    pub report: Report,
    pub passed: bool,
}

/// Identity residuals below this are treated as passing regardless of the
/// relative tolerance.
pub const ABS_FLOOR: f64 = 1e-10;
pub const DEFAULT_IDENTITY_TOL: f64 = 1e-7;
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-8;
pub const DEFAULT_SWEEP_TOL: f64 = 1e-6;
pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;
pub const SIGN_CHECK_TOL: f64 = 1e-6;
pub const BERGER_SIGMAS: f64 = 3.0;

pub fn sample_points(chart: &ChartSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| chart.domain.sample(&mut rng)).collect()
}

fn require_j(chart: &ChartSpec) -> Result<()> {
    if chart.has_complex_structure() {
        Ok(())
    } else {
        Err(GeomError::MissingComplexStructure(chart.name.clone()))
    }
}

const REPORT_COLUMNS: [&str; 11] =
    ["s", "s_j", "s1", "s2", "alpha2", "n0_2", "df_minus2", "df0_plus2", "df2", "delta_alpha", "nabla_f2"];

fn report_values(r: &CurvatureReport) -> [f64; 11] {
    [r.s, r.s_j, r.s1, r.s2, r.alpha2, r.n0_2, r.df_minus2, r.df0_plus2, r.df2, r.delta_alpha, r.nabla_f2]
}

pub fn report(m: &Manifold, points: usize, seed: u64) -> Result<Outcome> {
    require_j(&m.chart)?;
    let mut columns = vec!["index", "point"];
    columns.extend(REPORT_COLUMNS);
    let mut rep = Report::new(format!("curvature report: {}", m.chart.name), &columns);
    let mut acc: Vec<Vec<f64>> = vec![Vec::new(); REPORT_COLUMNS.len()];
    for (i, p) in sample_points(&m.chart, points, seed).into_iter().enumerate() {
        let r = CurvatureReport::from_point(&PointCurvature::at(&m.chart, &p, 2)?)?;
        let vals = report_values(&r);
        let mut row: Vec<Cell> = vec![i.into(), p.into()];
        for (k, v) in vals.iter().enumerate() {
            acc[k].push(*v);
            row.push((*v).into());
        }
        rep.push(row);
    }
    for (name, vals) in REPORT_COLUMNS.iter().zip(&acc) {
        if vals.is_empty() {
            continue;
        }
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        rep.summarize(&format!("{name}_min"), min);
        rep.summarize(&format!("{name}_max"), max);
        rep.summarize(&format!("{name}_mean"), mean);
    }
    Ok(Outcome { report: rep, passed: true })
}

/// Checks available on twistor charts in addition to the curvature identities.
pub const TWISTOR_CHECK_IDS: [&str; 8] = [
    "twistor.coframe",
    "twistor.structure",
    "twistor.levi_civita",
    "twistor.scalars",
    "twistor.chern_ricci",
    "twistor.canonical",
    "twistor.lee",
    "twistor.nijenhuis",
];

/// One residual with its pass rule.
struct Graded {
    residual: IdentityResidual,
    tol: f64,
    relative: bool,
}

impl Graded {
    fn abs(residual: IdentityResidual, tol: f64) -> Graded {
        Graded { residual, tol, relative: false }
    }

    fn passes(&self, tol_override: Option<f64>) -> bool {
        let tol = tol_override.unwrap_or(self.tol);
        let r = &self.residual;
        if self.relative {
            r.rel_residual <= tol || r.abs_residual <= ABS_FLOOR
        } else {
            r.abs_residual <= tol
        }
    }
}

fn not_applicable(id: &str, reason: impl Into<String>) -> GeomError {
    GeomError::NotApplicable { id: id.to_string(), reason: reason.into() }
}

fn twistor_check(id: &str, spec: &TwistorSpec, chart: &ChartSpec, p: &[f64]) -> Result<Vec<Graded>> {
    let out = match id {
        "twistor.coframe" => coframe_checks(spec, p)?.into_iter().map(|r| Graded::abs(r, 1e-9)).collect(),
        "twistor.structure" => structure_equation_residual(spec, p)?.into_iter().map(|r| Graded::abs(r, 1e-8)).collect(),
        "twistor.levi_civita" => {
            let lc = levi_civita_forms(spec, p)?;
            let mut v = vec![
                Graded::abs(IdentityResidual::new("levi_civita_structure", p, 0.0, 0.0, lc.structure), 1e-7),
                Graded::abs(IdentityResidual::new("levi_civita_antisymmetry", p, 0.0, 0.0, lc.antisymmetry), 1e-10),
            ];
            if spec.einstein && spec.asd {
                let want = closed_form_scalars(spec.s_n, spec.t)?.s;
                let r = IdentityResidual::scalar("levi_civita_scalar", p, lc.scalar, want);
                v.push(Graded { residual: r, tol: DEFAULT_SWEEP_TOL, relative: true });
            }
            v
        }
        "twistor.scalars" => scalar_residuals(spec, chart, p)?,
        "twistor.chern_ricci" => {
            let cr = chern_ricci_forms(spec, chart, p)?;
            let mut v = vec![Graded::abs(IdentityResidual::new("chern_ricci_routes", p, 0.0, 0.0, cr.route_residual()), 1e-7)];
            if spec.sign == TwistorSign::Minus {
                let sup = tensor::sup_norm(&cr.generic);
                v.push(Graded::abs(IdentityResidual::new("rho_minus", p, sup, 0.0, sup), 1e-7));
            }
            v
        }
        "twistor.canonical" => {
            let c = canonical_form_check(spec, p)?;
            let mut v = vec![Graded::abs(IdentityResidual::new("canonical_31", p, c.type_31, 0.0, c.type_31), 1e-7)];
            if let Some(rhs) = c.rhs_residual {
                v.push(Graded::abs(IdentityResidual::new("canonical_22", p, c.norm, c.norm, rhs), 1e-7));
            }
            v
        }
        "twistor.lee" => {
            let c = lee_and_integrability_check(chart, p)?;
            vec![
                Graded::abs(IdentityResidual::new("lee_form", p, c.lee, 0.0, c.lee), 1e-8),
                Graded::abs(IdentityResidual::new("f_wedge_df", p, c.f_wedge_df, 0.0, c.f_wedge_df), 1e-8),
            ]
        }
        "twistor.nijenhuis" => {
            let c = lee_and_integrability_check(chart, p)?;
            match (spec.sign, spec.asd) {
                (TwistorSign::Plus, true) => {
                    vec![Graded::abs(IdentityResidual::new("nijenhuis", p, c.nijenhuis, 0.0, c.nijenhuis), 1e-8)]
                }
                (TwistorSign::Minus, _) => {
                    // lower bound: the shortfall below the margin must vanish
                    let margin = 1e-2;
                    let short = (margin - c.nijenhuis).max(0.0);
                    vec![Graded::abs(IdentityResidual::new("nijenhuis_lower_bound", p, c.nijenhuis, margin, short), 0.0)]
                }
                _ => return Err(not_applicable(id, "base is not anti-self-dual")),
            }
        }
        _ => return Err(GeomError::UnknownIdentity(id.to_string())),
    };
    Ok(out)
}

fn scalar_residuals(spec: &TwistorSpec, chart: &ChartSpec, p: &[f64]) -> Result<Vec<Graded>> {
    Ok(ahg_core::twistor::scalar_oracle_residuals(spec, chart, p)?
        .into_iter()
        .map(|r| Graded { residual: r, tol: DEFAULT_SWEEP_TOL, relative: true })
        .collect())
}

struct Tally {
    id: String,
    points: usize,
    worst_rel: f64,
    worst_abs: f64,
    worst_point: Vec<f64>,
    tol: f64,
    failures: usize,
}

impl Tally {
    fn new(id: &str) -> Tally {
        Tally { id: id.to_string(), points: 0, worst_rel: 0.0, worst_abs: 0.0, worst_point: Vec::new(), tol: 0.0, failures: 0 }
    }

    fn add(&mut self, graded: &[Graded], tol_override: Option<f64>) {
        self.points += 1;
        let mut failed = false;
        for g in graded {
            let r = &g.residual;
            self.tol = tol_override.unwrap_or(g.tol);
            let score = if g.relative { r.rel_residual } else { r.abs_residual };
            let worst = if g.relative { self.worst_rel } else { self.worst_abs };
            if score >= worst || self.worst_point.is_empty() {
                self.worst_point = r.point.clone();
            }
            self.worst_rel = self.worst_rel.max(r.rel_residual);
            self.worst_abs = self.worst_abs.max(r.abs_residual);
            failed |= !g.passes(tol_override);
        }
        if failed {
            self.failures += 1;
        }
    }
}

pub fn verify(m: &Manifold, ids: &str, points: usize, seed: u64, tol: Option<f64>) -> Result<Outcome> {
    require_j(&m.chart)?;
    let all = ids == "all";
    let requested: Vec<String> = if all {
        let mut v: Vec<String> = IDENTITY_IDS.iter().map(|s| s.to_string()).collect();
        if m.twistor.is_some() {
            v.extend(TWISTOR_CHECK_IDS.iter().map(|s| s.to_string()));
        }
        v
    } else {
        ids.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    };
    if requested.is_empty() {
        return Err(GeomError::InvalidParameter("no identities requested".into()));
    }
    for id in &requested {
        if !is_known_identity(id) && !TWISTOR_CHECK_IDS.contains(&id.as_str()) {
            return Err(GeomError::UnknownIdentity(id.clone()));
        }
        if id.starts_with("twistor.") && m.twistor.is_none() {
            return Err(not_applicable(id, format!("`{}` is not a twistor chart", m.chart.name)));
        }
    }
    let mut tallies: Vec<Tally> = requested.iter().map(|id| Tally::new(id)).collect();
    let mut skipped: Vec<(String, String)> = Vec::new();
    let mut active = vec![true; requested.len()];
    for p in sample_points(&m.chart, points, seed) {
        let pc = PointCurvature::at(&m.chart, &p, 2)?;
        for (k, id) in requested.iter().enumerate() {
            if !active[k] {
                continue;
            }
            let graded = if let Some(spec) = m.twistor.as_ref().filter(|_| id.starts_with("twistor.")) {
                twistor_check(id, spec, &m.chart, &p)
            } else {
                identity_at(&m.chart, &pc, id)
                    .map(|r| vec![Graded { residual: r, tol: DEFAULT_IDENTITY_TOL, relative: true }])
            };
            match graded {
                Ok(g) => tallies[k].add(&g, tol),
                Err(GeomError::NotApplicable { reason, .. }) if all => {
                    active[k] = false;
                    skipped.push((id.clone(), reason));
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut rep = Report::new(
        format!("identity verification: {}", m.chart.name),
        &["id", "points", "worst_rel", "worst_abs", "worst_point", "tol", "failures", "pass"],
    );
    let mut passed = 0;
    let mut failed = 0;
    for (t, on) in tallies.into_iter().zip(&active) {
        if !on {
            continue;
        }
        let ok = t.failures == 0;
        if ok {
            passed += 1;
        } else {
            failed += 1;
        }
        rep.push(vec![
            t.id.into(),
            t.points.into(),
            t.worst_rel.into(),
            t.worst_abs.into(),
            t.worst_point.into(),
            t.tol.into(),
            t.failures.into(),
            ok.into(),
        ]);
    }
    for (id, reason) in &skipped {
        rep.note(format!("skipped {id}: {reason}"));
    }
    rep.summarize("passed", passed);
    rep.summarize("failed", failed);
    rep.summarize("skipped", skipped.len());
    rep.summarize("pass", failed == 0);
    Ok(Outcome { report: rep, passed: failed == 0 })
}

pub fn classify(m: &Manifold, points: usize, seed: u64, tol: Option<f64>) -> Result<Outcome> {
    require_j(&m.chart)?;
    let tol = tol.unwrap_or(DEFAULT_CLASSIFY_TOL);
    let flags = classify_gray_hervella(&m.chart, points, seed, tol)?;
    let mut rep = Report::new(format!("Gray-Hervella classification: {}", m.chart.name), &["class", "component", "sup", "present"]);
    let sups = [flags.sup_df_minus, flags.sup_n0, flags.sup_df0_plus, flags.sup_alpha];
    let names = ["(dF)-", "N0", "(dF)0+", "alpha"];
    for k in 0..4 {
        rep.push(vec![format!("W{}", k + 1).into(), names[k].into(), sups[k].into(), (!flags.vanishes[k]).into()]);
    }
    rep.summarize("class", flags.label());
    let declared = m.entry.as_ref().and_then(|e| e.expected_vanishing);
    let matches = declared.is_none_or(|d| d == flags.vanishes);
    rep.summarize("declared", declared.map(class_label).map_or(Cell::Null, Cell::from));
    rep.summarize("matches", matches);
    Ok(Outcome { report: rep, passed: matches })
}

pub fn twistor_sweep(base: &str, sign: TwistorSign, t_min: f64, t_max: f64, steps: usize, seed: u64, tol: Option<f64>) -> Result<Outcome> {
    if !(t_min > 0.0 && t_max.is_finite() && t_max >= t_min) {
        return Err(GeomError::InvalidParameter(format!("need 0 < t_min <= t_max, got [{t_min}, {t_max}]")));
    }
    if steps == 0 || (steps == 1 && t_max > t_min) {
        return Err(GeomError::InvalidParameter("a sweep over a range needs at least 2 steps".into()));
    }
    let tol = tol.unwrap_or(DEFAULT_SWEEP_TOL);
    let first = TwistorSpec::from_catalog(base, sign, t_min)?;
    let point = sample_points(&build_twistor_chart(&first)?, 1, seed).remove(0);
    let closed = first.einstein && first.asd;
    let mut rep = Report::new(
        format!("twistor sweep: {base} sign {sign}"),
        &["t", "s_closed", "s_generic", "s_j_closed", "s_j_generic", "s1_closed", "s1_generic", "residual"],
    );
    let mut passed = true;
    let mut s_prev: Option<(f64, f64)> = None;
    let mut crossings = Vec::new();
    for k in 0..steps {
        let t = if steps == 1 { t_min } else { t_min + (t_max - t_min) * k as f64 / (steps - 1) as f64 };
        let spec = TwistorSpec { t, ..first.clone() };
        let chart = build_twistor_chart(&spec)?;
        let pc = PointCurvature::at(&chart, &point, 2)?;
        let generic = [pc.scalar(), pc.j_scalar(), pc.chern_scalars().0];
        let cf = if closed {
            let c = closed_form_scalars(spec.s_n, t)?;
            Some([c.s, c.s_j(sign), c.chern(sign)])
        } else {
            None
        };
        let residual = cf.map(|c| {
            c.iter().zip(&generic).map(|(a, b)| (a - b).abs() / 1f64.max(a.abs()).max(b.abs())).fold(0.0, f64::max)
        });
        if residual.is_some_and(|r| r > tol) {
            passed = false;
        }
        if let Some((t0, s0)) = s_prev {
            if s0 * generic[0] < 0.0 {
                crossings.push(t0 + (t - t0) * s0 / (s0 - generic[0]));
            }
        }
        s_prev = Some((t, generic[0]));
        let c = |i: usize| Cell::from(cf.map(|v| v[i]));
        rep.push(vec![t.into(), c(0), generic[0].into(), c(1), generic[1].into(), c(2), generic[2].into(), residual.into()]);
    }
    rep.summarize("point", point);
    rep.summarize("s_n", first.s_n);
    rep.summarize("closed_forms", closed);
    rep.summarize("s_sign_changes", crossings.len());
    for (i, t) in crossings.iter().enumerate() {
        rep.summarize(&format!("s_zero_t2_{i}"), t * t);
    }
    rep.summarize("pass", passed);
    Ok(Outcome { report: rep, passed })
}

pub struct SolveArgs<'a> {
    pub lambda: f64,
    pub mu: f64,
    pub resolution: usize,
    pub modes: usize,
    pub grid: Option<&'a Path>,
}

pub fn solve(m: &Manifold, label: &str, args: &SolveArgs, points: usize, seed: u64, tol: Option<f64>) -> Result<Outcome> {
    require_j(&m.chart)?;
    let tol = tol.unwrap_or(DEFAULT_SOLVE_TOL);
    let opts = SolveOptions {
        resolution: args.resolution,
        tol,
        gauduchon: GauduchonOptions { max_modes: args.modes, ..GauduchonOptions::default() },
        ..SolveOptions::default()
    };
    let sol = solve_mixed_equation(&m.chart, args.lambda, args.mu, &opts)?;
    let checks = sol.sign_check(&m.chart, points, seed)?;
    let path: PathBuf = match args.grid {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(format!("{}.grid", sanitize(label))),
    };
    sol.f.save(&path)?;
    let mut rep = Report::new(
        format!("mixed equation on {} (lambda = {}, mu = {})", m.chart.name, args.lambda, args.mu),
        &["node", "lhs", "rhs", "rel_residual", "same_sign", "pass"],
    );
    let mut signs_ok = true;
    for r in &checks {
        let same = r.lhs * r.rhs > 0.0 || (r.lhs.abs() <= ABS_FLOOR && r.rhs.abs() <= ABS_FLOOR);
        let ok = r.rel_residual <= SIGN_CHECK_TOL;
        signs_ok &= ok && same;
        rep.push(vec![r.point.clone().into(), r.lhs.into(), r.rhs.into(), r.rel_residual.into(), same.into(), ok.into()]);
    }
    let passed = sol.residual <= tol && signs_ok;
    rep.summarize("resolution", args.resolution);
    rep.summarize("residual", sol.residual);
    rep.summarize("iterations", sol.iterations);
    rep.summarize("gamma", sol.gamma);
    rep.summarize("zero_mode_residue", sol.zero_mode_residue);
    rep.summarize("gauduchon_residual", sol.gauduchon.residual);
    rep.summarize("gauduchon_converged", sol.gauduchon.converged);
    rep.summarize("f_sup", sol.f.sup_norm());
    rep.summarize("sign_consistent", signs_ok);
    rep.summarize("grid", path.display().to_string());
    rep.summarize("pass", passed);
    Ok(Outcome { report: rep, passed })
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-' { c } else { '_' }).collect()
}

pub fn gauduchon(m: &Manifold, modes: usize, tol: Option<f64>) -> Result<Outcome> {
    require_j(&m.chart)?;
    let mut opts = GauduchonOptions { max_modes: modes, ..GauduchonOptions::default() };
    if let Some(t) = tol {
        opts.tol = t;
    }
    let g = find_gauduchon_factor(&m.chart, &opts)?;
    let mut rep = Report::new(format!("Gauduchon search: {}", m.chart.name), &["iteration", "objective", "residual"]);
    for (i, (obj, res)) in g.history.iter().zip(&g.residual_history).enumerate() {
        rep.push(vec![i.into(), (*obj).into(), (*res).into()]);
    }
    let sup_amp = g.factor.modes.iter().map(|m| m.amplitude.norm()).fold(0.0, f64::max);
    rep.summarize("converged", g.converged);
    rep.summarize("residual", g.residual);
    rep.summarize("iterations", g.iterations);
    rep.summarize("modes", g.factor.modes.len());
    rep.summarize("largest_amplitude", sup_amp);
    rep.summarize("volume_before", g.volume_before);
    rep.summarize("volume_shift", g.volume_shift);
    Ok(Outcome { report: rep, passed: g.converged })
}

pub fn gamma(m: &Manifold, lambda: f64, mu: f64, nodes: usize, modes: usize) -> Result<Outcome> {
    require_j(&m.chart)?;
    let rule = match &m.entry {
        Some(e) => QuadratureRule::for_entry(e, nodes)?,
        None => QuadratureRule::for_chart(&m.chart, nodes)?,
    };
    let (value, factor) = match gamma_invariant(&m.chart, &rule, lambda, mu, None) {
        Ok(v) => (v, None),
        Err(GeomError::NonGauduchon(_)) => {
            let opts = GauduchonOptions { max_modes: modes, ..GauduchonOptions::default() };
            let g = find_gauduchon_factor(&m.chart, &opts)?;
            (gamma_invariant(&m.chart, &rule, lambda, mu, Some(&g.factor))?, Some(g))
        }
        Err(e) => return Err(e),
    };
    let mut rep = Report::new(
        format!("Gamma invariant: {}", m.chart.name),
        &["lambda", "mu", "gamma", "s1_integral", "s2_integral", "quadrature_error", "nodes"],
    );
    rep.push(vec![
        lambda.into(),
        mu.into(),
        value.value.into(),
        value.s1_integral.into(),
        value.s2_integral.into(),
        value.quadrature_error.into(),
        value.nodes.into(),
    ]);
    rep.summarize("volume_before", value.volume_before);
    rep.summarize("volume_shift", value.volume_shift);
    rep.summarize("lee_coclosed_residual", value.lee_coclosed_residual);
    rep.summarize("gauduchon_factor", factor.is_some());
    if let Some(g) = &factor {
        rep.summarize("gauduchon_residual", g.residual);
        rep.summarize("gauduchon_converged", g.converged);
    }
    let sign = if value.value.abs() <= value.quadrature_error { "indeterminate" } else if value.value > 0.0 { "positive" } else { "negative" };
    rep.summarize("sign", sign);
    Ok(Outcome { report: rep, passed: true })
}

pub fn berger(m: &Manifold, points: usize, samples: usize, seed: u64) -> Result<Outcome> {
    require_j(&m.chart)?;
    if samples < 2 {
        return Err(GeomError::InvalidParameter("Berger averaging needs at least 2 samples".into()));
    }
    let mut rep = Report::new(
        format!("Berger averaging: {}", m.chart.name),
        &["index", "point", "lhs", "rhs", "std_error", "z", "within"],
    );
    let mut passed = true;
    for (i, p) in sample_points(&m.chart, points, seed).into_iter().enumerate() {
        let pc = PointCurvature::at(&m.chart, &p, 2)?;
        let b = berger_from_point(&pc, samples, seed.wrapping_add(1 + i as u64))?;
        let within = b.within(BERGER_SIGMAS);
        passed &= within;
        let z = if b.std_error > 0.0 { (b.lhs - b.rhs).abs() / b.std_error } else { 0.0 };
        rep.push(vec![i.into(), p.into(), b.lhs.into(), b.rhs.into(), b.std_error.into(), z.into(), within.into()]);
    }
    rep.summarize("samples", samples);
    rep.summarize("sigmas", BERGER_SIGMAS);
    rep.summarize("pass", passed);
    Ok(Outcome { report: rep, passed })
}
