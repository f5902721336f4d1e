//! Built-in charts with known Gray-Hervella classes and reference scalars,
//! plus the custom chart file format.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use crate::chart::{Axis, ChartSpec, Domain};
use crate::error::{GeomError, Result};
use crate::expr::{parse_expression, Expr};

/// Reference value of a scalar that is constant on the chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedScalar {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    /// Construction and the origin of every expected value.
    pub description: &'static str,
    pub chart: ChartSpec,
    /// Expected vanishing pattern of `((dF)⁻, N⁰, (dF)₀⁺, α)`.
    pub expected_vanishing: Option<[bool; 4]>,
    pub expected_scalars: Vec<ExpectedScalar>,
    /// Whether the chart domain is a fundamental domain of a compact quotient.
    pub compact: bool,
    /// Point where a non-integrable structure has a large Nijenhuis tensor.
    pub witness: Vec<f64>,
}

/// Names accepted by [`load`].
pub const CATALOG_NAMES: [&str; 9] = [
    "t4_kahler",
    "t4_perturbed",
    "kodaira_thurston",
    "iwasawa",
    "hopf_surface",
    "s6_nearly_kahler",
    "s4_round",
    "h4_hyperbolic",
    "t4_flat_base",
];

pub const T4_PERTURBATION: f64 = 0.05;

fn c(v: f64) -> Expr {
    Expr::constant(v)
}

fn is_zero(e: &Expr) -> bool {
    e.as_constant() == Some(0.0)
}

fn add(a: &Expr, b: &Expr) -> Expr {
    if is_zero(a) {
        b.clone()
    } else if is_zero(b) {
        a.clone()
    } else {
        a + b
    }
}

fn mul(a: &Expr, b: &Expr) -> Expr {
    match (a.as_constant(), b.as_constant()) {
        (Some(0.0), _) => c(0.0),
        (_, Some(0.0)) => c(0.0),
        (Some(1.0), _) => b.clone(),
        (_, Some(1.0)) => a.clone(),
        (Some(x), Some(y)) => c(x * y),
        _ => a * b,
    }
}

fn parse_matrix(rows: &[&str], dim: usize) -> Vec<Expr> {
    rows.iter()
        .flat_map(|r| r.split(',').map(|s| parse_expression(s.trim(), dim).expect("catalog expression")))
        .collect()
}

/// `J ∂_i = ∂_{n+i}`.
pub fn standard_j(n: usize) -> Vec<Expr> {
    let dim = 2 * n;
    let mut j = vec![c(0.0); dim * dim];
    for i in 0..n {
        j[(n + i) * dim + i] = c(1.0);
        j[i * dim + n + i] = c(-1.0);
    }
    j
}

fn conformal_metric(dim: usize, factor: Expr) -> Vec<Expr> {
    let mut g = vec![c(0.0); dim * dim];
    for i in 0..dim {
        g[i * dim + i] = factor.clone();
    }
    g
}

fn r2(dim: usize) -> Expr {
    (0..dim).map(Expr::var).fold(c(0.0), |acc, x| add(&acc, &(&x * &x)))
}

/// Left-invariant structure from a coframe `C` (`C[a][i] = e^a(∂_i)`) and its
/// dual frame `E` (`E[i][a] = e_a^i`): `g = CᵀC`, `J = E J0 C` where `J0`
/// sends `e_a` to `e_{n+a}`.
pub fn left_invariant(n: usize, coframe: &[Expr], frame: &[Expr]) -> (Vec<Expr>, Vec<Expr>) {
    let dim = 2 * n;
    let mut g = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = c(0.0);
            for a in 0..dim {
                acc = add(&acc, &mul(&coframe[a * dim + i], &coframe[a * dim + j]));
            }
            g.push(acc);
        }
    }
    let j0 = standard_j(n);
    let mut j = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for k in 0..dim {
            let mut acc = c(0.0);
            for a in 0..dim {
                for b in 0..dim {
                    let w = j0[a * dim + b].as_constant().unwrap();
                    if w != 0.0 {
                        acc = add(&acc, &mul(&c(w), &mul(&frame[i * dim + a], &coframe[b * dim + k])));
                    }
                }
            }
            j.push(acc);
        }
    }
    (g, j)
}

fn torus_axes(dim: usize) -> Vec<Axis> {
    vec![Axis::new(0.0, TAU, true); dim]
}

fn entry(
    name: &str,
    description: &'static str,
    chart: ChartSpec,
    vanishing: Option<[bool; 4]>,
    scalars: &[(&'static str, f64)],
    compact: bool,
    witness: Vec<f64>,
) -> CatalogEntry {
    CatalogEntry {
        name: name.to_string(),
        description,
        chart,
        expected_vanishing: vanishing,
        expected_scalars: scalars.iter().map(|&(name, value)| ExpectedScalar { name, value }).collect(),
        compact,
        witness,
    }
}

const KAHLER: [bool; 4] = [true, true, true, true];
const W1: [bool; 4] = [false, true, true, true];
const W2: [bool; 4] = [true, false, true, true];
const W3: [bool; 4] = [true, true, false, true];
const W4: [bool; 4] = [true, true, true, false];

fn t4_kahler(name: &str) -> Result<CatalogEntry> {
    let chart = ChartSpec::from_exprs(name, 2, Domain::Box(torus_axes(4)), conformal_metric(4, c(1.0)), Some(standard_j(2)))?
        .with_integrable(true);
    Ok(entry(
        name,
        "Flat torus R^4/(2πZ)^4 with the standard complex structure; Kähler and flat, so every curvature scalar is 0.",
        chart,
        Some(KAHLER),
        &[("s", 0.0), ("s_J", 0.0), ("S1", 0.0), ("S2", 0.0)],
        true,
        vec![1.0; 4],
    ))
}

fn t4_perturbed() -> Result<CatalogEntry> {
    let f = (c(2.0 * T4_PERTURBATION) * Expr::var(0).sin()).exp();
    let chart = ChartSpec::from_exprs(
        "t4_perturbed",
        2,
        Domain::Box(torus_axes(4)),
        conformal_metric(4, f),
        Some(standard_j(2)),
    )?
    .with_integrable(true);
    Ok(entry(
        "t4_perturbed",
        "Torus metric exp(2ε sin x1)δ with ε = 0.05 and the standard complex structure: globally conformal to the flat Kähler metric, hence class W4.",
        chart,
        Some(W4),
        &[],
        true,
        vec![1.0; 4],
    ))
}

fn kodaira_thurston() -> Result<CatalogEntry> {
    let dim = 4;
    let coframe = parse_matrix(&["1, 0, 0, 0", "0, 1, 0, 0", "0, -x1, 1, 0", "0, 0, 0, 1"], dim);
    let frame = parse_matrix(&["1, 0, 0, 0", "0, 1, 0, 0", "0, x1, 1, 0", "0, 0, 0, 1"], dim);
    let (g, j) = left_invariant(2, &coframe, &frame);
    let axes = vec![Axis::new(0.0, 1.0, false); 4];
    let chart = ChartSpec::from_exprs("kodaira_thurston", 2, Domain::Box(axes), g, Some(j))?.with_integrable(false);
    Ok(entry(
        "kodaira_thurston",
        "Kodaira-Thurston nilmanifold on the fundamental box [0,1]^4 with orthonormal coframe dx1, dx2, dx3 − x1 dx2, dx4 and J e1 = e3, J e2 = e4. F = e1∧e3 + e2∧e4 is closed and J is not integrable: class W2. Scalar curvature −1/2 from the nilpotent Lie algebra formula s = −¼Σ(c^k_ij)^2 over ordered pairs.",
        chart,
        Some(W2),
        &[("s", -0.5)],
        true,
        vec![0.3, 0.2, 0.1, 0.4],
    ))
}

fn iwasawa() -> Result<CatalogEntry> {
    let dim = 6;
    // x = (Re z1, Re z2, Re z3, Im z1, Im z2, Im z3); dz3 − z1 dz2 gives e3 and e6
    let coframe = parse_matrix(
        &[
            "1, 0, 0, 0, 0, 0",
            "0, 1, 0, 0, 0, 0",
            "0, -x1, 1, 0, x4, 0",
            "0, 0, 0, 1, 0, 0",
            "0, 0, 0, 0, 1, 0",
            "0, -x4, 0, 0, -x1, 1",
        ],
        dim,
    );
    let frame = parse_matrix(
        &[
            "1, 0, 0, 0, 0, 0",
            "0, 1, 0, 0, 0, 0",
            "0, x1, 1, 0, -x4, 0",
            "0, 0, 0, 1, 0, 0",
            "0, 0, 0, 0, 1, 0",
            "0, x4, 0, 0, x1, 1",
        ],
        dim,
    );
    let (g, j) = left_invariant(3, &coframe, &frame);
    let axes = vec![Axis::new(0.0, 1.0, false); 6];
    let chart = ChartSpec::from_exprs("iwasawa", 3, Domain::Box(axes), g, Some(j))?.with_integrable(true);
    Ok(entry(
        "iwasawa",
        "Iwasawa manifold on the fundamental box [0,1]^6 with the orthonormal coframe given by the real and imaginary parts of dz1, dz2, dz3 − z1 dz2. The complex structure is integrable and the metric balanced: class W3. Scalar curvature −2 from s = −¼Σ(c^k_ij)^2 over ordered pairs.",
        chart,
        Some(W3),
        &[("s", -2.0)],
        true,
        vec![0.3, 0.2, 0.1, 0.4, 0.5, 0.6],
    ))
}

fn hopf_surface() -> Result<CatalogEntry> {
    let g = conformal_metric(4, r2(4).powi(-1));
    let domain = Domain::Shell { dim: 4, inner: 1.0, outer: 2.0 };
    let chart = ChartSpec::from_exprs("hopf_surface", 2, domain, g, Some(standard_j(2)))?.with_integrable(true);
    Ok(entry(
        "hopf_surface",
        "Hopf surface (C^2∖0)/(z ~ 2z) with metric δ/|z|^2 on the shell 1 ≤ |z| < 2 and the standard complex structure. Locally conformally Kähler: class W4. The metric is the product R × S^3(1), so s = 6.",
        chart,
        Some(W4),
        &[("s", 6.0)],
        true,
        vec![1.2, 0.3, -0.4, 0.5],
    ))
}

/// Octonion cross-product triples `e_i × e_j = e_k` (1-based, cyclic).
pub const FANO_TRIPLES: [[usize; 3]; 7] =
    [[1, 2, 3], [1, 4, 5], [1, 7, 6], [2, 4, 6], [2, 5, 7], [3, 4, 7], [3, 6, 5]];

/// `(a × b)_k` for vectors in `R^7`.
pub fn cross7<T: Clone>(
    a: &[T],
    b: &[T],
    add: impl Fn(&T, &T) -> T,
    sub: impl Fn(&T, &T) -> T,
    mul: impl Fn(&T, &T) -> T,
) -> Vec<T> {
    let mut out: Vec<Option<T>> = vec![None; 7];
    for t in FANO_TRIPLES {
        for r in 0..3 {
            let (i, j, k) = (t[r] - 1, t[(r + 1) % 3] - 1, t[(r + 2) % 3] - 1);
            let term = sub(&mul(&a[i], &b[j]), &mul(&a[j], &b[i]));
            out[k] = Some(match out[k].take() {
                None => term,
                Some(acc) => add(&acc, &term),
            });
        }
    }
    out.into_iter().map(|x| x.expect("every index appears in a triple")).collect()
}

fn s6_nearly_kahler() -> Result<CatalogEntry> {
    let dim = 6;
    let x: Vec<Expr> = (0..dim).map(Expr::var).collect();
    let s = add(&c(1.0), &r2(dim));
    let s_inv = s.powi(-1);
    let s_inv2 = s.powi(-2);
    let mut p: Vec<Expr> = x.iter().map(|xi| mul(&c(2.0), &mul(xi, &s_inv))).collect();
    p.push(mul(&add(&r2(dim), &c(-1.0)), &s_inv));
    // dp[j][i] = ∂_j p_i
    let mut dp = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut col = Vec::with_capacity(7);
        for i in 0..dim {
            let mut e = mul(&c(-4.0), &mul(&mul(&x[i], &x[j]), &s_inv2));
            if i == j {
                e = add(&e, &mul(&c(2.0), &s_inv));
            }
            col.push(e);
        }
        col.push(mul(&c(4.0), &mul(&x[j], &s_inv2)));
        dp.push(col);
    }
    let sub = |a: &Expr, b: &Expr| if is_zero(b) { a.clone() } else { a - b };
    let quarter_s2 = mul(&c(0.25), &s.powi(2));
    let mut j = vec![c(0.0); dim * dim];
    for jj in 0..dim {
        let pxd = cross7(&p, &dp[jj], add, sub, mul);
        for i in 0..dim {
            let mut acc = c(0.0);
            for k in 0..7 {
                acc = add(&acc, &mul(&dp[i][k], &pxd[k]));
            }
            j[i * dim + jj] = mul(&quarter_s2, &acc);
        }
    }
    let g = conformal_metric(dim, mul(&c(4.0), &s_inv2));
    let axes = vec![Axis::new(-1.5, 1.5, false); dim];
    let chart = ChartSpec::from_exprs("s6_nearly_kahler", 3, Domain::Box(axes), g, Some(j))?.with_integrable(false);
    Ok(entry(
        "s6_nearly_kahler",
        "Round unit S^6 in a stereographic chart with J_p(X) = p × X from the octonion cross product: nearly Kähler, class W1. Constant curvature 1 gives s = 30 and s_J = 2n = 6.",
        chart,
        Some(W1),
        &[("s", 30.0), ("s_J", 6.0)],
        false,
        vec![0.3, -0.2, 0.1, 0.4, -0.5, 0.2],
    ))
}

fn s4_round() -> Result<CatalogEntry> {
    let g = conformal_metric(4, mul(&c(4.0), &add(&c(1.0), &r2(4)).powi(-2)));
    let axes = vec![Axis::new(-3.0, 3.0, false); 4];
    let chart = ChartSpec::from_exprs("s4_round", 2, Domain::Box(axes), g, Some(standard_j(2)))?.with_integrable(true);
    Ok(entry(
        "s4_round",
        "Round unit S^4 in a stereographic chart, with the orthogonal complex structure of the conformally flat chart (class W4). Constant curvature 1 gives s = 12 and s_J = 4.",
        chart,
        Some(W4),
        &[("s", 12.0), ("s_J", 4.0)],
        false,
        vec![0.3, 0.2, -0.1, 0.4],
    ))
}

fn h4_hyperbolic() -> Result<CatalogEntry> {
    let g = conformal_metric(4, mul(&c(4.0), &add(&c(1.0), &mul(&c(-1.0), &r2(4))).powi(-2)));
    let axes = vec![Axis::new(-0.45, 0.45, false); 4];
    let chart = ChartSpec::from_exprs("h4_hyperbolic", 2, Domain::Box(axes), g, Some(standard_j(2)))?.with_integrable(true);
    Ok(entry(
        "h4_hyperbolic",
        "Hyperbolic 4-space in the Poincaré ball chart, with the orthogonal complex structure of the conformally flat chart (class W4). Constant curvature −1 gives s = −12 and s_J = −4.",
        chart,
        Some(W4),
        &[("s", -12.0), ("s_J", -4.0)],
        false,
        vec![0.1, 0.2, -0.1, 0.15],
    ))
}

pub fn load(name: &str) -> Result<CatalogEntry> {
    match name {
        "t4_kahler" => t4_kahler("t4_kahler"),
        "t4_flat_base" => t4_kahler("t4_flat_base"),
        "t4_perturbed" => t4_perturbed(),
        "kodaira_thurston" => kodaira_thurston(),
        "iwasawa" => iwasawa(),
        "hopf_surface" => hopf_surface(),
        "s6_nearly_kahler" => s6_nearly_kahler(),
        "s4_round" => s4_round(),
        "h4_hyperbolic" => h4_hyperbolic(),
        _ => Err(GeomError::UnknownManifold(name.to_string())),
    }
}

/// Reads a chart file with sections `[meta]`, `[domain]`, `[metric]` and an
/// optional `[J]`.
pub fn load_custom(path: &Path) -> Result<CatalogEntry> {
    let text = fs::read_to_string(path)?;
    parse_custom(&text)
}

pub fn parse_custom(text: &str) -> Result<CatalogEntry> {
    let mut section = String::new();
    let mut n: Option<usize> = None;
    let mut name = "custom".to_string();
    let mut integrable = None;
    let mut domain_lines = Vec::new();
    let mut metric_lines = Vec::new();
    let mut j_lines = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            continue;
        }
        let bad = |msg: &str| GeomError::Format(format!("line {}: {msg}", lineno + 1));
        match section.as_str() {
            "meta" => {
                let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
                let v = v.trim().trim_matches('"');
                match k.trim() {
                    "n" => n = Some(v.parse().map_err(|_| bad("n must be a positive integer"))?),
                    "name" => name = v.to_string(),
                    "integrable" => integrable = Some(v.parse().map_err(|_| bad("integrable must be true or false"))?),
                    other => return Err(bad(&format!("unknown meta key `{other}`"))),
                }
            }
            "domain" => domain_lines.push((lineno + 1, line.to_string())),
            "metric" => metric_lines.push(line.to_string()),
            "J" => j_lines.push(line.to_string()),
            "" => return Err(bad("content before the first section")),
            other => return Err(bad(&format!("unknown section [{other}]"))),
        }
    }
    let n = n.filter(|&n| n >= 1).ok_or_else(|| GeomError::Format("[meta] must set n ≥ 1".into()))?;
    let dim = 2 * n;
    if domain_lines.len() != dim {
        return Err(GeomError::Format(format!("[domain] needs {dim} axis lines, found {}", domain_lines.len())));
    }
    let mut axes = Vec::with_capacity(dim);
    for (lineno, l) in &domain_lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        let num = |s: &str| -> Result<f64> {
            let e = parse_expression(s, 0)
                .map_err(|e| GeomError::Format(format!("line {lineno}: bad axis bound `{s}`: {e}")))?;
            e.eval(&[])
        };
        let periodic = match toks.get(2) {
            None => false,
            Some(&"periodic") => true,
            Some(t) => return Err(GeomError::Format(format!("line {lineno}: unexpected token `{t}`"))),
        };
        if toks.len() < 2 || toks.len() > 3 {
            return Err(GeomError::Format(format!("line {lineno}: expected `lo hi [periodic]`")));
        }
        let (lo, hi) = (num(toks[0])?, num(toks[1])?);
        if !(hi > lo) {
            return Err(GeomError::Format(format!("line {lineno}: empty interval")));
        }
        axes.push(Axis::new(lo, hi, periodic));
    }
    let matrix = |lines: &[String], what: &str| -> Result<Vec<Expr>> {
        if lines.len() != dim {
            return Err(GeomError::Format(format!("[{what}] needs {dim} rows, found {}", lines.len())));
        }
        let mut out = Vec::with_capacity(dim * dim);
        for l in lines {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != dim {
                return Err(GeomError::Format(format!("[{what}] rows need {dim} entries: `{l}`")));
            }
            for cell in cells {
                out.push(parse_expression(cell.trim(), dim)?);
            }
        }
        Ok(out)
    };
    let g = matrix(&metric_lines, "metric")?;
    let j = if j_lines.is_empty() { None } else { Some(matrix(&j_lines, "J")?) };
    let mut chart = ChartSpec::from_exprs(&name, n, Domain::Box(axes), g, j)?;
    chart.integrable = integrable;
    let compact = chart.domain.is_torus();
    Ok(CatalogEntry {
        name,
        description: "User supplied chart file.",
        chart,
        expected_vanishing: None,
        expected_scalars: Vec::new(),
        compact,
        witness: Vec::new(),
    })
}
