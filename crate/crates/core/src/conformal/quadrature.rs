//! Quadrature of `field · dV_g` over compact fundamental domains.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::catalog::CatalogEntry;
use crate::{ChartSpec, Domain, GeomError, Result};

use super::volume_density;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gauss_on(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (hi - lo);
    (x.iter().map(|t| lo + h * (t + 1.0)).collect(), w.iter().map(|v| v * h).collect())
}

fn trapezoid_on(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / n as f64;
    ((0..n).map(|m| lo + h * m as f64).collect(), vec![h; n])
}

/// Kind of product rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum RuleKind {
    /// Uniform trapezoid grid on a periodic box.
    Trapezoid,
    /// Gauss-Legendre on each axis of a box.
    GaussBox,
    /// Polar Gauss rule on the shell `1 ≤ |x| < 2` of `R⁴`.
    HopfShell,
}

/// Nodes and weights (without `√det g`) for a product rule.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub per_axis: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

fn tensor_rule(axes: &[(Vec<f64>, Vec<f64>)]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut nodes = vec![Vec::new()];
    let mut weights = vec![1.0];
    for (x, w) in axes {
        let mut nn = Vec::with_capacity(nodes.len() * x.len());
        let mut nw = Vec::with_capacity(nodes.len() * x.len());
        for (p, pw) in nodes.iter().zip(&weights) {
            for (xi, wi) in x.iter().zip(w) {
                let mut q = p.clone();
                q.push(*xi);
                nn.push(q);
                nw.push(pw * wi);
            }
        }
        nodes = nn;
        weights = nw;
    }
    (nodes, weights)
}

impl QuadratureRule {
    /// Rule for a chart whose domain is compact by itself (periodic box or shell).
    pub fn for_chart(chart: &ChartSpec, per_axis: usize) -> Result<QuadratureRule> {
        QuadratureRule::build(chart, false, per_axis)
    }

    /// Rule for a catalog entry; box charts declared compact use Gauss nodes.
    pub fn for_entry(entry: &CatalogEntry, per_axis: usize) -> Result<QuadratureRule> {
        if !entry.compact {
            return Err(GeomError::NonCompact(entry.name.to_string()));
        }
        QuadratureRule::build(&entry.chart, true, per_axis)
    }

    fn build(chart: &ChartSpec, compact_box: bool, per_axis: usize) -> Result<QuadratureRule> {
        if per_axis < 2 {
            return Err(GeomError::InvalidParameter("quadrature needs at least 2 nodes per axis".into()));
        }
        match &chart.domain {
            Domain::Box(axes) if axes.iter().all(|a| a.periodic) => {
                let parts: Vec<_> = axes.iter().map(|a| trapezoid_on(a.lo, a.hi, per_axis)).collect();
                let (nodes, weights) = tensor_rule(&parts);
                Ok(QuadratureRule { kind: RuleKind::Trapezoid, per_axis, nodes, weights })
            }
            Domain::Box(axes) if compact_box => {
                let parts: Vec<_> = axes.iter().map(|a| gauss_on(a.lo, a.hi, per_axis)).collect();
                let (nodes, weights) = tensor_rule(&parts);
                Ok(QuadratureRule { kind: RuleKind::GaussBox, per_axis, nodes, weights })
            }
            Domain::Shell { dim: 4, inner, outer } => {
                let parts = [
                    gauss_on(*inner, *outer, per_axis),
                    gauss_on(0.0, FRAC_PI_2, per_axis),
                    trapezoid_on(0.0, TAU, per_axis),
                    trapezoid_on(0.0, TAU, per_axis),
                ];
                let (polar, w) = tensor_rule(&parts);
                let mut nodes = Vec::with_capacity(polar.len());
                let mut weights = Vec::with_capacity(polar.len());
                for (q, wq) in polar.iter().zip(w) {
                    let (r, eta, a, b) = (q[0], q[1], q[2], q[3]);
                    let (se, ce) = eta.sin_cos();
                    nodes.push(vec![r * ce * a.cos(), r * ce * a.sin(), r * se * b.cos(), r * se * b.sin()]);
                    weights.push(wq * r.powi(3) * se * ce);
                }
                Ok(QuadratureRule { kind: RuleKind::HopfShell, per_axis, nodes, weights })
            }
            _ => Err(GeomError::NonCompact(chart.name.clone())),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same rule with half the nodes per axis.
    fn coarse(&self, chart: &ChartSpec) -> Result<QuadratureRule> {
        QuadratureRule::build(chart, self.kind == RuleKind::GaussBox, (self.per_axis / 2).max(2))
    }
}

/// Quadrature value with an error estimate from the half-resolution rule.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes: usize,
}

/// `∫ field · dV_g`. The field closure is called once per node of the rule
/// and of its half-resolution companion (trapezoid rules reuse the even nodes).
pub fn integrate(
    chart: &ChartSpec,
    rule: &QuadratureRule,
    mut field: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Integral> {
    let mut samples = Vec::with_capacity(rule.len());
    for p in &rule.nodes {
        samples.push(field(p)? * volume_density(chart, p)?);
    }
    let value: f64 = samples.iter().zip(&rule.weights).map(|(s, w)| s * w).sum();
    let coarse = if rule.kind == RuleKind::Trapezoid && rule.per_axis.is_multiple_of(2) {
        let d = rule.nodes[0].len();
        let n = rule.per_axis;
        let scale = (1u64 << d) as f64;
        let mut acc = 0.0;
        for (idx, (s, w)) in samples.iter().zip(&rule.weights).enumerate() {
            let mut rem = idx;
            let mut even = true;
            for _ in 0..d {
                even &= (rem % n).is_multiple_of(2);
                rem /= n;
            }
            if even {
                acc += s * w * scale;
            }
        }
        acc
    } else {
        let c = rule.coarse(chart)?;
        let mut acc = 0.0;
        for (p, w) in c.nodes.iter().zip(&c.weights) {
            acc += field(p)? * volume_density(chart, p)? * w;
        }
        acc
    };
    Ok(Integral { value, error_estimate: (value - coarse).abs(), nodes: rule.len() })
}
