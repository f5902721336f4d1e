#![allow(dead_code)]

use std::sync::Arc;

use ahg_core::geometry::{invert_jets, matmul_jets};
use ahg_core::{parse_expression, Axis, ChartSpec, Domain, Expr, FieldJets, FieldSource, Jet, Result};

/// Structure whose orthonormal adapted frame is the columns of `P(x)`:
/// `g = P^{-T} P^{-1}`, `J = P J0 P^{-1}`.
#[derive(Debug)]
pub struct FrameSource {
    pub dim: usize,
    pub p: Vec<Expr>,
}

impl FrameSource {
    pub fn generic(n: usize, eps: f64) -> FrameSource {
        let dim = 2 * n;
        let mut p = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                let a = 1 + (i + 2 * j) % dim;
                let b = 1 + (3 * i + j + 1) % dim;
                let src = format!(
                    "{} + {eps}*sin({}*x{a} + 0.3*x{b} + {}) + {}*x{b}*x{a}",
                    if i == j { 1.0 } else { 0.0 },
                    1.0 + 0.1 * (i as f64),
                    0.7 * j as f64,
                    0.05 * eps * ((i + j) % 3) as f64
                );
                p.push(parse_expression(&src, dim).unwrap());
            }
        }
        FrameSource { dim, p }
    }

    pub fn chart(self, name: &str) -> ChartSpec {
        let n = self.dim / 2;
        let domain = Domain::Box(vec![Axis::new(-1.0, 1.0, false); self.dim]);
        ChartSpec::from_source(name, n, domain, Arc::new(self)).unwrap()
    }
}

impl FieldSource for FrameSource {
    fn dim(&self) -> usize {
        self.dim
    }

    fn has_complex_structure(&self) -> bool {
        true
    }

    fn fields(&self, p: &[f64], order: usize) -> Result<FieldJets> {
        let dim = self.dim;
        let n = dim / 2;
        let pj = self.p.iter().map(|e| e.eval_jet(p, order)).collect::<Result<Vec<Jet>>>()?;
        let q = invert_jets(&pj, dim).expect("frame matrix invertible");
        let mut qt = q.clone();
        for i in 0..dim {
            for j in 0..dim {
                qt[i * dim + j] = q[j * dim + i].clone();
            }
        }
        let g = matmul_jets(&qt, &q, dim);
        let mut j0 = vec![Jet::zero(dim, order); dim * dim];
        for i in 0..n {
            j0[(n + i) * dim + i] = Jet::constant(dim, order, 1.0);
            j0[i * dim + n + i] = Jet::constant(dim, order, -1.0);
        }
        let j = matmul_jets(&matmul_jets(&pj, &j0, dim), &q, dim);
        Ok(FieldJets { g, j: Some(j) })
    }
}

pub fn point(dim: usize, seed: f64) -> Vec<f64> {
    (0..dim).map(|i| 0.3 * ((i as f64 + 1.0) * seed).sin()).collect()
}

pub fn expr_chart(name: &str, n: usize, axes: Vec<Axis>, g: &[&str], j: Option<&[&str]>) -> ChartSpec {
    let dim = 2 * n;
    let g = g.iter().map(|s| parse_expression(s, dim).unwrap()).collect();
    let j = j.map(|j| j.iter().map(|s| parse_expression(s, dim).unwrap()).collect());
    ChartSpec::from_exprs(name, n, Domain::Box(axes), g, j).unwrap()
}
