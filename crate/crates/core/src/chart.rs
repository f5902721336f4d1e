//! Coordinate charts carrying a metric and an almost complex structure.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jet::{Jet, MAX_ORDER};

/// Metric and complex-structure jets at a point. `g[i*dim+j] = g_{ij}` and
/// `j[i*dim+k] = J^i_k`, so `J ∂_k = J^i_k ∂_i`.
#[derive(Debug, Clone)]
pub struct FieldJets {
    pub g: Vec<Jet>,
    pub j: Option<Vec<Jet>>,
}

/// Component functions computed by code rather than read from expressions.
pub trait FieldSource: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn has_complex_structure(&self) -> bool;
    /// Highest jet order this source can deliver.
    fn max_order(&self) -> usize {
        MAX_ORDER
    }
    fn fields(&self, p: &[f64], order: usize) -> Result<FieldJets>;
}

#[derive(Debug, Clone)]
pub enum Components {
    Expr { g: Vec<Expr>, j: Option<Vec<Expr>> },
    Derived(Arc<dyn FieldSource>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, periodic: bool) -> Axis {
        Axis { lo, hi, periodic }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Product of intervals, each optionally periodic.
    Box(Vec<Axis>),
    /// `inner ≤ |x| < outer` in `R^dim`.
    Shell { dim: usize, inner: f64, outer: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box(axes) => axes.len(),
            Domain::Shell { dim, .. } => *dim,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Domain::Box(axes) if axes.iter().all(|a| a.periodic))
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Domain::Box(axes) => axes.iter().zip(p).all(|(a, &x)| x >= a.lo && x <= a.hi),
            Domain::Shell { inner, outer, .. } => {
                let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                r >= *inner && r <= *outer
            }
        }
    }

    /// Random interior point. Non-periodic box axes keep a 5% margin from
    /// their ends so sampled points stay away from chart boundaries.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Domain::Box(axes) => axes
                .iter()
                .map(|a| {
                    let m = if a.periodic { 0.0 } else { 0.05 * a.width() };
                    a.lo + m + rng.gen::<f64>() * (a.width() - 2.0 * m)
                })
                .collect(),
            Domain::Shell { dim, inner, outer } => {
                let v: Vec<f64> = (0..*dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let r = inner + rng.gen::<f64>() * (outer - inner);
                v.iter().map(|x| r * x / norm).collect()
            }
        }
    }
}

/// A chart of real dimension `2n` with metric components and, optionally, an
/// almost complex structure.
#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub name: String,
    pub n: usize,
    pub domain: Domain,
    pub components: Components,
    /// Whether the complex structure is known to be integrable.
    pub integrable: Option<bool>,
}

/// Pointwise residuals of the chart invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub symmetry: f64,
    pub min_eigenvalue: f64,
    pub j_squared: f64,
    pub compatibility: f64,
}

impl InvariantReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.symmetry <= tol && self.min_eigenvalue > 0.0 && self.j_squared <= tol && self.compatibility <= tol
    }
}

impl ChartSpec {
    pub fn from_exprs(name: &str, n: usize, domain: Domain, g: Vec<Expr>, j: Option<Vec<Expr>>) -> Result<ChartSpec> {
        let dim = 2 * n;
        if domain.dim() != dim {
            return Err(GeomError::InvalidChart(format!("domain has dimension {}, expected {dim}", domain.dim())));
        }
        if g.len() != dim * dim || j.as_ref().is_some_and(|j| j.len() != dim * dim) {
            return Err(GeomError::InvalidChart(format!("component matrices must be {dim}x{dim}")));
        }
        for e in g.iter().chain(j.iter().flatten()) {
            if let Some(m) = e.max_var() {
                if m >= dim {
                    return Err(GeomError::VariableOutOfRange { index: m + 1, dim });
                }
            }
        }
        Ok(ChartSpec { name: name.to_string(), n, domain, components: Components::Expr { g, j }, integrable: None })
    }

    pub fn from_source(name: &str, n: usize, domain: Domain, source: Arc<dyn FieldSource>) -> Result<ChartSpec> {
        if source.dim() != 2 * n || domain.dim() != 2 * n {
            return Err(GeomError::InvalidChart("source and domain dimensions disagree".into()));
        }
        Ok(ChartSpec { name: name.to_string(), n, domain, components: Components::Derived(source), integrable: None })
    }

    pub fn with_integrable(mut self, flag: bool) -> ChartSpec {
        self.integrable = Some(flag);
        self
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn has_complex_structure(&self) -> bool {
        match &self.components {
            Components::Expr { j, .. } => j.is_some(),
            Components::Derived(s) => s.has_complex_structure(),
        }
    }

    pub fn max_order(&self) -> usize {
        match &self.components {
            Components::Expr { .. } => MAX_ORDER,
            Components::Derived(s) => s.max_order(),
        }
    }

    /// Jets of `g` and `J` at `p`.
    pub fn fields(&self, p: &[f64], order: usize) -> Result<FieldJets> {
        if order > MAX_ORDER {
            return Err(GeomError::OrderOverflow(order));
        }
        if order > self.max_order() {
            return Err(GeomError::InsufficientJets { needed: order, have: self.max_order() });
        }
        if p.len() != self.dim() {
            return Err(GeomError::InvalidParameter(format!(
                "point has {} coordinates, chart `{}` has dimension {}",
                p.len(),
                self.name,
                self.dim()
            )));
        }
        match &self.components {
            Components::Expr { g, j } => {
                let g = g.iter().map(|e| e.eval_jet(p, order)).collect::<Result<Vec<_>>>()?;
                let j = match j {
                    Some(j) => Some(j.iter().map(|e| e.eval_jet(p, order)).collect::<Result<Vec<_>>>()?),
                    None => None,
                };
                Ok(FieldJets { g, j })
            }
            Components::Derived(s) => s.fields(p, order),
        }
    }

    pub fn check_invariants(&self, p: &[f64]) -> Result<InvariantReport> {
        let dim = self.dim();
        let f = self.fields(p, 0)?;
        let g: Vec<f64> = f.g.iter().map(Jet::value).collect();
        let gm = nalgebra::DMatrix::from_row_slice(dim, dim, &g);
        let symmetry = (&gm - gm.transpose()).abs().max();
        let min_eigenvalue = gm.clone().symmetric_eigen().eigenvalues.min();
        let (j_squared, compatibility) = match &f.j {
            Some(j) => {
                let jv: Vec<f64> = j.iter().map(Jet::value).collect();
                let jm = nalgebra::DMatrix::from_row_slice(dim, dim, &jv);
                let sq = (&jm * &jm + nalgebra::DMatrix::identity(dim, dim)).abs().max();
                let comp = (jm.transpose() * &gm * &jm - &gm).abs().max();
                (sq, comp)
            }
            None => (0.0, 0.0),
        };
        Ok(InvariantReport { symmetry, min_eigenvalue, j_squared, compatibility })
    }
}
