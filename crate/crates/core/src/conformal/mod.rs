//! Conformal changes `g̃ = e^{2f} g` with `J` fixed: scaled charts, the
//! Chern Laplacian, conformal variation of the Chern scalars, global
//! quadrature, Gauduchon factors, the mixed invariant Γ and the spectral
//! solve of the mixed equation on tori.

pub mod gauduchon;
pub mod grid;
pub mod quadrature;
pub mod solver;

use std::fmt;
use std::sync::Arc;

use crate::curvature::{chern_laplacian_routes, probe_function, IdentityResidual, PointCurvature};
use crate::tensor;
use crate::{ChartSpec, Expr, FieldJets, FieldSource, GeomError, Jet, Result};

pub use gauduchon::{find_gauduchon_factor, GauduchonOptions, GauduchonResult};
pub use grid::{SpectralGrid, TrigMode, TrigSum};
pub use quadrature::{gauss_legendre, integrate, Integral, QuadratureRule};
pub use solver::{gamma_invariant, solve_mixed_equation, GammaInvariant, MixedSolution, SolveOptions};

/// A smooth real function on a chart, evaluated through its jets.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet>;

    fn value(&self, p: &[f64]) -> Result<f64> {
        Ok(self.jet(p, 0)?.value())
    }
}

impl ScalarField for Expr {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        self.eval_jet(p, order)
    }
}

impl ScalarField for TrigSum {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        TrigSum::jet(self, p, order)
    }
}

impl ScalarField for SpectralGrid {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        self.jet_at(p, order)
    }
}

/// Pointwise sum of fields.
#[derive(Debug, Clone)]
pub struct SumField(pub Vec<Arc<dyn ScalarField>>);

impl ScalarField for SumField {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        let mut parts = self.0.iter();
        let mut acc = match parts.next() {
            Some(f) => f.jet(p, order)?,
            None => Jet::zero(p.len(), order),
        };
        for f in parts {
            acc += &f.jet(p, order)?;
        }
        Ok(acc)
    }
}

/// Metric `e^{2f} g` over a base chart, same `J`.
#[derive(Debug)]
pub struct ScaledSource {
    base: ChartSpec,
    f: Arc<dyn ScalarField>,
}

impl FieldSource for ScaledSource {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn has_complex_structure(&self) -> bool {
        self.base.has_complex_structure()
    }

    fn max_order(&self) -> usize {
        self.base.max_order()
    }

    fn fields(&self, p: &[f64], order: usize) -> Result<FieldJets> {
        let FieldJets { g, j } = self.base.fields(p, order)?;
        let e = (self.f.jet(p, order)? * 2.0).exp();
        Ok(FieldJets { g: g.iter().map(|x| x * &e).collect(), j })
    }
}

/// A base chart, a conformal exponent `f` and the scaled chart `e^{2f} g`.
#[derive(Debug, Clone)]
pub struct ConformalPair {
    pub base: ChartSpec,
    pub f: Arc<dyn ScalarField>,
    pub scaled: ChartSpec,
}

pub fn scale_chart(chart: &ChartSpec, f: Arc<dyn ScalarField>) -> ConformalPair {
    let source = ScaledSource { base: chart.clone(), f: f.clone() };
    let scaled = ChartSpec {
        name: format!("{}*e^(2f)", chart.name),
        n: chart.n,
        domain: chart.domain.clone(),
        components: crate::Components::Derived(Arc::new(source)),
        integrable: chart.integrable,
    };
    ConformalPair { base: chart.clone(), f, scaled }
}

impl ConformalPair {
    /// `e^{2nf}`, the ratio of volume elements.
    pub fn volume_ratio(&self, p: &[f64]) -> Result<f64> {
        Ok((2.0 * self.base.n as f64 * self.f.value(p)?).exp())
    }

    /// `α̃ − α − 2(n−1) df`, sup norm over components.
    pub fn lee_transform_residual(&self, p: &[f64]) -> Result<IdentityResidual> {
        let base = PointCurvature::at(&self.base, p, 2)?;
        let scaled = PointCurvature::at(&self.scaled, p, 2)?;
        let f = self.f.jet(p, 1)?;
        Ok(lee_transform(&base, &scaled, &f))
    }
}

fn lee_transform(base: &PointCurvature, scaled: &PointCurvature, f: &Jet) -> IdentityResidual {
    let dim = base.dim();
    let c = 2.0 * (base.n() as f64 - 1.0);
    let a = tensor::values(&base.herm.alpha);
    let at = tensor::values(&scaled.herm.alpha);
    let rhs: Vec<f64> = (0..dim).map(|i| a[i] + c * f.gradient(i)).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    IdentityResidual::new("lee_transform", &base.geo.point, norm(&at), norm(&rhs), tensor::max_abs_diff(&at, &rhs))
}

/// The three expressions of the Chern Laplacian at a point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ChernLaplacian {
    /// `−2 Σ (D df)(u_i, ū_i)` with the Chern connection.
    pub chern: f64,
    /// `Δf + ⟨α, df⟩`.
    pub hodge: f64,
    /// `−⟨d J df, F⟩`.
    pub djdf: f64,
}

impl ChernLaplacian {
    pub fn residual(&self) -> f64 {
        (self.chern - self.hodge).abs().max((self.chern - self.djdf).abs()).max((self.hodge - self.djdf).abs())
    }
}

pub fn chern_laplacian(chart: &ChartSpec, f: &dyn ScalarField, p: &[f64]) -> Result<ChernLaplacian> {
    let pc = PointCurvature::at(chart, p, 2)?;
    let fj = f.jet(p, 2)?;
    let [chern, hodge, djdf] = chern_laplacian_routes(&pc, &fj)?;
    Ok(ChernLaplacian { chern, hodge, djdf })
}

/// Names of the residuals returned by [`conformal_scalar_residuals`].
pub const CONFORMAL_RESIDUAL_IDS: [&str; 5] = [
    "chern_s1_conformal",
    "chern_s2_conformal",
    "lee_codifferential_conformal",
    "lee_transform",
    "chern_laplacian_covariance",
];

/// Conformal variation of `S₁`, `S₂`, of `δα`, of the Lee form, and of the
/// Chern Laplacian, with the scaled side computed directly on the scaled chart.
pub fn conformal_scalar_residuals(pair: &ConformalPair, p: &[f64]) -> Result<Vec<IdentityResidual>> {
    let base = PointCurvature::at(&pair.base, p, 2)?;
    let scaled = PointCurvature::at(&pair.scaled, p, 2)?;
    let dim = base.dim();
    let n = base.n() as f64;
    let f = pair.f.jet(p, 2)?;
    let e2f = (2.0 * f.value()).exp();

    let lap_f = chern_laplacian_routes(&base, &f)?[0];
    let (s1, s2) = base.chern_scalars();
    let (t1, t2) = scaled.chern_scalars();

    let ginv = base.geo.ginv_values();
    let alpha = tensor::values(&base.herm.alpha);
    let mut df_alpha = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            df_alpha += ginv[i * dim + j] * f.gradient(i) * alpha[j];
        }
    }
    let delta = base.geo.codifferential(&base.herm.alpha, 1)[0].value();
    let delta_scaled = scaled.geo.codifferential(&base.herm.alpha, 1)[0].value();

    let v = probe_function(dim).eval_jet(p, 2)?;
    let lap_v = chern_laplacian_routes(&base, &v)?[0];
    let lap_v_scaled = chern_laplacian_routes(&scaled, &v)?[0];

    Ok(vec![
        IdentityResidual::scalar("chern_s1_conformal", p, e2f * t1, s1 + n * lap_f),
        IdentityResidual::scalar("chern_s2_conformal", p, e2f * t2, s2 + lap_f),
        IdentityResidual::scalar(
            "lee_codifferential_conformal",
            p,
            delta_scaled,
            (delta - (2.0 * n - 2.0) * df_alpha) / e2f,
        ),
        lee_transform(&base, &scaled, &f),
        IdentityResidual::scalar("chern_laplacian_covariance", p, lap_v_scaled, lap_v / e2f),
    ])
}

/// Pointwise curvature budget behind the total Chern scalar curvature: on
/// structures with `(dF)⁻ = 0`,
/// `e^{−2f}(½s + |N⁰|²/16 + ¼|(dF)⁺|² − ½δα) = e^{−2f} S₁`.
pub fn budget_integrand_residual(pair: &ConformalPair, p: &[f64]) -> Result<IdentityResidual> {
    let pc = PointCurvature::at(&pair.base, p, 2)?;
    let m = pc.budget.norms;
    if m.df_minus.sqrt() > 1e-8 {
        return Err(GeomError::NotApplicable {
            id: "budget_integrand".into(),
            reason: format!("(dF)⁻ does not vanish on chart `{}`", pair.base.name),
        });
    }
    let w = (-2.0 * pair.f.value(p)?).exp();
    let lhs = w * (0.5 * pc.scalar() + m.n0 / 16.0 + 0.25 * m.df_plus - 0.5 * pc.budget.delta_alpha);
    let rhs = w * pc.chern_scalars().0;
    Ok(IdentityResidual::scalar("budget_integrand", p, lhs, rhs))
}

/// `√det g` at a point.
pub fn volume_density(chart: &ChartSpec, p: &[f64]) -> Result<f64> {
    let dim = chart.dim();
    let g: Vec<f64> = chart.fields(p, 0)?.g.iter().map(Jet::value).collect();
    let det = nalgebra::DMatrix::from_row_slice(dim, dim, &g).determinant();
    if det <= 0.0 {
        return Err(GeomError::SingularMetric { point: p.to_vec(), eigenvalue: det });
    }
    Ok(det.sqrt())
}
