//! Search for the Gauduchon representative `ĝ = e^{2h} g` of a torus chart.
//!
//! With `c = 2(n−1)`, the scaled Lee form is `α̂ = α + c dh` and
//! `δ^ĝ α̂ = e^{−2h} Q` where `Q = δα + cΔh − c⟨dh, α⟩ − c²|dh|²`, all in `g`.
//! The search minimizes the discrete `∫ |δ^ĝ α̂|² dV_ĝ = ∫ e^{(2n−4)h} Q² dV_g`
//! over trigonometric `h` with the zero mode fixed, then shifts `h` by the
//! constant that gives `ĝ` unit volume.

use nalgebra::{DMatrix, DVector};

use super::grid::{node_of, SpectralGrid, TrigSum};
use crate::curvature::PointCurvature;
use crate::geometry::LocalGeometry;
use crate::hermitian::{hermitian_jets, HermitianJets};
use crate::tensor;
use crate::{ChartSpec, Domain, GeomError, Jet, Result};

/// Metric data at one node needed by the Gauduchon search and the
/// Chern-Laplacian discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGeometry {
    pub ginv: Vec<f64>,
    /// `γ^k = g^{ij} Γ^k_{ij}`.
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub delta_alpha: f64,
    pub sqrt_det: f64,
}

impl NodeGeometry {
    pub fn at(chart: &ChartSpec, p: &[f64]) -> Result<NodeGeometry> {
        let geo = LocalGeometry::at(chart, p, 2)?;
        let herm = hermitian_jets(&geo)?;
        Ok(NodeGeometry::from_parts(&geo, &herm))
    }

    pub fn from_point(pc: &PointCurvature) -> NodeGeometry {
        NodeGeometry::from_parts(&pc.geo, &pc.herm)
    }

    fn from_parts(geo: &LocalGeometry, herm: &HermitianJets) -> NodeGeometry {
        let dim = geo.dim;
        let ginv = geo.ginv_values();
        let chr = geo.christoffel_values();
        let gamma = (0..dim)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        s += ginv[i * dim + j] * chr[k * dim * dim + i * dim + j];
                    }
                }
                s
            })
            .collect();
        let alpha = tensor::values(&herm.alpha);
        let delta_alpha = geo.codifferential(&herm.alpha, 1)[0].value();
        let g = geo.g_values();
        let det = nalgebra::DMatrix::from_row_slice(dim, dim, &g).determinant();
        NodeGeometry { ginv, gamma, alpha, delta_alpha, sqrt_det: det.sqrt() }
    }
}

/// Checks that `chart` is a periodic box over `[0, 2π)` in every axis.
pub fn require_standard_torus(chart: &ChartSpec) -> Result<()> {
    match &chart.domain {
        Domain::Box(axes)
            if axes.iter().all(|a| a.periodic && a.lo.abs() < 1e-12 && (a.hi - std::f64::consts::TAU).abs() < 1e-12) =>
        {
            Ok(())
        }
        _ => Err(GeomError::NotTorus(chart.name.clone())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GauduchonOptions {
    /// Target for `sup |δ^ĝ α̂|` on the search grid.
    pub tol: f64,
    /// Largest `|k_i|` of the Fourier modes of `h`.
    pub max_modes: usize,
    /// Search grid resolution per axis; chosen from `max_modes` when `None`.
    pub resolution: Option<usize>,
    pub max_iterations: usize,
}

impl Default for GauduchonOptions {
    fn default() -> Self {
        GauduchonOptions { tol: 1e-10, max_modes: 2, resolution: None, max_iterations: 60 }
    }
}

/// Outcome of the search. `factor` has zero mean; the Gauduchon metric of
/// unit volume is `exp(2(factor + volume_shift)) g`.
#[derive(Debug, Clone)]
pub struct GauduchonResult {
    pub factor: TrigSum,
    /// `factor` sampled on the search grid.
    pub grid: SpectralGrid,
    pub volume_shift: f64,
    /// Volume of `exp(2·factor) g` before normalization.
    pub volume_before: f64,
    /// Discrete objective after each accepted step, starting from `h = 0`.
    pub history: Vec<f64>,
    /// `sup |δ^ĝ α̂|` on the search grid after each accepted step, for the
    /// metric normalized to unit volume.
    pub residual_history: Vec<f64>,
    /// `sup |δ^ĝ α̂|` for the unit-volume metric.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl GauduchonResult {
    /// `factor + volume_shift`.
    pub fn total(&self) -> TrigSum {
        let mut t = self.factor.clone();
        t.constant += self.volume_shift;
        t
    }
}

struct Problem {
    dim: usize,
    n: usize,
    data: Vec<NodeGeometry>,
    modes: Vec<Vec<f64>>,
    /// `(sin, cos)` of `k·x` per node and mode.
    trig: Vec<(f64, f64)>,
    cell: f64,
}

struct Evaluation {
    h: Vec<f64>,
    dh: Vec<Vec<f64>>,
    q: Vec<f64>,
    r: DVector<f64>,
}

/// Half-space of nonzero wavevectors with `|k_i| ≤ m`.
fn half_space_modes(dim: usize, m: usize) -> Vec<Vec<f64>> {
    let side = 2 * m + 1;
    let mut out = Vec::new();
    for idx in 0..side.pow(dim as u32) {
        let mut rem = idx;
        let mut k = vec![0i64; dim];
        for slot in k.iter_mut().rev() {
            *slot = (rem % side) as i64 - m as i64;
            rem /= side;
        }
        if let Some(first) = k.iter().find(|&&x| x != 0) {
            if *first > 0 {
                out.push(k.iter().map(|&x| x as f64).collect());
            }
        }
    }
    out
}

impl Problem {
    fn new(dim: usize, n: usize, nodes: &[Vec<f64>], data: Vec<NodeGeometry>, modes: Vec<Vec<f64>>) -> Problem {
        let mut trig = Vec::with_capacity(nodes.len() * modes.len());
        for x in nodes {
            for k in &modes {
                let th: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum();
                trig.push(th.sin_cos());
            }
        }
        let cell = std::f64::consts::TAU.powi(dim as i32) / nodes.len() as f64;
        Problem { dim, n, data, modes, trig, cell }
    }

    fn c(&self) -> f64 {
        2.0 * (self.n as f64 - 1.0)
    }

    fn len(&self) -> usize {
        self.data.len()
    }

    fn sc(&self, m: usize, j: usize) -> (f64, f64) {
        self.trig[m * self.modes.len() + j]
    }

    fn evaluate(&self, theta: &[f64]) -> Evaluation {
        let dim = self.dim;
        let c = self.c();
        let len = self.len();
        let mut h = vec![0.0; len];
        let mut dh = vec![vec![0.0; dim]; len];
        let mut q = vec![0.0; len];
        let mut r = DVector::zeros(len);
        let mut hess = vec![0.0; dim * dim];
        for m in 0..len {
            let nd = &self.data[m];
            hess.iter_mut().for_each(|x| *x = 0.0);
            for (j, k) in self.modes.iter().enumerate() {
                let (a, b) = (theta[2 * j], theta[2 * j + 1]);
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                let (s, co) = self.sc(m, j);
                let v = a * co + b * s;
                let dv = -a * s + b * co;
                h[m] += v;
                for i in 0..dim {
                    dh[m][i] += k[i] * dv;
                    for l in 0..dim {
                        hess[i * dim + l] -= k[i] * k[l] * v;
                    }
                }
            }
            let mut lap = 0.0;
            let mut da = 0.0;
            let mut dd = 0.0;
            for i in 0..dim {
                lap += nd.gamma[i] * dh[m][i];
                for l in 0..dim {
                    let gi = nd.ginv[i * dim + l];
                    lap -= gi * hess[i * dim + l];
                    da += gi * dh[m][i] * nd.alpha[l];
                    dd += gi * dh[m][i] * dh[m][l];
                }
            }
            q[m] = nd.delta_alpha + c * lap - c * da - c * c * dd;
            r[m] = self.weight(m).sqrt() * ((self.n as f64 - 2.0) * h[m]).exp() * q[m];
        }
        Evaluation { h, dh, q, r }
    }

    fn weight(&self, m: usize) -> f64 {
        self.data[m].sqrt_det * self.cell
    }

    fn jacobian(&self, ev: &Evaluation) -> DMatrix<f64> {
        let dim = self.dim;
        let c = self.c();
        let nm2 = self.n as f64 - 2.0;
        let mut jac = DMatrix::zeros(self.len(), 2 * self.modes.len());
        let mut beta = vec![0.0; dim];
        for m in 0..self.len() {
            let nd = &self.data[m];
            let scale = self.weight(m).sqrt() * (nm2 * ev.h[m]).exp();
            for (l, b) in beta.iter_mut().enumerate() {
                *b = nd.alpha[l] + 2.0 * c * ev.dh[m][l];
            }
            for (j, k) in self.modes.iter().enumerate() {
                let (s, co) = self.sc(m, j);
                let mut a = 0.0;
                let mut kb = 0.0;
                let mut gk = 0.0;
                for i in 0..dim {
                    gk += nd.gamma[i] * k[i];
                    for l in 0..dim {
                        let gi = nd.ginv[i * dim + l];
                        a += gi * k[i] * k[l];
                        kb += gi * k[i] * beta[l];
                    }
                }
                let dq_cos = c * (a * co + s * (kb - gk));
                let dq_sin = c * (a * s + co * (gk - kb));
                jac[(m, 2 * j)] = scale * (nm2 * ev.q[m] * co + dq_cos);
                jac[(m, 2 * j + 1)] = scale * (nm2 * ev.q[m] * s + dq_sin);
            }
        }
        jac
    }

    /// Grid estimate of the volume of `e^{2h} g`.
    fn volume(&self, ev: &Evaluation) -> f64 {
        let two_n = 2.0 * self.n as f64;
        (0..self.len()).map(|m| self.weight(m) * (two_n * ev.h[m]).exp()).sum()
    }

    /// `sup |δ^ĝ α̂|` for `ĝ = e^{2h} g` rescaled to unit volume.
    fn normalized_residual(&self, ev: &Evaluation, volume: f64) -> f64 {
        let sup = ev.q.iter().zip(&ev.h).fold(0.0f64, |acc, (q, h)| acc.max((q * (-2.0 * h).exp()).abs()));
        sup * volume.powf(1.0 / self.n as f64)
    }
}

/// Searches for the Gauduchon factor of a torus chart by damped Gauss-Newton
/// steps with Armijo backtracking on the discrete objective. The search stops
/// when the unit-volume residual reaches `tol`, when a step no longer reduces
/// the objective appreciably, or after `max_iterations` accepted steps.
pub fn find_gauduchon_factor(chart: &ChartSpec, opts: &GauduchonOptions) -> Result<GauduchonResult> {
    require_standard_torus(chart)?;
    if !chart.has_complex_structure() {
        return Err(GeomError::MissingComplexStructure(chart.name.clone()));
    }
    if opts.max_modes == 0 {
        return Err(GeomError::InvalidParameter("max_modes must be at least 1".into()));
    }
    let dim = chart.dim();
    let n = chart.n;
    let res = opts.resolution.unwrap_or(if opts.max_modes <= 2 { 8 } else { 16 });
    if res < 2 * opts.max_modes + 1 {
        return Err(GeomError::InvalidParameter(format!(
            "search grid {res} cannot resolve modes up to {}",
            opts.max_modes
        )));
    }
    let resv = vec![res; dim];
    let total = res.pow(dim as u32);
    let nodes: Vec<Vec<f64>> = (0..total).map(|i| node_of(&resv, i)).collect();
    let data = nodes.iter().map(|p| NodeGeometry::at(chart, p)).collect::<Result<Vec<_>>>()?;
    let prob = Problem::new(dim, n, &nodes, data, half_space_modes(dim, opts.max_modes));

    let mut theta = vec![0.0; 2 * prob.modes.len()];
    let mut ev = prob.evaluate(&theta);
    let mut phi = 0.5 * ev.r.norm_squared();
    let mut history = vec![phi];
    let mut residual_history = vec![prob.normalized_residual(&ev, prob.volume(&ev))];
    let mut iterations = 0;
    let mut converged = residual_history[0] <= opts.tol;
    let mut damping = 1e-6;

    while !converged && iterations < opts.max_iterations {
        let jac = prob.jacobian(&ev);
        let grad = jac.tr_mul(&ev.r);
        let normal = jac.tr_mul(&jac);
        let diag_scale = normal.diagonal().max().max(f64::MIN_POSITIVE);
        let mut accepted = None;
        while damping <= 1e4 && accepted.is_none() {
            let mut lhs = normal.clone();
            for i in 0..lhs.nrows() {
                lhs[(i, i)] += damping * diag_scale;
            }
            let Some(ch) = lhs.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let dir = -ch.solve(&grad);
            let slope = grad.dot(&dir);
            let mut t = 1.0;
            for _ in 0..12 {
                let trial: Vec<f64> = theta.iter().zip(dir.iter()).map(|(a, d)| a + t * d).collect();
                let tev = prob.evaluate(&trial);
                let tphi = 0.5 * tev.r.norm_squared();
                if tphi.is_finite() && tphi < phi && tphi <= phi + 1e-4 * t * slope {
                    accepted = Some((trial, tev, tphi));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                damping = (damping / 3.0).max(1e-12);
            } else {
                damping *= 10.0;
            }
        }
        let Some((trial, tev, tphi)) = accepted else {
            break;
        };
        let stalled = phi - tphi <= 1e-9 * phi;
        theta = trial;
        ev = tev;
        phi = tphi;
        iterations += 1;
        history.push(phi);
        let sup = prob.normalized_residual(&ev, prob.volume(&ev));
        residual_history.push(sup);
        converged = sup <= opts.tol;
        if stalled {
            break;
        }
    }

    let mut factor = TrigSum::new(dim);
    for (j, k) in prob.modes.iter().enumerate() {
        let (a, b) = (theta[2 * j], theta[2 * j + 1]);
        if a != 0.0 || b != 0.0 {
            factor.push(k.clone(), a, b);
        }
    }
    let grid = factor.to_grid(resv)?;

    // Volume on a finer trapezoid grid.
    let vres = vec![2 * res; dim];
    let vtotal = (2 * res).pow(dim as u32);
    let cell = std::f64::consts::TAU.powi(dim as i32) / vtotal as f64;
    let mut volume = 0.0;
    for idx in 0..vtotal {
        let p = node_of(&vres, idx);
        let g: Vec<f64> = chart.fields(&p, 0)?.g.iter().map(Jet::value).collect();
        let det = nalgebra::DMatrix::from_row_slice(dim, dim, &g).determinant();
        volume += cell * det.sqrt() * (2.0 * n as f64 * factor.value(&p)).exp();
    }
    let volume_shift = -volume.ln() / (2.0 * n as f64);
    let residual = prob.normalized_residual(&ev, volume);
    Ok(GauduchonResult {
        factor,
        grid,
        volume_shift,
        volume_before: volume,
        history,
        residual_history,
        residual,
        iterations,
        converged,
    })
}
