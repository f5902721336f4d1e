//! The mixed invariant `Γ_{λ,μ}` and the spectral solve of
//! `(nλ+μ) Δ^Ch f = Γ − (λŜ₁ + μŜ₂)` over a Gauduchon background.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use super::gauduchon::{find_gauduchon_factor, require_standard_torus, GauduchonOptions, GauduchonResult, NodeGeometry};
use super::grid::{node_of, FftNd, SpectralGrid, TrigSum};
use super::quadrature::{integrate, QuadratureRule};
use super::{scale_chart, SumField};
use crate::curvature::{IdentityResidual, PointCurvature};
use crate::{ChartSpec, GeomError, Result};

/// `Γ_{λ,μ}` with its normalization data.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GammaInvariant {
    pub lambda: f64,
    pub mu: f64,
    pub value: f64,
    /// `∫ Ŝ₁ dV` and `∫ Ŝ₂ dV` for the unit-volume metric.
    pub s1_integral: f64,
    pub s2_integral: f64,
    /// Volume before normalization.
    pub volume_before: f64,
    /// Constant `c` with `e^{2c}` times the metric of unit volume.
    pub volume_shift: f64,
    /// `sup |δα|` of the unit-volume metric over the quadrature nodes.
    pub lee_coclosed_residual: f64,
    pub quadrature_error: f64,
    pub nodes: usize,
}

/// Threshold on `sup |δα|` for accepting a metric as Gauduchon.
pub const GAUDUCHON_TOL: f64 = 1e-8;

/// `Γ_{λ,μ}` of a compact chart whose Lee form is co-closed, or of the chart
/// scaled by `exp(2·factor)` when a Gauduchon factor is supplied. The result
/// is always normalized to unit volume.
pub fn gamma_invariant(
    chart: &ChartSpec,
    rule: &QuadratureRule,
    lambda: f64,
    mu: f64,
    factor: Option<&TrigSum>,
) -> Result<GammaInvariant> {
    let target = match factor {
        Some(f) => scale_chart(chart, Arc::new(f.clone())).scaled,
        None => chart.clone(),
    };
    let mut lee = 0.0f64;
    let mut cache = std::collections::HashMap::new();
    let mut eval = |p: &[f64]| -> Result<(f64, f64, f64)> {
        let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
        if let Some(v) = cache.get(&key) {
            return Ok(*v);
        }
        let pc = PointCurvature::at(&target, p, 2)?;
        let (a, b) = pc.chern_scalars();
        let d = pc.geo.codifferential(&pc.herm.alpha, 1)[0].value();
        cache.insert(key, (a, b, d));
        Ok((a, b, d))
    };
    let volume = integrate(&target, rule, |_| Ok(1.0))?;
    let i1 = integrate(&target, rule, |p| {
        let (a, _, d) = eval(p)?;
        lee = lee.max(d.abs());
        Ok(a)
    })?;
    let i2 = integrate(&target, rule, |p| {
        let (_, b, _) = eval(p)?;
        Ok(b)
    })?;
    let n = chart.n as f64;
    let shift = -volume.value.ln() / (2.0 * n);
    let lee = lee * (-2.0 * shift).exp();
    if lee > GAUDUCHON_TOL {
        return Err(GeomError::NonGauduchon(lee));
    }
    // S scales by e^{−2c} and dV by e^{2nc}.
    let k = ((2.0 * n - 2.0) * shift).exp();
    let value = k * (lambda * i1.value + mu * i2.value);
    let err = k * (lambda.abs() * i1.error_estimate + mu.abs() * i2.error_estimate)
        + value.abs() * volume.error_estimate / volume.value;
    Ok(GammaInvariant {
        lambda,
        mu,
        value,
        s1_integral: k * i1.value,
        s2_integral: k * i2.value,
        volume_before: volume.value,
        volume_shift: shift,
        lee_coclosed_residual: lee,
        quadrature_error: err,
        nodes: rule.len(),
    })
}

/// Pseudo-spectral discretization of `Δ^Ch f = −A^{ij} ∂_{ij} f + b^k ∂_k f`
/// and its adjoint `Δf − ⟨α, df⟩` on a uniform torus grid.
#[derive(Debug)]
pub struct GridOperator {
    res: Vec<usize>,
    dim: usize,
    fft: FftNd,
    /// Wavevectors, `dim` entries per flat index.
    kvec: Vec<f64>,
    /// `g^{ij}` per node.
    a: Vec<f64>,
    /// `γ^k + α^k` per node.
    b: Vec<f64>,
    /// `γ^k − α^k` per node.
    b_adj: Vec<f64>,
    /// `√det g` times the cell volume.
    weight: Vec<f64>,
    /// Flat-torus symbol `Ā^{ij} k_i k_j` of the averaged coefficients.
    symbol: Vec<f64>,
}

impl GridOperator {
    pub fn new(res: &[usize], nodes: &[NodeGeometry]) -> GridOperator {
        let dim = res.len();
        let total: usize = res.iter().product();
        assert_eq!(nodes.len(), total);
        let fft = FftNd::new(res);
        let mut kvec = Vec::with_capacity(total * dim);
        for idx in 0..total {
            kvec.extend(fft.wavevector(idx));
        }
        let cell = std::f64::consts::TAU.powi(dim as i32) / total as f64;
        let mut a = Vec::with_capacity(total * dim * dim);
        let mut b = Vec::with_capacity(total * dim);
        let mut b_adj = Vec::with_capacity(total * dim);
        let mut weight = Vec::with_capacity(total);
        for nd in nodes {
            a.extend_from_slice(&nd.ginv);
            for k in 0..dim {
                let raised: f64 = (0..dim).map(|l| nd.ginv[k * dim + l] * nd.alpha[l]).sum();
                b.push(nd.gamma[k] + raised);
                b_adj.push(nd.gamma[k] - raised);
            }
            weight.push(nd.sqrt_det * cell);
        }
        let mut mean = vec![0.0; dim * dim];
        for m in 0..total {
            for (s, v) in mean.iter_mut().zip(&a[m * dim * dim..(m + 1) * dim * dim]) {
                *s += v / total as f64;
            }
        }
        let symbol = (0..total)
            .map(|idx| {
                let k = &kvec[idx * dim..(idx + 1) * dim];
                let mut s = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        s += mean[i * dim + j] * k[i] * k[j];
                    }
                }
                s
            })
            .collect();
        GridOperator { res: res.to_vec(), dim, fft, kvec, a, b, b_adj, weight, symbol }
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    /// `∫ u dV`.
    pub fn integral(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.weight).map(|(a, w)| a * w).sum()
    }

    /// `∫ u v dV`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.weight).map(|((a, b), w)| a * b * w).sum()
    }

    fn derivative(&self, coeffs: &[Complex64], axes: &[usize]) -> Vec<f64> {
        let dim = self.dim;
        let mut data: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let k = &self.kvec[idx * dim..(idx + 1) * dim];
                let mut f = Complex64::new(1.0, 0.0);
                for &a in axes {
                    f *= Complex64::new(0.0, k[a]);
                }
                z * f
            })
            .collect();
        self.fft.inverse(&mut data);
        data.iter().map(|z| z.re).collect()
    }

    /// `Δ^Ch f`, or `(Δ^Ch)* f` when `adjoint` is set.
    pub fn apply(&self, f: &[f64], adjoint: bool) -> Vec<f64> {
        let dim = self.dim;
        let mut coeffs: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut coeffs);
        let b = if adjoint { &self.b_adj } else { &self.b };
        let mut out = vec![0.0; f.len()];
        for k in 0..dim {
            let d = self.derivative(&coeffs, &[k]);
            for (m, o) in out.iter_mut().enumerate() {
                *o += b[m * dim + k] * d[m];
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let d = self.derivative(&coeffs, &[i, j]);
                let mult = if i == j { 1.0 } else { 2.0 };
                for (m, o) in out.iter_mut().enumerate() {
                    *o -= mult * self.a[m * dim * dim + i * dim + j] * d[m];
                }
            }
        }
        out
    }

    /// Inverse of the averaged flat symbol, with the zero mode removed.
    fn precondition(&self, y: &[f64]) -> Vec<f64> {
        let mut c: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut c);
        for (z, s) in c.iter_mut().zip(&self.symbol) {
            *z = if *s > 0.0 { *z / s } else { Complex64::new(0.0, 0.0) };
        }
        self.fft.inverse(&mut c);
        c.iter().map(|z| z.re).collect()
    }

    /// Solves `L f = rhs` with zero-mean `f` by right-preconditioned GMRES
    /// with iterative refinement; `L` is `Δ^Ch` or its adjoint.
    pub fn solve(&self, rhs: &[f64], adjoint: bool, tol: f64, max_iterations: usize) -> GridSolve {
        let mut f = vec![0.0; rhs.len()];
        let mut r = rhs.to_vec();
        let mut iterations = 0;
        let mut residual = sup(&r);
        while residual > tol && iterations < max_iterations {
            let op = |y: &[f64]| self.apply(&self.precondition(y), adjoint);
            let (y, its) = gmres(op, &r, 1e-14, 60, max_iterations - iterations);
            iterations += its.max(1);
            let df = self.precondition(&y);
            f.iter_mut().zip(&df).for_each(|(a, b)| *a += b);
            let mean = f.iter().sum::<f64>() / f.len() as f64;
            f.iter_mut().for_each(|a| *a -= mean);
            let lf = self.apply(&f, adjoint);
            r = rhs.iter().zip(&lf).map(|(a, b)| a - b).collect();
            let next = sup(&r);
            if next >= residual {
                residual = next;
                break;
            }
            residual = next;
        }
        GridSolve { f, residual, iterations }
    }
}

/// Result of [`GridOperator::solve`].
#[derive(Debug, Clone)]
pub struct GridSolve {
    pub f: Vec<f64>,
    /// `sup |L f − rhs|` on the grid.
    pub residual: f64,
    pub iterations: usize,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restarted GMRES from a zero initial guess. Returns the iterate and the
/// number of Krylov steps taken.
fn gmres(op: impl Fn(&[f64]) -> Vec<f64>, rhs: &[f64], rtol: f64, restart: usize, max_steps: usize) -> (Vec<f64>, usize) {
    let len = rhs.len();
    let mut x = vec![0.0; len];
    let target = rtol * dot(rhs, rhs).sqrt();
    let mut steps = 0;
    loop {
        let ax = op(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let beta = dot(&r, &r).sqrt();
        if beta <= target || steps >= max_steps {
            return (x, steps);
        }
        let mut v = vec![r.iter().map(|a| a / beta).collect::<Vec<f64>>()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k = 0;
        while k < restart && steps < max_steps {
            let mut w = op(&v[k]);
            for i in 0..=k {
                h[i][k] = dot(&w, &v[i]);
                w.iter_mut().zip(&v[i]).for_each(|(a, b)| *a -= h[i][k] * b);
            }
            let hk1 = dot(&w, &w).sqrt();
            h[k + 1][k] = hk1;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let rho = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / rho;
            sn[k] = h[k + 1][k] / rho;
            h[k][k] = rho;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            steps += 1;
            k += 1;
            if g[k].abs() <= target || hk1 <= f64::MIN_POSITIVE {
                break;
            }
            v.push(w.iter().map(|a| a / hk1).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&v[j]).for_each(|(a, b)| *a += yj * b);
        }
        if g[k].abs() <= target {
            return (x, steps);
        }
    }
}

/// Gauduchon background sampled on a torus grid.
#[derive(Debug)]
pub struct GridBackground {
    /// The unit-volume Gauduchon factor `h` (including its constant).
    pub factor: TrigSum,
    pub operator: GridOperator,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    /// `δ^ĝ α̂` at the nodes.
    pub delta_alpha: Vec<f64>,
}

impl GridBackground {
    /// Samples `e^{2·factor} g` on the grid of resolution `res` per axis.
    pub fn new(chart: &ChartSpec, factor: &TrigSum, res: usize) -> Result<GridBackground> {
        require_standard_torus(chart)?;
        if res < 2 || !res.is_power_of_two() {
            return Err(GeomError::InvalidParameter(format!("resolution {res} is not a power of two")));
        }
        let dim = chart.dim();
        let resv = vec![res; dim];
        let scaled = scale_chart(chart, Arc::new(factor.clone())).scaled;
        let total = res.pow(dim as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut s1 = Vec::with_capacity(total);
        let mut s2 = Vec::with_capacity(total);
        let mut delta_alpha = Vec::with_capacity(total);
        for idx in 0..total {
            let p = node_of(&resv, idx);
            let pc = PointCurvature::at(&scaled, &p, 2)?;
            let (a, b) = pc.chern_scalars();
            let nd = NodeGeometry::from_point(&pc);
            s1.push(a);
            s2.push(b);
            delta_alpha.push(nd.delta_alpha);
            nodes.push(nd);
        }
        let operator = GridOperator::new(&resv, &nodes);
        Ok(GridBackground { factor: factor.clone(), operator, s1, s2, delta_alpha })
    }

    /// Defect of `∫ (Δ^Ch u) v dV = ∫ u (Δ^Ch)* v dV`, relative to the
    /// Cauchy-Schwarz bound of either side.
    pub fn adjoint_residual(&self, u: &[f64], v: &[f64]) -> f64 {
        let op = &self.operator;
        let lu = op.apply(u, false);
        let lv = op.apply(v, true);
        let lhs = op.inner(&lu, v);
        let rhs = op.inner(u, &lv);
        let norm = |x: &[f64]| op.inner(x, x).sqrt();
        let scale = (norm(&lu) * norm(v)).max(norm(u) * norm(&lv));
        (lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE)
    }

    /// `∫ Δ^Ch v dV`.
    pub fn chern_laplacian_integral(&self, v: &[f64]) -> f64 {
        self.operator.integral(&self.operator.apply(v, false))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub resolution: usize,
    pub tol: f64,
    pub max_iterations: usize,
    pub gauduchon: GauduchonOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { resolution: 16, tol: 1e-10, max_iterations: 400, gauduchon: GauduchonOptions::default() }
    }
}

/// Solution of the mixed equation over the Gauduchon background.
#[derive(Debug)]
pub struct MixedSolution {
    pub lambda: f64,
    pub mu: f64,
    pub f: SpectralGrid,
    /// `sup |(nλ+μ) Δ^Ch f − (Γ − λŜ₁ − μŜ₂)|` on the grid.
    pub residual: f64,
    pub iterations: usize,
    /// `Γ_{λ,μ}` from the grid quadrature.
    pub gamma: f64,
    /// Weighted mean of the right-hand side before projection.
    pub zero_mode_residue: f64,
    pub gauduchon: GauduchonResult,
    pub background: GridBackground,
}

/// Weighted zero-mode residues above this are reported as inconsistent.
pub const ZERO_MODE_TOL: f64 = 1e-12;

pub fn solve_mixed_equation(chart: &ChartSpec, lambda: f64, mu: f64, opts: &SolveOptions) -> Result<MixedSolution> {
    let n = chart.n as f64;
    let lead = n * lambda + mu;
    if lead == 0.0 {
        return Err(GeomError::DegenerateMixedEquation);
    }
    require_standard_torus(chart)?;
    let gauduchon = find_gauduchon_factor(chart, &opts.gauduchon)?;
    let background = GridBackground::new(chart, &gauduchon.total(), opts.resolution)?;
    let op = &background.operator;
    let mixed: Vec<f64> = background.s1.iter().zip(&background.s2).map(|(a, b)| lambda * a + mu * b).collect();
    let gamma = op.integral(&mixed);
    let mut rhs: Vec<f64> = mixed.iter().map(|m| (gamma - m) / lead).collect();
    let total_w: f64 = op.weights().iter().sum();
    let residue = op.integral(&rhs) / total_w;
    if residue.abs() > ZERO_MODE_TOL * sup(&rhs).max(1.0) {
        return Err(GeomError::InconsistentRightHandSide(residue));
    }
    rhs.iter_mut().for_each(|r| *r -= residue);
    let sol = op.solve(&rhs, false, opts.tol / lead.abs(), opts.max_iterations);
    let f = SpectralGrid::new(op.res().to_vec(), sol.f)?;
    Ok(MixedSolution {
        lambda,
        mu,
        f,
        residual: sol.residual * lead.abs(),
        iterations: sol.iterations,
        gamma,
        zero_mode_residue: residue,
        gauduchon,
        background,
    })
}

impl MixedSolution {
    /// Checks `λS̃₁ + μS̃₂ = e^{−2f} Γ` for `g̃ = e^{2f} ĝ` at `samples` grid
    /// nodes chosen with `seed`, with the scaled curvature computed directly.
    pub fn sign_check(&self, chart: &ChartSpec, samples: usize, seed: u64) -> Result<Vec<IdentityResidual>> {
        let fs = self.f.to_trig_sum();
        let total = SumField(vec![Arc::new(self.background.factor.clone()), Arc::new(fs.clone())]);
        let scaled = scale_chart(chart, Arc::new(total)).scaled;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = self.f.len();
        let picks = sample(&mut rng, len, samples.min(len)).into_vec();
        let mut out = Vec::with_capacity(picks.len());
        for idx in picks {
            let p = self.f.node(idx);
            let pc = PointCurvature::at(&scaled, &p, 2)?;
            let (a, b) = pc.chern_scalars();
            let lhs = self.lambda * a + self.mu * b;
            let rhs = (-2.0 * fs.value(&p)).exp() * self.gamma;
            out.push(IdentityResidual::scalar("mixed_sign", &p, lhs, rhs));
        }
        Ok(out)
    }
}
