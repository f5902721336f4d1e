//! Riemannian and Chern curvature, the scalar curvatures `s`, `s_J`, `S₁`,
//! `S₂`, the Chern-Ricci form, holomorphic sectional curvature, Berger
//! averaging, and the registry of pointwise identities.
//!
//! Curvature convention: `R(X,Y,Z,W) = ⟨R(Z,W)Y, X⟩` with
//! `R(Z,W) = D_Z D_W − D_W D_Z − D_{[Z,W]}` for either connection.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::chart::ChartSpec;
use crate::error::{GeomError, Result};
use crate::expr::{parse_expression, Expr};
use crate::geometry::{curvature_operator, lower_first, unitary_vector, Frame, LocalGeometry};
use crate::hermitian::{budget_in_frame, hermitian_jets, j_frame, j_on_one_form, lee_weight, unitary_basis, HermitianBudget, HermitianJets};
use crate::jet::Jet;
use crate::tensor::{self, change_basis, ext_d, flat, to_complex, valued_form_norm2, FrameTag, TensorValue};

/// Connection coefficients `C^k_{ij}` (`D_{∂_i} ∂_j = C^k_{ij} ∂_k`) stored at
/// `[k][i][j]`.
pub type Connection = Vec<Jet>;

/// Chern connection from the Levi-Civita connection and `∇J`:
/// `g(D_X Y, Z) = g(∇_X Y − ½J(∇_X J)Y, Z) + ¼g((∇_{JY}J)Z + J(∇_Y J)Z, X)
///  − ¼g((∇_{JZ}J)Y + J(∇_Z J)Y, X)`.
pub fn chern_connection_jets(geo: &LocalGeometry, h: &HermitianJets) -> Result<Connection> {
    let dim = geo.dim;
    let d2 = dim * dim;
    let low = geo.order - 1;
    let j: Vec<Jet> = geo.j_jets()?.iter().map(|x| x.truncate(low)).collect();
    let g: Vec<Jet> = geo.g.iter().map(|x| x.truncate(low)).collect();
    let ginv: Vec<Jet> = geo.ginv.iter().map(|x| x.truncate(low)).collect();
    let p = &h.nabla_j; // P[k][i][j] = (∇_i J)^k_j
    let pk = |k: usize, i: usize, jj: usize| &p[k * d2 + i * dim + jj];
    let nvars = j[0].nvars();
    // L_{ijl} = g(D_i ∂_j, ∂_l) = g_{kl} A^k_{ij} + g_{ki} B^k_{jl}
    let mut a = Vec::with_capacity(d2 * dim);
    for k in 0..dim {
        for i in 0..dim {
            for jj in 0..dim {
                let mut acc = geo.gamma[k * d2 + i * dim + jj].clone();
                for m in 0..dim {
                    let t = j[k * dim + m].mul_jet(pk(m, i, jj)).scale(0.5);
                    acc -= &t;
                }
                a.push(acc);
            }
        }
    }
    let mut b = Vec::with_capacity(d2 * dim);
    for k in 0..dim {
        for jj in 0..dim {
            for l in 0..dim {
                let mut acc = Jet::zero(nvars, low);
                for m in 0..dim {
                    acc.add_product(&j[m * dim + jj], pk(k, m, l));
                    acc.add_product(&j[k * dim + m], pk(m, jj, l));
                    let t = j[m * dim + l].mul_jet(pk(k, m, jj));
                    acc -= &t;
                    let t = j[k * dim + m].mul_jet(pk(m, l, jj));
                    acc -= &t;
                }
                b.push(acc.scale(0.25));
            }
        }
    }
    let mut lower = Vec::with_capacity(d2 * dim);
    for i in 0..dim {
        for jj in 0..dim {
            for l in 0..dim {
                let mut acc = Jet::zero(nvars, low);
                for k in 0..dim {
                    acc.add_product(&g[k * dim + l], &a[k * d2 + i * dim + jj]);
                    acc.add_product(&g[k * dim + i], &b[k * d2 + jj * dim + l]);
                }
                lower.push(acc);
            }
        }
    }
    let mut c = Vec::with_capacity(d2 * dim);
    for k in 0..dim {
        for i in 0..dim {
            for jj in 0..dim {
                let mut acc = Jet::zero(nvars, low);
                for l in 0..dim {
                    acc.add_product(&ginv[k * dim + l], &lower[i * d2 + jj * dim + l]);
                }
                c.push(acc);
            }
        }
    }
    Ok(c)
}

/// First canonical (Lichnerowicz) connection `D¹ = ∇ − ½J(∇J)`.
pub fn lichnerowicz_connection_jets(geo: &LocalGeometry, h: &HermitianJets) -> Result<Connection> {
    let dim = geo.dim;
    let d2 = dim * dim;
    let low = geo.order - 1;
    let j: Vec<Jet> = geo.j_jets()?.iter().map(|x| x.truncate(low)).collect();
    let mut c = Vec::with_capacity(d2 * dim);
    for k in 0..dim {
        for i in 0..dim {
            for jj in 0..dim {
                let mut acc = geo.gamma[k * d2 + i * dim + jj].clone();
                for m in 0..dim {
                    let t = j[k * dim + m].mul_jet(&h.nabla_j[m * d2 + i * dim + jj]).scale(0.5);
                    acc -= &t;
                }
                c.push(acc);
            }
        }
    }
    Ok(c)
}

/// Ricci form `ρ(Z,W) = √−1 Σ_i R^D(ū_i, u_i, Z, W) = ½ tr(J ∘ R^D(Z,W))` of a
/// Hermitian connection, as coordinate jets.
pub fn ricci_form_jets(op: &[Jet], j: &[Jet], dim: usize) -> Vec<Jet> {
    let d2 = dim * dim;
    let order = op[0].order().min(j[0].order());
    let nvars = op[0].nvars();
    let mut rho = Vec::with_capacity(d2);
    for c in 0..dim {
        for d in 0..dim {
            let mut acc = Jet::zero(nvars, order);
            for a in 0..dim {
                for b in 0..dim {
                    acc.add_product(&j[a * dim + b], &op[b * d2 * dim + a * d2 + c * dim + d]);
                }
            }
            rho.push(acc.scale(0.5));
        }
    }
    rho
}

/// Residuals of the defining properties of a connection compatible with `J`
/// and `g`: `max |DJ|`, `max |Dg|` and `max |T^{1,1}|`.
pub fn hermitian_connection_defects(geo: &LocalGeometry, c: &[Jet]) -> Result<[f64; 3]> {
    let dim = geo.dim;
    let d2 = dim * dim;
    let j = geo.j_jets()?;
    let jv = tensor::values(j);
    let gv = geo.g_values();
    let cv = tensor::values(c);
    let mut dj: f64 = 0.0;
    let mut dg: f64 = 0.0;
    for i in 0..dim {
        for k in 0..dim {
            for jj in 0..dim {
                let mut s = j[k * dim + jj].gradient(i);
                let mut t = geo.g[k * dim + jj].gradient(i);
                for m in 0..dim {
                    s += cv[k * d2 + i * dim + m] * jv[m * dim + jj] - jv[k * dim + m] * cv[m * d2 + i * dim + jj];
                    t -= cv[m * d2 + i * dim + k] * gv[m * dim + jj] + cv[m * d2 + i * dim + jj] * gv[k * dim + m];
                }
                dj = dj.max(s.abs());
                dg = dg.max(t.abs());
            }
        }
    }
    // T(X,Y) + T(JX,JY) = 0 and T(X,JY) − T(JX,Y) = 0
    let tor = |k: usize, i: usize, jj: usize| cv[k * d2 + i * dim + jj] - cv[k * d2 + jj * dim + i];
    let mut t11: f64 = 0.0;
    for k in 0..dim {
        for x in 0..dim {
            for y in 0..dim {
                let mut a = tor(k, x, y);
                let mut b = 0.0;
                for p in 0..dim {
                    for q in 0..dim {
                        a += jv[p * dim + x] * jv[q * dim + y] * tor(k, p, q);
                    }
                    b += jv[p * dim + y] * tor(k, x, p) - jv[p * dim + x] * tor(k, p, y);
                }
                t11 = t11.max(a.abs()).max(b.abs());
            }
        }
    }
    Ok([dj, dg, t11])
}

/// Everything needed for the scalar-curvature suite at one point.
#[derive(Debug, Clone)]
pub struct PointCurvature {
    pub geo: LocalGeometry,
    pub herm: HermitianJets,
    pub frame: Frame,
    pub budget: HermitianBudget,
    /// Riemann tensor `R(e_A,e_B,e_C,e_D)` in the adapted frame.
    pub riemann: Vec<f64>,
    /// Chern connection coefficients (coordinate jets).
    pub chern: Connection,
    /// Chern curvature operator `R^a_{bcd}` (coordinate jets).
    pub chern_op: Vec<Jet>,
    /// Chern curvature `R^Ch(e_A,e_B,e_C,e_D)` in the adapted frame.
    pub chern_riemann: Vec<f64>,
}

fn frame_curvature(geo: &LocalGeometry, op: &[Jet], frame: &Frame) -> Vec<f64> {
    let low = lower_first(&geo.g_values(), &tensor::values(op), geo.dim);
    frame.covariant(&low, 4)
}

impl PointCurvature {
    /// Evaluates at `p` with jets of `order` (2, or 3 to also get `dρ`).
    pub fn at(chart: &ChartSpec, p: &[f64], order: usize) -> Result<PointCurvature> {
        let geo = LocalGeometry::at(chart, p, order)?;
        let frame = geo.adapted_frame()?;
        PointCurvature::with_frame(geo, frame)
    }

    pub fn with_frame(geo: LocalGeometry, frame: Frame) -> Result<PointCurvature> {
        if geo.order < 2 {
            return Err(GeomError::InsufficientJets { needed: 2, have: geo.order });
        }
        let herm = hermitian_jets(&geo)?;
        let budget = budget_in_frame(&geo, &herm, &frame)?;
        let riemann = frame_curvature(&geo, &geo.riemann_operator()?, &frame);
        let chern = chern_connection_jets(&geo, &herm)?;
        let chern_op = curvature_operator(&chern, geo.dim);
        let chern_riemann = frame_curvature(&geo, &chern_op, &frame);
        Ok(PointCurvature { geo, herm, frame, budget, riemann, chern, chern_op, chern_riemann })
    }

    pub fn dim(&self) -> usize {
        self.geo.dim
    }

    pub fn n(&self) -> usize {
        self.geo.dim / 2
    }

    /// `Ric(e_B, e_D) = Σ_A R(e_A, e_B, e_A, e_D)`.
    pub fn ricci(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut ric = vec![0.0; dim * dim];
        for b in 0..dim {
            for d in 0..dim {
                ric[b * dim + d] = (0..dim).map(|a| self.riemann[flat(&[a, b, a, d], dim)]).sum();
            }
        }
        ric
    }

    pub fn scalar(&self) -> f64 {
        let dim = self.dim();
        let ric = self.ricci();
        (0..dim).map(|a| ric[a * dim + a]).sum()
    }

    /// `Ric_J(e_B, e_D) = Σ_A R(e_A, e_B, Je_A, Je_D)`.
    pub fn j_ricci(&self) -> Vec<f64> {
        let dim = self.dim();
        let n = self.n();
        let mut ric = vec![0.0; dim * dim];
        for b in 0..dim {
            for d in 0..dim {
                let (jd, sd) = j_frame(d, n);
                ric[b * dim + d] = (0..dim)
                    .map(|a| {
                        let (ja, sa) = j_frame(a, n);
                        sa * sd * self.riemann[flat(&[a, b, ja, jd], dim)]
                    })
                    .sum();
            }
        }
        ric
    }

    pub fn j_scalar(&self) -> f64 {
        let dim = self.dim();
        let ric = self.j_ricci();
        (0..dim).map(|a| ric[a * dim + a]).sum()
    }

    fn unitary(&self, t: &[f64]) -> Vec<Complex64> {
        change_basis(&to_complex(t), 4, self.dim(), &unitary_basis(self.n()))
    }

    /// `(Σ R(ū_i,u_i,u_j,ū_j), Σ R(ū_i,ū_j,u_i,u_j), Σ R(ū_i,u_j,u_i,ū_j))`.
    pub fn unitary_traces(&self) -> [f64; 3] {
        unitary_traces(&self.unitary(&self.riemann), self.n())
    }

    /// `s_J = 2 Σ R(ū_i,u_i,u_j,ū_j)`.
    pub fn j_scalar_unitary(&self) -> f64 {
        2.0 * self.unitary_traces()[0]
    }

    /// The two unitary expressions for `s`.
    pub fn scalar_unitary(&self) -> [f64; 2] {
        let [a, b, c] = self.unitary_traces();
        [4.0 * b + 2.0 * a, 4.0 * c - 2.0 * a]
    }

    /// `(S₁^Ch, S₂^Ch)`.
    pub fn chern_scalars(&self) -> (f64, f64) {
        let [s1, _, s2] = unitary_traces(&self.unitary(&self.chern_riemann), self.n());
        (s1, s2)
    }

    /// Chern-Ricci form in coordinates, evaluated from the frame-level
    /// definition `√−1 Σ_i R^Ch(ū_i, u_i, ·, ·)`.
    pub fn chern_ricci_form_unitary(&self) -> Vec<f64> {
        let dim = self.dim();
        let n = self.n();
        let mut rho_frame = vec![0.0; dim * dim];
        for i in 0..n {
            let u = unitary_vector(n, i);
            for a in 0..dim {
                for b in 0..dim {
                    let w = Complex64::new(0.0, 1.0) * u[a].conj() * u[b];
                    if w.re == 0.0 {
                        continue;
                    }
                    for cd in 0..dim * dim {
                        rho_frame[cd] += w.re * self.chern_riemann[(a * dim + b) * dim * dim + cd];
                    }
                }
            }
        }
        change_basis(&rho_frame, 2, dim, &frame_inverse(&self.frame))
    }

    /// Chern-Ricci form jets via `½ tr(J ∘ R^Ch)`.
    pub fn chern_ricci_form(&self) -> Result<Vec<Jet>> {
        Ok(ricci_form_jets(&self.chern_op, self.geo.j_jets()?, self.dim()))
    }

    /// `R(ξ̄, ξ, ξ, ξ̄) / |ξ|⁴` for `ξ = Σ ξ^i u_i`.
    pub fn hol_sect_curv(&self, xi: &[Complex64]) -> Result<f64> {
        let n = self.n();
        let dim = self.dim();
        let norm2: f64 = xi.iter().map(|z| z.norm_sqr()).sum();
        if xi.len() != n || !(norm2 > 0.0) {
            return Err(GeomError::ZeroVector);
        }
        let w = unitary_basis(n);
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        for a in 0..dim {
            for i in 0..n {
                v[a] += xi[i] * w[a * dim + i];
            }
        }
        let vb: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
        let rc = to_complex(&self.riemann);
        let val = tensor::evaluate(&rc, dim, &[&vb, &v, &v, &vb]);
        Ok(val.re / (norm2 * norm2))
    }
}

fn frame_inverse(frame: &Frame) -> Vec<f64> {
    let dim = frame.dim;
    let m = nalgebra::DMatrix::from_row_slice(dim, dim, &frame.e);
    let inv = m.try_inverse().expect("frame is invertible");
    (0..dim * dim).map(|k| inv[(k / dim, k % dim)]).collect()
}

fn unitary_traces(rc: &[Complex64], n: usize) -> [f64; 3] {
    let dim = 2 * n;
    let mut out = [0.0; 3];
    for i in 0..n {
        for j in 0..n {
            out[0] += rc[flat(&[n + i, i, j, n + j], dim)].re;
            out[1] += rc[flat(&[n + i, n + j, i, j], dim)].re;
            out[2] += rc[flat(&[n + i, j, i, n + j], dim)].re;
        }
    }
    out
}

/// Scalar summary of the curvature suite at a point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub s: f64,
    pub s_j: f64,
    pub s1: f64,
    pub s2: f64,
    pub alpha2: f64,
    pub n0_2: f64,
    pub df_minus2: f64,
    pub df0_plus2: f64,
    pub df2: f64,
    pub delta_alpha: f64,
    pub nabla_f2: f64,
    /// Chern-Ricci form in coordinates.
    pub rho: Vec<f64>,
}

impl CurvatureReport {
    pub fn from_point(pc: &PointCurvature) -> Result<CurvatureReport> {
        let (s1, s2) = pc.chern_scalars();
        let m = pc.budget.norms;
        Ok(CurvatureReport {
            point: pc.geo.point.clone(),
            s: pc.scalar(),
            s_j: pc.j_scalar(),
            s1,
            s2,
            alpha2: m.alpha,
            n0_2: m.n0,
            df_minus2: m.df_minus,
            df0_plus2: m.df0_plus,
            df2: m.df,
            delta_alpha: pc.budget.delta_alpha,
            nabla_f2: m.nabla_f,
            rho: tensor::values(&pc.chern_ricci_form()?),
        })
    }
}

pub fn curvature_report(chart: &ChartSpec, p: &[f64]) -> Result<CurvatureReport> {
    CurvatureReport::from_point(&PointCurvature::at(chart, p, 2)?)
}

/// `(Ric, s)` with `Ric` in the adapted orthonormal frame.
pub fn ricci_and_scalar(chart: &ChartSpec, p: &[f64]) -> Result<(TensorValue, f64)> {
    let geo = LocalGeometry::at(chart, p, 2)?;
    let frame = geo.orthonormal_frame();
    let riemann = frame_curvature(&geo, &geo.riemann_operator()?, &frame);
    let dim = geo.dim;
    let mut ric = vec![0.0; dim * dim];
    for b in 0..dim {
        for d in 0..dim {
            ric[b * dim + d] = (0..dim).map(|a| riemann[flat(&[a, b, a, d], dim)]).sum();
        }
    }
    let s = (0..dim).map(|a| ric[a * dim + a]).sum();
    Ok((TensorValue::covariant(dim, 2, FrameTag::Orthonormal, p, ric), s))
}

/// `s_J` by the real trace of `Ric_J` and by the unitary formula, plus the two
/// unitary expressions for `s` and the real trace `s`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct JScalar {
    pub s_j: f64,
    pub s_j_unitary: f64,
    pub s: f64,
    pub s_unitary: [f64; 2],
}

impl JScalar {
    pub fn cross_residual(&self) -> f64 {
        let a = (self.s_j - self.s_j_unitary).abs();
        let b = (self.s - self.s_unitary[0]).abs().max((self.s - self.s_unitary[1]).abs());
        a.max(b)
    }
}

pub fn j_scalar(chart: &ChartSpec, p: &[f64]) -> Result<JScalar> {
    let pc = PointCurvature::at(chart, p, 2)?;
    Ok(JScalar { s_j: pc.j_scalar(), s_j_unitary: pc.j_scalar_unitary(), s: pc.scalar(), s_unitary: pc.scalar_unitary() })
}

/// Chern connection at a point with its defect residuals.
#[derive(Debug, Clone)]
pub struct ChernConnection {
    /// `C^k_{ij}` at `[k][i][j]`.
    pub coefficients: Vec<f64>,
    /// `g(D_{e_A} e_B − ∇_{e_A} e_B, e_C)` in the adapted frame.
    pub difference: Vec<f64>,
    pub dj_residual: f64,
    pub dg_residual: f64,
    pub torsion11_residual: f64,
}

pub fn chern_connection(chart: &ChartSpec, p: &[f64]) -> Result<ChernConnection> {
    let geo = LocalGeometry::at(chart, p, 1)?;
    let h = hermitian_jets(&geo)?;
    let c = chern_connection_jets(&geo, &h)?;
    let [dj, dg, t11] = hermitian_connection_defects(&geo, &c)?;
    let dim = geo.dim;
    let d2 = dim * dim;
    let cv = tensor::values(&c);
    let gam = geo.christoffel_values();
    let g = geo.g_values();
    let mut diff = vec![0.0; d2 * dim];
    for i in 0..dim {
        for jj in 0..dim {
            for l in 0..dim {
                diff[i * d2 + jj * dim + l] =
                    (0..dim).map(|k| (cv[k * d2 + i * dim + jj] - gam[k * d2 + i * dim + jj]) * g[k * dim + l]).sum();
            }
        }
    }
    let frame = geo.adapted_frame()?;
    Ok(ChernConnection {
        coefficients: cv,
        difference: frame.covariant(&diff, 3),
        dj_residual: dj,
        dg_residual: dg,
        torsion11_residual: t11,
    })
}

/// `S₁^Ch`, `S₂^Ch`, the Chern-Ricci form and, with 3-jets, `|dρ|`.
#[derive(Debug, Clone)]
pub struct ChernScalars {
    pub s1: f64,
    pub s2: f64,
    pub rho: TensorValue,
    pub d_rho: Option<f64>,
}

pub fn chern_scalars(chart: &ChartSpec, p: &[f64]) -> Result<ChernScalars> {
    let order = if chart.max_order() >= 3 { 3 } else { 2 };
    let pc = PointCurvature::at(chart, p, order)?;
    let (s1, s2) = pc.chern_scalars();
    let rho = pc.chern_ricci_form()?;
    let d_rho = (order >= 3).then(|| tensor::sup_norm(&tensor::values(&ext_d(&rho, 2, pc.dim()))));
    Ok(ChernScalars {
        s1,
        s2,
        rho: TensorValue::covariant(pc.dim(), 2, FrameTag::Coordinate, p, tensor::values(&rho)),
        d_rho,
    })
}

pub fn hol_sect_curv(chart: &ChartSpec, p: &[f64], xi: &[Complex64]) -> Result<f64> {
    PointCurvature::at(chart, p, 2)?.hol_sect_curv(xi)
}

/// Volume of the unit sphere `S^{2n−1}`: `2πⁿ/(n−1)!`.
pub fn sphere_volume(n: usize) -> f64 {
    let fact: f64 = (1..n).map(|k| k as f64).product();
    2.0 * PI.powi(n as i32) / fact
}

/// Berger averaging: `∫_{S^{2n−1}} H` by Monte Carlo against the closed form
/// `Vol(S^{2n−1})(s + 3s_J)/(4n(n+1))`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BergerAverage {
    pub lhs: f64,
    pub rhs: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl BergerAverage {
    pub fn within(&self, sigmas: f64) -> bool {
        (self.lhs - self.rhs).abs() <= sigmas * self.std_error + 1e-12 * self.rhs.abs().max(1.0)
    }
}

pub fn berger_average(chart: &ChartSpec, p: &[f64], samples: usize, seed: u64) -> Result<BergerAverage> {
    if samples < 2 {
        return Err(GeomError::InvalidParameter("Berger averaging needs at least 2 samples".into()));
    }
    let pc = PointCurvature::at(chart, p, 2)?;
    berger_from_point(&pc, samples, seed)
}

pub fn berger_from_point(pc: &PointCurvature, samples: usize, seed: u64) -> Result<BergerAverage> {
    let n = pc.n();
    let dim = pc.dim();
    let vol = sphere_volume(n);
    let rhs = vol * (pc.scalar() + 3.0 * pc.j_scalar()) / (4.0 * (n * (n + 1)) as f64);
    // H(ξ) = Q(ξ)/|ξ|⁴ with Q a quartic form; precompute R in the unitary basis
    let rc = pc.unitary(&pc.riemann);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let xi: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let norm2: f64 = xi.iter().map(|z| z.norm_sqr()).sum();
        // ξ = Σ ξ^i u_i, ξ̄ = Σ conj(ξ^i) ū_i
        let mut q = Complex64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let w = xi[a].conj() * xi[b] * xi[c] * xi[d].conj();
                        q += w * rc[flat(&[n + a, b, c, n + d], dim)];
                    }
                }
            }
        }
        let h = q.re / (norm2 * norm2);
        sum += h;
        sum2 += h * h;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
    Ok(BergerAverage { lhs: vol * mean, rhs, std_error: vol * (var / m).sqrt(), samples })
}

/// Smooth test function used by the Chern-Laplacian identity.
pub fn probe_function(dim: usize) -> Expr {
    let src = format!("0.3*sin(x1 + 0.4*x2) + 0.2*cos(x{dim} - 0.7*x{}) + 0.1*x1*x2", dim.min(3));
    parse_expression(&src, dim).expect("probe expression parses")
}

/// Chern Laplacian of a function jet three ways:
/// `−2 Σ (Ddf)(u_i, ū_i)`, `Δf + ⟨α, df⟩` and `−⟨dJdf, F⟩`.
pub fn chern_laplacian_routes(pc: &PointCurvature, f: &Jet) -> Result<[f64; 3]> {
    let geo = &pc.geo;
    let dim = geo.dim;
    let d2 = dim * dim;
    let n = dim / 2;
    let cv = tensor::values(&pc.chern);
    let mut hess = vec![0.0; d2];
    for i in 0..dim {
        for jj in 0..dim {
            let mut v = f.partial(&[i, jj]);
            for k in 0..dim {
                v -= cv[k * d2 + i * dim + jj] * f.gradient(k);
            }
            hess[i * dim + jj] = v;
        }
    }
    let hf = pc.frame.covariant(&hess, 2);
    let mut trace = Complex64::new(0.0, 0.0);
    let w = unitary_basis(n);
    for i in 0..n {
        for a in 0..dim {
            for b in 0..dim {
                trace += w[a * dim + i] * w[b * dim + n + i] * hf[a * dim + b];
            }
        }
    }
    let chern = -2.0 * trace.re;

    let ginv = geo.ginv_values();
    let alpha = tensor::values(&pc.herm.alpha);
    let mut inner = 0.0;
    for i in 0..dim {
        for jj in 0..dim {
            inner += ginv[i * dim + jj] * alpha[i] * f.gradient(jj);
        }
    }
    let hodge = geo.laplacian(f)? + inner;

    let df: Vec<Jet> = (0..dim).map(|v| f.d(v)).collect();
    let jdf = j_on_one_form(&df, geo.j_jets()?, dim);
    let djdf = tensor::values(&ext_d(&jdf, 1, dim));
    let fv = tensor::values(&pc.herm.f);
    let mut pair = 0.0;
    for i in 0..dim {
        for jj in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    pair += 0.5 * djdf[i * dim + jj] * fv[k * dim + l] * ginv[i * dim + k] * ginv[jj * dim + l];
                }
            }
        }
    }
    Ok([chern, hodge, -pair])
}

/// Identifiers accepted by [`identity_residual`].
pub const IDENTITY_IDS: [&str; 11] = ["I2.1", "I2.3", "I2.4", "I2.5", "I2.6", "I2.7", "I3.2", "I3.3", "I3.5", "I5.4", "I5.5"];

/// Residual of one pointwise identity. The relative residual divides by
/// `max(1, |lhs|, |rhs|)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IdentityResidual {
    pub id: String,
    pub point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
}

impl IdentityResidual {
    pub fn new(id: &str, point: &[f64], lhs: f64, rhs: f64, abs: f64) -> IdentityResidual {
        let rel = abs / 1f64.max(lhs.abs()).max(rhs.abs());
        IdentityResidual { id: id.to_string(), point: point.to_vec(), lhs, rhs, abs_residual: abs, rel_residual: rel }
    }

    pub fn scalar(id: &str, point: &[f64], lhs: f64, rhs: f64) -> IdentityResidual {
        IdentityResidual::new(id, point, lhs, rhs, (lhs - rhs).abs())
    }
}

pub fn is_known_identity(id: &str) -> bool {
    IDENTITY_IDS.contains(&id)
}

/// Whether an identity needs an integrable complex structure.
pub fn requires_hermitian(id: &str) -> bool {
    matches!(id, "I5.4" | "I5.5")
}

/// Evaluates one identity at an already computed point.
pub fn identity_at(chart: &ChartSpec, pc: &PointCurvature, id: &str) -> Result<IdentityResidual> {
    let p = &pc.geo.point;
    let b = &pc.budget;
    let m = b.norms;
    let dim = pc.dim();
    if !is_known_identity(id) {
        return Err(GeomError::UnknownIdentity(id.to_string()));
    }
    if requires_hermitian(id) {
        let integrable = match chart.integrable {
            Some(flag) => flag,
            None => m.nijenhuis.sqrt() <= 1e-8,
        };
        if !integrable {
            return Err(GeomError::NotApplicable {
                id: id.to_string(),
                reason: format!("chart `{}` is not Hermitian (J is not integrable)", chart.name),
            });
        }
    }
    let r = match id {
        "I2.1" => {
            let lam = b.lambda_df();
            let lhs = lam.iter().map(|x| x * x).sum::<f64>().sqrt();
            let rhs = m.alpha.sqrt();
            IdentityResidual::new(id, p, lhs, rhs, tensor::max_abs_diff(&lam, &b.alpha))
        }
        "I2.3" => {
            let assembled = b.nabla_f_assembled();
            let rhs = valued_form_norm2(&assembled, 2, dim).sqrt();
            IdentityResidual::new(id, p, m.nabla_f.sqrt(), rhs, b.decomposition_residual())
        }
        "I2.4" => IdentityResidual::scalar(id, p, m.nabla_f, b.norm_budget_rhs()),
        "I2.5" => IdentityResidual::scalar(id, p, pc.j_scalar(), pc.j_scalar_unitary()),
        "I2.6" => {
            let s = pc.scalar();
            let [a, c] = pc.scalar_unitary();
            IdentityResidual::new(id, p, s, a, (s - a).abs().max((s - c).abs()))
        }
        "I2.7" => {
            let rhs = pc.scalar() - 2.0 / 3.0 * m.df_minus + 0.25 * m.n0 - m.alpha - 2.0 * b.delta_alpha;
            IdentityResidual::scalar(id, p, pc.j_scalar(), rhs)
        }
        "I3.2" => {
            let rhs = pc.scalar() / 2.0 - 5.0 / 12.0 * m.df_minus + m.n0 / 16.0 + 0.25 * m.df0_plus
                + 0.25 * lee_weight(pc.n()) * m.alpha
                - 0.5 * b.delta_alpha;
            IdentityResidual::scalar(id, p, pc.chern_scalars().0, rhs)
        }
        "I3.3" => {
            let rhs = pc.scalar() / 2.0 - m.df_minus / 12.0 + m.n0 / 32.0 + 0.25 * m.df0_plus
                + (0.25 * lee_weight(pc.n()) - 0.5) * m.alpha
                - b.delta_alpha;
            IdentityResidual::scalar(id, p, pc.chern_scalars().1, rhs)
        }
        "I3.5" => {
            let f = probe_function(dim).eval_jet(p, 2)?;
            let [a, h, c] = chern_laplacian_routes(pc, &f)?;
            IdentityResidual::new(id, p, a, h, (a - h).abs().max((a - c).abs()))
        }
        "I5.4" => {
            let rhs = pc.scalar() / 2.0 + 0.25 * m.df - 0.5 * b.delta_alpha;
            IdentityResidual::scalar(id, p, pc.chern_scalars().0, rhs)
        }
        "I5.5" => {
            let rhs = pc.scalar() / 2.0 + 0.25 * m.df - 0.5 * m.alpha - b.delta_alpha;
            IdentityResidual::scalar(id, p, pc.chern_scalars().1, rhs)
        }
        _ => unreachable!(),
    };
    Ok(r)
}

pub fn identity_residual(chart: &ChartSpec, p: &[f64], id: &str) -> Result<IdentityResidual> {
    if !is_known_identity(id) {
        return Err(GeomError::UnknownIdentity(id.to_string()));
    }
    let pc = PointCurvature::at(chart, p, 2)?;
    identity_at(chart, &pc, id)
}
