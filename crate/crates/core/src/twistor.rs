//! Twistor spaces `Z = S(Λ⁺)` of oriented Riemannian 4-manifolds with the
//! metrics `g_t` and the almost complex structures `𝕁₊` (Atiyah-Hitchin-Singer)
//! and `𝕁₋` (Eells-Salamon).
//!
//! A twistor point has coordinates `(x1..x4, a, b)`: a base point and
//! stereographic fiber coordinates. The local section of the frame bundle is
//! the Cholesky frame of the base metric rotated by left multiplication with
//! the unit quaternion `q = (1 + a j + b k)/√(1+a²+b²)`, so that the standard
//! complex structure `L_i` of the rotated frame is `L_{q i q̄}` in the base
//! frame. The pole `q i q̄ = −i` sits at infinity in `(a, b)`.
//!
//! Frame indices are 0-based in code: `θ^0..θ^3` on the base and `Θ^4 = 2tθ⁵`,
//! `Θ^5 = 2tθ⁶` on the fiber.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::catalog;
use crate::curvature::{IdentityResidual, PointCurvature};
use crate::geometry::{curvature_operator, invert_jets, Frame, LocalGeometry};
use crate::tensor::{self, change_basis, ext_d, flat, increasing_tuples, permutation_sign, unflat};
use crate::{Axis, ChartSpec, Domain, FieldJets, FieldSource, GeomError, Jet, Result};

const DIM: usize = 6;

/// Fiber coordinates with `a² + b²` above this are treated as the pole.
pub const POLE_RADIUS: f64 = 1e4;

/// Half-width of the fiber box used for sampling twistor points.
pub const FIBER_HALF_WIDTH: f64 = 2.0;

/// Base points used to detect the Einstein and anti-self-dual flags.
const FLAG_SAMPLES: usize = 8;
const FLAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum TwistorSign {
    Plus,
    Minus,
}

impl TwistorSign {
    fn factor(self) -> f64 {
        match self {
            TwistorSign::Plus => 1.0,
            TwistorSign::Minus => -1.0,
        }
    }
}

impl fmt::Display for TwistorSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TwistorSign::Plus => "+",
            TwistorSign::Minus => "-",
        })
    }
}

impl FromStr for TwistorSign {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<TwistorSign> {
        match s {
            "+" | "plus" => Ok(TwistorSign::Plus),
            "-" | "minus" => Ok(TwistorSign::Minus),
            _ => Err(GeomError::InvalidParameter(format!("twistor sign must be + or -, got `{s}`"))),
        }
    }
}

/// Constant change of section by an element of `U(2)`: the rotated frame is
/// further multiplied by `L_{cos ψ + i sin ψ} R_u`, both of which commute with `L_i`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Gauge {
    pub angle: f64,
    pub right: [f64; 4],
}

impl Default for Gauge {
    fn default() -> Gauge {
        Gauge { angle: 0.0, right: [1.0, 0.0, 0.0, 0.0] }
    }
}

impl Gauge {
    fn matrix(&self) -> [f64; 16] {
        let n = self.right.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u = self.right.map(|x| x / n);
        let l = left_matrix([self.angle.cos(), self.angle.sin(), 0.0, 0.0]);
        let r = right_matrix(u);
        let mut m = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                m[i * 4 + j] = (0..4).map(|k| l[i * 4 + k] * r[k * 4 + j]).sum();
            }
        }
        m
    }
}

/// Quaternion product with components `(1, i, j, k)`.
pub fn quat_mul(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
    [
        p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
        p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
        p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
        p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
    ]
}

/// Matrix of `x ↦ q x`, row-major.
pub fn left_matrix(q: [f64; 4]) -> [f64; 16] {
    let mut m = [0.0; 16];
    for b in 0..4 {
        let mut e = [0.0; 4];
        e[b] = 1.0;
        let col = quat_mul(q, e);
        for a in 0..4 {
            m[a * 4 + b] = col[a];
        }
    }
    m
}

/// Matrix of `x ↦ x u`, row-major.
pub fn right_matrix(u: [f64; 4]) -> [f64; 16] {
    let mut m = [0.0; 16];
    for b in 0..4 {
        let mut e = [0.0; 4];
        e[b] = 1.0;
        let col = quat_mul(e, u);
        for a in 0..4 {
            m[a * 4 + b] = col[a];
        }
    }
    m
}

/// A twistor space over a 4-dimensional base chart.
#[derive(Debug, Clone)]
pub struct TwistorSpec {
    pub base: ChartSpec,
    /// `Ric = (s/4) g` with constant `s` at the sampled base points.
    pub einstein: bool,
    /// Self-dual Weyl curvature vanishes at the sampled base points.
    pub asd: bool,
    /// Mean base scalar curvature over the sampled points.
    pub s_n: f64,
    pub t: f64,
    pub sign: TwistorSign,
    pub gauge: Gauge,
}

impl TwistorSpec {
    /// Validates the base and detects the Einstein and anti-self-dual flags
    /// at seeded base points.
    pub fn new(base: ChartSpec, sign: TwistorSign, t: f64) -> Result<TwistorSpec> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(GeomError::InvalidParameter(format!("fiber scale t must be positive, got {t}")));
        }
        if base.dim() != 4 {
            return Err(GeomError::InvalidBase(format!("`{}` has dimension {}, need 4", base.name, base.dim())));
        }
        if !matches!(base.domain, Domain::Box(_)) {
            return Err(GeomError::InvalidBase(format!("`{}` needs a box domain", base.name)));
        }
        if base.max_order() < 3 {
            return Err(GeomError::InvalidBase(format!("`{}` cannot deliver third-order jets", base.name)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut asd_worst: f64 = 0.0;
        let mut ric_worst: f64 = 0.0;
        let mut scalars = Vec::with_capacity(FLAG_SAMPLES);
        for _ in 0..FLAG_SAMPLES {
            let x = base.domain.sample(&mut rng);
            let r = base_frame_curvature(&base, &x)?;
            asd_worst = asd_worst.max(tensor::sup_norm(&self_dual_weyl(&r)));
            asd_worst = asd_worst.max(tensor::sup_norm(&asd_combinations(&r)));
            let s = base_scalar(&r);
            for b in 0..4 {
                for d in 0..4 {
                    let ric: f64 = (0..4).map(|a| r[flat(&[a, b, a, d], 4)]).sum();
                    let target = if b == d { s / 4.0 } else { 0.0 };
                    ric_worst = ric_worst.max((ric - target).abs());
                }
            }
            scalars.push(s);
        }
        let s_n = scalars.iter().sum::<f64>() / scalars.len() as f64;
        let spread = scalars.iter().fold(0.0f64, |m, s| m.max((s - s_n).abs()));
        let scale = 1f64.max(s_n.abs());
        Ok(TwistorSpec {
            base,
            einstein: ric_worst <= FLAG_TOL * scale && spread <= FLAG_TOL * scale,
            asd: asd_worst <= FLAG_TOL * scale,
            s_n,
            t,
            sign,
            gauge: Gauge::default(),
        })
    }

    /// Twistor space over a 4-dimensional catalog entry.
    pub fn from_catalog(name: &str, sign: TwistorSign, t: f64) -> Result<TwistorSpec> {
        TwistorSpec::new(catalog::load(name)?.chart, sign, t)
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> TwistorSpec {
        self.gauge = gauge;
        self
    }

    /// `twistor:<base>:<sign>:t=<t>`.
    pub fn label(&self) -> String {
        format!("twistor:{}:{}:t={}", self.base.name, self.sign, self.t)
    }

    fn require_closed_forms(&self, id: &str) -> Result<()> {
        if self.einstein && self.asd {
            Ok(())
        } else {
            Err(GeomError::NotApplicable {
                id: id.to_string(),
                reason: format!("base `{}` is not anti-self-dual Einstein", self.base.name),
            })
        }
    }
}

/// `R(e_a,e_b,e_c,e_d)` of the base in its Cholesky frame.
pub fn base_frame_curvature(base: &ChartSpec, x: &[f64]) -> Result<Vec<f64>> {
    let geo = LocalGeometry::at(base, x, 2)?;
    let low = tensor::values(&lower_riemann(&geo.g, &geo.riemann_operator()?, 4));
    let l = cholesky_jets(&geo.g.iter().map(|j| j.truncate(0)).collect::<Vec<_>>(), 4, x)?;
    let e = tensor::values(&invert_jets(&l, 4).ok_or(GeomError::SingularMetric { point: x.to_vec(), eigenvalue: 0.0 })?);
    // columns of the change-of-basis matrix are the frame vectors
    let m: Vec<f64> = (0..16).map(|k| e[(k % 4) * 4 + k / 4]).collect();
    Ok(change_basis(&low, 4, 4, &m))
}

fn base_scalar(r: &[f64]) -> f64 {
    (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).map(|(a, b)| r[flat(&[a, b, a, b], 4)]).sum()
}

/// Orthonormal basis of `Λ⁺`: `(e12+e34, e13+e42, e14+e23)/√2`, 0-based pairs.
const LAMBDA_PLUS: [[(usize, usize, f64); 2]; 3] =
    [[(0, 1, 1.0), (2, 3, 1.0)], [(0, 2, 1.0), (1, 3, -1.0)], [(0, 3, 1.0), (1, 2, 1.0)]];

/// Curvature operator restricted to `Λ⁺`, `M_IJ = Σ_{a<b,c<d} R_abcd ω_I^{ab} ω_J^{cd}`.
pub fn lambda_plus_block(r: &[f64]) -> [f64; 9] {
    let mut m = [0.0; 9];
    for (i, wi) in LAMBDA_PLUS.iter().enumerate() {
        for (j, wj) in LAMBDA_PLUS.iter().enumerate() {
            let mut acc = 0.0;
            for &(a, b, sa) in wi {
                for &(c, d, sc) in wj {
                    acc += sa * sc * r[flat(&[a, b, c, d], 4)];
                }
            }
            m[i * 3 + j] = 0.5 * acc;
        }
    }
    m
}

/// Self-dual Weyl tensor as the trace-free part of the `Λ⁺` block.
pub fn self_dual_weyl(r: &[f64]) -> [f64; 9] {
    let mut m = lambda_plus_block(r);
    let tr = (m[0] + m[4] + m[8]) / 3.0;
    for i in 0..3 {
        m[i * 4] -= tr;
    }
    m
}

/// `(R₁₃₁₂+R₄₂₁₂+R₁₃₃₄+R₄₂₃₄, R₁₄₁₂+R₂₃₁₂+R₁₄₃₄+R₂₃₃₄)` in a given frame.
pub fn asd_combinations(r: &[f64]) -> [f64; 2] {
    let at = |a: usize, b: usize, c: usize, d: usize| r[flat(&[a - 1, b - 1, c - 1, d - 1], 4)];
    [
        at(1, 3, 1, 2) + at(4, 2, 1, 2) + at(1, 3, 3, 4) + at(4, 2, 3, 4),
        at(1, 4, 1, 2) + at(2, 3, 1, 2) + at(1, 4, 3, 4) + at(2, 3, 3, 4),
    ]
}

/// Lower-triangular `L` with `g = L Lᵀ`.
fn cholesky_jets(g: &[Jet], dim: usize, point: &[f64]) -> Result<Vec<Jet>> {
    let zero = Jet::zero(g[0].nvars(), g[0].order());
    let mut l = vec![zero; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = g[i * dim + j].clone();
            for k in 0..j {
                s -= &l[i * dim + k].mul_jet(&l[j * dim + k]);
            }
            if i == j {
                if s.value() <= 0.0 {
                    return Err(GeomError::SingularMetric { point: point.to_vec(), eigenvalue: s.value() });
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = &s / &l[j * dim + j];
            }
        }
    }
    Ok(l)
}

/// `R_{abcd} = g_{ae} R^e_{bcd}` as jets.
fn lower_riemann(g: &[Jet], op: &[Jet], dim: usize) -> Vec<Jet> {
    let order = op[0].order();
    let nvars = op[0].nvars();
    let d3 = dim * dim * dim;
    let mut out = Vec::with_capacity(dim * d3);
    for a in 0..dim {
        for rest in 0..d3 {
            let mut acc = Jet::zero(nvars, order);
            for e in 0..dim {
                acc.add_product(&g[a * dim + e], &op[e * d3 + rest]);
            }
            out.push(acc);
        }
    }
    out
}

/// Contracts every slot of a rank-4 jet tensor with `m[i*dim + a]`.
fn change_basis_jets(t: &[Jet], dim: usize, m: &[Jet]) -> Vec<Jet> {
    let mut cur = t.to_vec();
    let order = t[0].order();
    let nvars = t[0].nvars();
    let m: Vec<Jet> = m.iter().map(|x| x.truncate(order)).collect();
    for pos in 0..4 {
        let stride = dim.pow(3 - pos as u32);
        let mut next = vec![Jet::zero(nvars, order); cur.len()];
        for (k, slot) in next.iter_mut().enumerate() {
            let a = (k / stride) % dim;
            let base = k - a * stride;
            for i in 0..dim {
                slot.add_product(&m[i * dim + a], &cur[base + i * stride]);
            }
        }
        cur = next;
    }
    cur
}

/// Wedge product of jet-valued forms stored as full antisymmetric arrays.
fn wedge_jets(a: &[Jet], p: usize, b: &[Jet], q: usize, dim: usize) -> Vec<Jet> {
    let deg = p + q;
    let order = a[0].order().min(b[0].order());
    let nvars = a[0].nvars();
    let shuffles: Vec<(Vec<usize>, Vec<usize>, i32)> = increasing_tuples(deg, p)
        .into_iter()
        .map(|first| {
            let second: Vec<usize> = (0..deg).filter(|i| !first.contains(i)).collect();
            let perm: Vec<usize> = first.iter().chain(&second).copied().collect();
            let sign = permutation_sign(&perm);
            (first, second, sign)
        })
        .collect();
    let zero = Jet::zero(nvars, order);
    let mut reduced = std::collections::HashMap::new();
    for idx in increasing_tuples(dim, deg) {
        let mut acc = zero.clone();
        for (first, second, sign) in &shuffles {
            let ia: Vec<usize> = first.iter().map(|&k| idx[k]).collect();
            let ib: Vec<usize> = second.iter().map(|&k| idx[k]).collect();
            let term = a[flat(&ia, dim)].mul_jet(&b[flat(&ib, dim)]);
            if *sign > 0 {
                acc += &term;
            } else {
                acc -= &term;
            }
        }
        reduced.insert(flat(&idx, dim), acc);
    }
    let mut out = vec![zero; dim.pow(deg as u32)];
    for (k, slot) in out.iter_mut().enumerate() {
        let full = unflat(k, deg, dim);
        let s = permutation_sign(&full);
        if s == 0 {
            continue;
        }
        let mut sorted = full;
        sorted.sort_unstable();
        let v = &reduced[&flat(&sorted, dim)];
        *slot = if s > 0 { v.clone() } else { -v };
    }
    out
}

fn add_forms(a: &[Jet], b: &[Jet], s: f64) -> Vec<Jet> {
    a.iter().zip(b).map(|(x, y)| x + &y.scale(s)).collect()
}

fn zero_form(nvars: usize, order: usize, len: usize) -> Vec<Jet> {
    vec![Jet::zero(nvars, order); len]
}

/// Sup norm of the values of a jet form.
fn sup_values(f: &[Jet]) -> f64 {
    f.iter().fold(0.0f64, |m, x| m.max(x.value().abs()))
}

fn form_residual(id: &str, p: &[f64], lhs: &[f64], rhs: &[f64]) -> IdentityResidual {
    IdentityResidual::new(id, p, tensor::sup_norm(lhs), tensor::sup_norm(rhs), tensor::max_abs_diff(lhs, rhs))
}

/// Section data at a twistor point: the rotated base coframe, its
/// connection and curvature, and the coframe `{θ^a, 2tθ⁵, 2tθ⁶}` of `g_t`,
/// all as jets in the six twistor coordinates.
#[derive(Debug, Clone)]
pub struct TwistorCoframe {
    pub point: Vec<f64>,
    pub t: f64,
    pub sign: TwistorSign,
    /// `θ̃^a`, coordinate components, `theta[a][i]`.
    pub theta: Vec<Vec<Jet>>,
    /// `ω̃^a_b` at `omega[a*4 + b]`, coordinate components.
    pub omega: Vec<Vec<Jet>>,
    /// `R̃_{abcd}` in the rotated frame; empty below base order 2.
    pub curvature: Vec<Jet>,
    /// Coframe of `g_t`: `coframe[A*6 + i]` is the `i`-th component of `Θ^A`.
    pub coframe: Vec<Jet>,
    /// `frame[i*6 + A]` is the `i`-th component of the dual frame vector `E_A`.
    pub frame: Vec<Jet>,
}

impl TwistorCoframe {
    /// Builds the section data from base jets of `base_order` (1 to 3). The
    /// coframe carries one order less, and the curvature two less.
    pub fn at(spec: &TwistorSpec, p: &[f64], base_order: usize) -> Result<TwistorCoframe> {
        if p.len() != DIM {
            return Err(GeomError::InvalidParameter(format!("twistor points have 6 coordinates, got {}", p.len())));
        }
        let (fa, fb) = (p[4], p[5]);
        if !(fa * fa + fb * fb <= POLE_RADIUS * POLE_RADIUS) {
            return Err(GeomError::FiberPole([fa, fb]));
        }
        if !(1..=3).contains(&base_order) {
            return Err(GeomError::OrderOverflow(base_order));
        }
        let x = &p[..4];
        let g: Vec<Jet> = spec.base.fields(x, base_order)?.g.iter().map(|j| j.extend_vars(DIM)).collect();
        let geo = LocalGeometry::from_jets(p, 4, g.clone(), None)?;
        let l = cholesky_jets(&g, 4, p)?;
        let e = invert_jets(&l, 4).ok_or(GeomError::SingularMetric { point: p.to_vec(), eigenvalue: 0.0 })?;
        let high = base_order;
        let low = base_order - 1;

        // base coframe θ^c_i = L_{ic}; frame E_b^i = (L⁻¹)_{bi}
        let theta_base: Vec<Vec<Jet>> = (0..4)
            .map(|c| (0..DIM).map(|i| if i < 4 { l[i * 4 + c].clone() } else { Jet::zero(DIM, high) }).collect())
            .collect();
        // ω^a_b(∂_j) = θ^a(∇_j E_b)
        let mut omega_base = Vec::with_capacity(16);
        for a in 0..4 {
            for b in 0..4 {
                let form: Vec<Jet> = (0..DIM)
                    .map(|j| {
                        let mut acc = Jet::zero(DIM, low);
                        if j < 4 {
                            for i in 0..4 {
                                let mut nabla = e[b * 4 + i].d(j);
                                for k in 0..4 {
                                    nabla.add_product(&geo.gamma[i * 16 + j * 4 + k], &e[b * 4 + k]);
                                }
                                acc.add_product(&l[i * 4 + a], &nabla);
                            }
                        }
                        acc
                    })
                    .collect();
                omega_base.push(form);
            }
        }

        let rot = rotation_jets(fa, fb, high, &spec.gauge);
        let theta: Vec<Vec<Jet>> = (0..4)
            .map(|a| {
                (0..DIM)
                    .map(|i| {
                        let mut acc = Jet::zero(DIM, high);
                        for c in 0..4 {
                            acc.add_product(&rot[c * 4 + a], &theta_base[c][i]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        // ω̃ = Aᵀ ω A + Aᵀ dA
        let drot: Vec<Vec<Jet>> = rot.iter().map(|r| (0..DIM).map(|j| r.d(j)).collect()).collect();
        let mut omega = Vec::with_capacity(16);
        for a in 0..4 {
            for b in 0..4 {
                let form: Vec<Jet> = (0..DIM)
                    .map(|j| {
                        let mut acc = Jet::zero(DIM, low);
                        for c in 0..4 {
                            for d in 0..4 {
                                let w = rot[c * 4 + a].mul_jet(&rot[d * 4 + b]);
                                acc.add_product(&w, &omega_base[c * 4 + d][j]);
                            }
                            acc.add_product(&rot[c * 4 + a], &drot[c * 4 + b][j]);
                        }
                        acc
                    })
                    .collect();
                omega.push(form);
            }
        }

        let curvature = if base_order >= 2 {
            let op = curvature_operator(&geo.gamma, 4);
            let low_r = lower_riemann(&g, &op, 4);
            // rotated frame vectors ẽ_a^i = Σ_c E_c^i A_ca
            let mut m = Vec::with_capacity(16);
            for i in 0..4 {
                for a in 0..4 {
                    let mut acc = Jet::zero(DIM, high);
                    for c in 0..4 {
                        acc.add_product(&e[c * 4 + i], &rot[c * 4 + a]);
                    }
                    m.push(acc);
                }
            }
            change_basis_jets(&low_r, 4, &m)
        } else {
            Vec::new()
        };

        let t = spec.t;
        let mut coframe = Vec::with_capacity(DIM * DIM);
        for row in &theta {
            coframe.extend(row.iter().map(|x| x.truncate(low)));
        }
        let fiber5 = add_forms(&omega[2], &omega[4 + 3], -1.0);
        let fiber6 = add_forms(&omega[3], &omega[4 + 2], 1.0);
        coframe.extend(fiber5.iter().map(|x| x.scale(t)));
        coframe.extend(fiber6.iter().map(|x| x.scale(t)));
        let inv = invert_jets(&coframe, DIM).ok_or(GeomError::SingularMetric { point: p.to_vec(), eigenvalue: 0.0 })?;
        // inv[i*6 + A] = E_A^i
        Ok(TwistorCoframe { point: p.to_vec(), t, sign: spec.sign, theta, omega, curvature, coframe, frame: inv })
    }

    pub fn order(&self) -> usize {
        self.coframe[0].order()
    }

    /// `φ¹ = θ^0 + iθ^1`, `φ² = θ^2 + iθ^3`, `φ³ = θ⁵ + iθ⁶` for `k = 1, 2, 3`,
    /// as (real, imaginary) coordinate 1-forms.
    pub fn phi(&self, k: usize) -> (Vec<Jet>, Vec<Jet>) {
        let (a, b) = match k {
            1 => (0, 1),
            2 => (2, 3),
            3 => (4, 5),
            _ => panic!("φ index {k} out of range"),
        };
        let s = if k == 3 { 0.5 / self.t } else { 1.0 };
        let scaled = |c: usize| self.coframe_form(c).iter().map(|x| x.scale(s)).collect();
        (scaled(a), scaled(b))
    }

    /// `Θ^A` as a coordinate 1-form.
    pub fn coframe_form(&self, a: usize) -> Vec<Jet> {
        self.coframe[a * DIM..(a + 1) * DIM].to_vec()
    }

    /// `g_t = Σ_A Θ^A ⊗ Θ^A`.
    pub fn metric(&self) -> Vec<Jet> {
        let order = self.order();
        let mut g = zero_form(DIM, order, DIM * DIM);
        for i in 0..DIM {
            for j in i..DIM {
                let mut acc = Jet::zero(DIM, order);
                for a in 0..DIM {
                    acc.add_product(&self.coframe[a * DIM + i], &self.coframe[a * DIM + j]);
                }
                g[j * DIM + i] = acc.clone();
                g[i * DIM + j] = acc;
            }
        }
        g
    }

    /// `J E_0 = E_1`, `J E_2 = E_3`, `J E_4 = ±E_5`.
    pub fn frame_complex_structure(sign: TwistorSign) -> [f64; 36] {
        let mut j = [0.0; 36];
        for (a, b, s) in [(0, 1, 1.0), (2, 3, 1.0), (4, 5, sign.factor())] {
            j[b * DIM + a] = s;
            j[a * DIM + b] = -s;
        }
        j
    }

    /// Coordinate components `J^i_k` of `𝕁±`.
    pub fn complex_structure(&self) -> Vec<Jet> {
        let j0 = TwistorCoframe::frame_complex_structure(self.sign);
        let order = self.order();
        let mut out = zero_form(DIM, order, DIM * DIM);
        for i in 0..DIM {
            for k in 0..DIM {
                let mut acc = Jet::zero(DIM, order);
                for a in 0..DIM {
                    for b in 0..DIM {
                        let s = j0[a * DIM + b];
                        if s != 0.0 {
                            acc.add_product(&self.frame[i * DIM + a].scale(s), &self.coframe[b * DIM + k]);
                        }
                    }
                }
                out[i * DIM + k] = acc;
            }
        }
        out
    }

    /// Frame vectors at the point.
    pub fn frame_values(&self) -> Frame {
        Frame { dim: DIM, point: self.point.clone(), e: tensor::values(&self.frame) }
    }

    /// Coordinate form components in the frame `E_A`.
    pub fn to_frame(&self, form: &[f64], deg: usize) -> Vec<f64> {
        change_basis(form, deg, DIM, &tensor::values(&self.frame))
    }

    /// `F±(t) = Θ^0∧Θ^1 + Θ^2∧Θ^3 ± Θ^4∧Θ^5` in coordinates.
    pub fn fundamental_form(&self) -> Vec<Jet> {
        let c = |a: usize| self.coframe_form(a);
        let mut f = wedge_jets(&c(0), 1, &c(1), 1, DIM);
        f = add_forms(&f, &wedge_jets(&c(2), 1, &c(3), 1, DIM), 1.0);
        add_forms(&f, &wedge_jets(&c(4), 1, &c(5), 1, DIM), self.sign.factor())
    }

    fn r(&self, a: usize, b: usize, c: usize, d: usize) -> &Jet {
        &self.curvature[((a * 4 + b) * 4 + c) * 4 + d]
    }

    /// `Ω̃^a_b = ½ Σ R̃_{abcd} θ̃^c∧θ̃^d` in coordinates.
    pub fn base_curvature_form(&self, a: usize, b: usize) -> Result<Vec<Jet>> {
        if self.curvature.is_empty() {
            return Err(GeomError::InsufficientJets { needed: 2, have: 1 });
        }
        let order = self.curvature[0].order();
        let mut out = zero_form(DIM, order, DIM * DIM);
        for i in 0..DIM {
            for j in 0..DIM {
                let mut acc = Jet::zero(DIM, order);
                for c in 0..4 {
                    for d in 0..4 {
                        let w = self.theta[c][i].mul_jet(&self.theta[d][j]);
                        acc.add_product(self.r(a, b, c, d), &w);
                    }
                }
                out[i * DIM + j] = acc;
            }
        }
        Ok(out)
    }

    /// Levi-Civita connection forms `Θ^A_B` of `g_t` in the coframe `Θ`,
    /// assembled from the base connection and curvature; `[A*6 + B]`.
    pub fn levi_civita_forms(&self) -> Result<Vec<Vec<Jet>>> {
        if self.curvature.is_empty() {
            return Err(GeomError::InsufficientJets { needed: 2, have: 1 });
        }
        let t = self.t;
        let order = self.curvature[0].order();
        let theta5: Vec<Jet> = self.coframe_form(4).iter().map(|x| x.scale(0.5 / t)).collect();
        let theta6: Vec<Jet> = self.coframe_form(5).iter().map(|x| x.scale(0.5 / t)).collect();
        // P_{ba} = R_{13ba} + R_{42ba}, Q_{ba} = R_{14ba} + R_{23ba}
        let p = |b: usize, a: usize| self.r(0, 2, b, a) + self.r(3, 1, b, a);
        let q = |b: usize, a: usize| self.r(0, 3, b, a) + self.r(1, 2, b, a);
        let mut out = vec![zero_form(DIM, order, DIM); DIM * DIM];
        for a in 0..4 {
            for b in 0..4 {
                let (pb, qb) = (p(b, a), q(b, a));
                out[a * DIM + b] = (0..DIM)
                    .map(|i| {
                        let mut acc = self.omega[a * 4 + b][i].truncate(order);
                        acc.add_product(&pb.scale(t * t), &theta5[i]);
                        acc.add_product(&qb.scale(t * t), &theta6[i]);
                        acc
                    })
                    .collect();
            }
        }
        for b in 0..4 {
            let mut f5 = zero_form(DIM, order, DIM);
            let mut f6 = zero_form(DIM, order, DIM);
            for a in 0..4 {
                let (pb, qb) = (p(b, a).scale(0.5 * t), q(b, a).scale(0.5 * t));
                for i in 0..DIM {
                    f5[i].add_product(&pb, &self.theta[a][i]);
                    f6[i].add_product(&qb, &self.theta[a][i]);
                }
            }
            out[b * DIM + 4] = f5.iter().map(|x| -x).collect();
            out[b * DIM + 5] = f6.iter().map(|x| -x).collect();
            out[4 * DIM + b] = f5;
            out[5 * DIM + b] = f6;
        }
        let f56 = add_forms(&self.omega[1], &self.omega[2 * 4 + 3], 1.0);
        out[5 * DIM + 4] = f56.iter().map(|x| -x.truncate(order)).collect();
        out[4 * DIM + 5] = f56.iter().map(|x| x.truncate(order)).collect();
        Ok(out)
    }
}

/// `A = L_q · gauge` with `q = (1 + a j + b k)/√(1+a²+b²)`, as jets.
fn rotation_jets(a: f64, b: f64, order: usize, gauge: &Gauge) -> Vec<Jet> {
    let ja = Jet::variable(DIM, order, 4, a);
    let jb = Jet::variable(DIM, order, 5, b);
    let norm = (&ja.mul_jet(&ja) + &jb.mul_jet(&jb)).add_scalar(1.0).sqrt().recip();
    let q0 = norm.clone();
    let q2 = ja.mul_jet(&norm);
    let q3 = jb.mul_jet(&norm);
    let z = Jet::zero(DIM, order);
    // rows of L_q with q1 = 0
    let lq = [
        q0.clone(),
        z.clone(),
        -&q2,
        -&q3,
        z.clone(),
        q0.clone(),
        -&q3,
        q2.clone(),
        q2.clone(),
        q3.clone(),
        q0.clone(),
        z.clone(),
        q3.clone(),
        -&q2,
        z,
        q0,
    ];
    let u = gauge.matrix();
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = Jet::zero(DIM, order);
            for k in 0..4 {
                acc += &lq[i * 4 + k].scale(u[k * 4 + j]);
            }
            out.push(acc);
        }
    }
    out
}

#[derive(Debug)]
struct TwistorSource {
    spec: TwistorSpec,
}

impl FieldSource for TwistorSource {
    fn dim(&self) -> usize {
        DIM
    }

    fn has_complex_structure(&self) -> bool {
        true
    }

    fn max_order(&self) -> usize {
        2
    }

    fn fields(&self, p: &[f64], order: usize) -> Result<FieldJets> {
        if order > 2 {
            return Err(GeomError::InsufficientJets { needed: order, have: 2 });
        }
        let frame = TwistorCoframe::at(&self.spec, p, order + 1)?;
        Ok(FieldJets { g: frame.metric(), j: Some(frame.complex_structure()) })
    }
}

/// The twistor space as a 6-dimensional chart over the base box times the
/// fiber box `[−2, 2]²`.
pub fn build_twistor_chart(spec: &TwistorSpec) -> Result<ChartSpec> {
    let Domain::Box(axes) = &spec.base.domain else {
        return Err(GeomError::InvalidBase(format!("`{}` needs a box domain", spec.base.name)));
    };
    let mut axes = axes.clone();
    axes.extend([Axis::new(-FIBER_HALF_WIDTH, FIBER_HALF_WIDTH, false); 2]);
    let chart = ChartSpec::from_source(
        &spec.label(),
        3,
        Domain::Box(axes),
        Arc::new(TwistorSource { spec: spec.clone() }),
    )?;
    Ok(match (spec.sign, spec.asd) {
        (TwistorSign::Plus, true) => chart.with_integrable(true),
        (TwistorSign::Minus, _) => chart.with_integrable(false),
        _ => chart,
    })
}

/// Closed-form curvatures of the twistor space over an anti-self-dual
/// Einstein base.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ClosedFormScalars {
    pub s: f64,
    pub s_j_plus: f64,
    pub s_j_minus: f64,
    pub chern_plus: f64,
    pub chern_minus: f64,
}

impl ClosedFormScalars {
    pub fn s_j(&self, sign: TwistorSign) -> f64 {
        match sign {
            TwistorSign::Plus => self.s_j_plus,
            TwistorSign::Minus => self.s_j_minus,
        }
    }

    pub fn chern(&self, sign: TwistorSign) -> f64 {
        match sign {
            TwistorSign::Plus => self.chern_plus,
            TwistorSign::Minus => self.chern_minus,
        }
    }
}

pub fn closed_form_scalars(s_n: f64, t: f64) -> Result<ClosedFormScalars> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(GeomError::InvalidParameter(format!("fiber scale t must be positive, got {t}")));
    }
    let t2 = t * t;
    let s = s_n + 2.0 / t2 - s_n * s_n * t2 / 72.0;
    Ok(ClosedFormScalars {
        s,
        s_j_plus: s,
        s_j_minus: -s_n / 3.0 + 2.0 / t2 + s_n * s_n * t2 / 24.0,
        chern_plus: s_n / 3.0 + 2.0 / t2,
        chern_minus: 0.0,
    })
}

/// Generic-pipeline `s`, `s_J` and `S₁^Ch` on the emitted chart against the
/// closed forms; ids `twistor_s`, `twistor_s_j`, `twistor_chern_s1`.
pub fn scalar_oracle_residuals(spec: &TwistorSpec, chart: &ChartSpec, p: &[f64]) -> Result<Vec<IdentityResidual>> {
    spec.require_closed_forms("twistor_scalars")?;
    let pc = PointCurvature::at(chart, p, 2)?;
    let cf = closed_form_scalars(spec.s_n, spec.t)?;
    Ok(vec![
        IdentityResidual::scalar("twistor_s", p, pc.scalar(), cf.s),
        IdentityResidual::scalar("twistor_s_j", p, pc.j_scalar(), cf.s_j(spec.sign)),
        IdentityResidual::scalar("twistor_chern_s1", p, pc.chern_scalars().0, cf.chern(spec.sign)),
    ])
}

/// Orthonormality of the coframe and agreement of `F±(t)` with the
/// fundamental form of `(g_t, 𝕁±)`; ids `coframe_gram`, `fundamental_form`.
pub fn coframe_checks(spec: &TwistorSpec, p: &[f64]) -> Result<Vec<IdentityResidual>> {
    let frame = TwistorCoframe::at(spec, p, 1)?;
    let g = tensor::values(&frame.metric());
    let j = tensor::values(&frame.complex_structure());
    let gram = frame.frame_values().gram_residual(&g);
    let mut generic = vec![0.0; DIM * DIM];
    for i in 0..DIM {
        for jj in 0..DIM {
            generic[i * DIM + jj] = (0..DIM).map(|k| j[k * DIM + i] * g[k * DIM + jj]).sum();
        }
    }
    let assembled = tensor::values(&frame.fundamental_form());
    Ok(vec![
        IdentityResidual::new("coframe_gram", p, 0.0, 0.0, gram),
        form_residual("fundamental_form", p, &assembled, &generic),
    ])
}

/// Structure equations of the rotated base frame:
/// `dθ^a + Σ ω^a_b∧θ^b = 0` and `dω^a_b + Σ ω^a_c∧ω^c_b − Ω^a_b = 0`.
/// Ids `first_structure`, `second_structure`.
pub fn structure_equation_residual(spec: &TwistorSpec, p: &[f64]) -> Result<Vec<IdentityResidual>> {
    let fr = TwistorCoframe::at(spec, p, 3)?;
    let mut first: f64 = 0.0;
    let mut first_scale: f64 = 0.0;
    for a in 0..4 {
        let mut lhs = ext_d(&fr.theta[a], 1, DIM);
        for b in 0..4 {
            lhs = add_forms(&lhs, &wedge_jets(&fr.omega[a * 4 + b], 1, &fr.theta[b], 1, DIM), 1.0);
        }
        first = first.max(sup_values(&lhs));
        first_scale = first_scale.max(sup_values(&ext_d(&fr.theta[a], 1, DIM)));
    }
    let mut second: f64 = 0.0;
    let mut second_scale: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            let omega_ab = fr.base_curvature_form(a, b)?;
            let mut lhs = ext_d(&fr.omega[a * 4 + b], 1, DIM);
            for c in 0..4 {
                lhs = add_forms(&lhs, &wedge_jets(&fr.omega[a * 4 + c], 1, &fr.omega[c * 4 + b], 1, DIM), 1.0);
            }
            second = second.max(tensor::max_abs_diff(&tensor::values(&lhs), &tensor::values(&omega_ab)));
            second_scale = second_scale.max(sup_values(&omega_ab));
        }
    }
    Ok(vec![
        IdentityResidual::new("first_structure", p, first_scale, first_scale, first),
        IdentityResidual::new("second_structure", p, second_scale, second_scale, second),
    ])
}

/// Checks of the assembled Levi-Civita forms of `g_t`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LeviCivitaCheck {
    /// `sup |dΘ^A + Σ Θ^A_B∧Θ^B|`.
    pub structure: f64,
    /// `sup |Θ^A_B + Θ^B_A|`.
    pub antisymmetry: f64,
    /// `R(E_A,E_B,E_C,E_D)` of `g_t` from `dΘ^A_B + Σ Θ^A_C∧Θ^C_B`.
    pub riemann: Vec<f64>,
    /// Scalar curvature of the assembled curvature.
    pub scalar: f64,
}

pub fn levi_civita_forms(spec: &TwistorSpec, p: &[f64]) -> Result<LeviCivitaCheck> {
    let fr = TwistorCoframe::at(spec, p, 3)?;
    let lc = fr.levi_civita_forms()?;
    let mut structure: f64 = 0.0;
    for a in 0..DIM {
        let mut lhs = ext_d(&fr.coframe_form(a), 1, DIM);
        for b in 0..DIM {
            lhs = add_forms(&lhs, &wedge_jets(&lc[a * DIM + b], 1, &fr.coframe_form(b), 1, DIM), 1.0);
        }
        structure = structure.max(sup_values(&lhs));
    }
    let mut antisymmetry: f64 = 0.0;
    for a in 0..DIM {
        for b in 0..DIM {
            let s = add_forms(&lc[a * DIM + b], &lc[b * DIM + a], 1.0);
            antisymmetry = antisymmetry.max(sup_values(&s));
        }
    }
    let d4 = DIM * DIM;
    let mut riemann = vec![0.0; d4 * d4];
    for a in 0..DIM {
        for b in 0..DIM {
            let mut omega = ext_d(&lc[a * DIM + b], 1, DIM);
            for c in 0..DIM {
                omega = add_forms(&omega, &wedge_jets(&lc[a * DIM + c], 1, &lc[c * DIM + b], 1, DIM), 1.0);
            }
            let framed = fr.to_frame(&tensor::values(&omega), 2);
            riemann[(a * DIM + b) * d4..(a * DIM + b + 1) * d4].copy_from_slice(&framed);
        }
    }
    let scalar = (0..DIM).flat_map(|a| (0..DIM).map(move |b| (a, b))).map(|(a, b)| riemann[flat(&[a, b, a, b], DIM)]).sum();
    Ok(LeviCivitaCheck { structure, antisymmetry, riemann, scalar })
}

/// Chern-Ricci forms at a twistor point, coordinate components.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ChernRicciCheck {
    /// From the generic Chern connection of the emitted chart.
    pub generic: Vec<f64>,
    /// `d(Θ^0_1 + Θ^2_3 ± Θ^4_5)` from the assembled Levi-Civita forms.
    pub connection: Vec<f64>,
    /// `(2/t²) Θ^4∧Θ^5 + 2(Ω̃^0_1 + Ω̃^2_3)`, for `𝕁₊` only.
    pub curvature_split: Option<Vec<f64>>,
    /// The split with `Ω̃^0_1 + Ω̃^2_3 = (s_N/12)(θ̃^0∧θ̃^1 + θ̃^2∧θ̃^3)`, for `𝕁₊` over an Einstein base.
    pub einstein: Option<Vec<f64>>,
    /// `⟨ρ, F⟩` of the generic form.
    pub pairing: f64,
}

impl ChernRicciCheck {
    /// Largest disagreement among the available routes.
    pub fn route_residual(&self) -> f64 {
        let mut worst = tensor::max_abs_diff(&self.generic, &self.connection);
        for other in [&self.curvature_split, &self.einstein].into_iter().flatten() {
            worst = worst.max(tensor::max_abs_diff(&self.generic, other));
        }
        worst
    }
}

pub fn chern_ricci_forms(spec: &TwistorSpec, chart: &ChartSpec, p: &[f64]) -> Result<ChernRicciCheck> {
    let fr = TwistorCoframe::at(spec, p, 3)?;
    let pc = PointCurvature::at(chart, p, 2)?;
    let generic = tensor::values(&pc.chern_ricci_form()?);
    let lc = fr.levi_civita_forms()?;
    let s = spec.sign.factor();
    let trace = add_forms(&add_forms(&lc[1], &lc[2 * DIM + 3], 1.0), &lc[4 * DIM + 5], s);
    let connection = tensor::values(&ext_d(&trace, 1, DIM));
    let t = spec.t;
    let (curvature_split, einstein) = if spec.sign == TwistorSign::Plus {
        let fiber = tensor::values(&wedge_jets(&fr.coframe_form(4), 1, &fr.coframe_form(5), 1, DIM));
        let split_curv = add_forms(&fr.base_curvature_form(0, 1)?, &fr.base_curvature_form(2, 3)?, 1.0);
        let combine = |curv: &[f64]| -> Vec<f64> { fiber.iter().zip(curv).map(|(f, c)| 2.0 / (t * t) * f + 2.0 * c).collect() };
        let split = combine(&tensor::values(&split_curv));
        let einstein = spec.einstein.then(|| {
            let kahler = add_forms(
                &wedge_jets(&fr.theta[0], 1, &fr.theta[1], 1, DIM),
                &wedge_jets(&fr.theta[2], 1, &fr.theta[3], 1, DIM),
                1.0,
            );
            let reduced: Vec<f64> = tensor::values(&kahler).iter().map(|x| spec.s_n / 12.0 * x).collect();
            combine(&reduced)
        });
        (Some(split), einstein)
    } else {
        (None, None)
    };
    let f = tensor::values(&fr.fundamental_form());
    let pairing = tensor::form_inner(&fr.to_frame(&generic, 2), &fr.to_frame(&f, 2), 2, DIM);
    Ok(ChernRicciCheck { generic, connection, curvature_split, einstein, pairing })
}

/// `d(φ¹∧φ²∧φ̄³)` for `𝕁₋` against the displayed right side.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CanonicalFormCheck {
    /// Sup over the `(3,1)` components `dΨ(Z_1, Z_2, Z_3, Z̄_l)`.
    pub type_31: f64,
    /// Sup of `dΨ − (−(φ¹∧φ̄¹ + φ²∧φ̄²)∧φ̄³∧φ³ − (s_N/24) φ¹∧φ̄¹∧φ²∧φ̄²)` over frame components.
    pub rhs_residual: Option<f64>,
    /// Sup of the frame components of `dΨ`.
    pub norm: f64,
}

pub fn canonical_form_check(spec: &TwistorSpec, p: &[f64]) -> Result<CanonicalFormCheck> {
    if spec.sign != TwistorSign::Minus {
        return Err(GeomError::NotApplicable {
            id: "canonical_form".into(),
            reason: "the canonical form φ¹∧φ²∧φ̄³ belongs to 𝕁₋".into(),
        });
    }
    let fr = TwistorCoframe::at(spec, p, 3)?;
    let t = spec.t;
    let th = &fr.theta;
    let (c4, c5) = fr.phi(3);
    let c5: Vec<Jet> = c5.iter().map(|x| -x).collect();
    // φ¹∧φ² = (θ0∧θ2 − θ1∧θ3) + i(θ0∧θ3 + θ1∧θ2)
    let w = |a: &[Jet], b: &[Jet]| wedge_jets(a, 1, b, 1, DIM);
    let re12 = add_forms(&w(&th[0], &th[2]), &w(&th[1], &th[3]), -1.0);
    let im12 = add_forms(&w(&th[0], &th[3]), &w(&th[1], &th[2]), 1.0);
    let re = add_forms(&wedge_jets(&re12, 2, &c4, 1, DIM), &wedge_jets(&im12, 2, &c5, 1, DIM), -1.0);
    let im = add_forms(&wedge_jets(&re12, 2, &c5, 1, DIM), &wedge_jets(&im12, 2, &c4, 1, DIM), 1.0);
    let d_re = fr.to_frame(&tensor::values(&ext_d(&re, 3, DIM)), 4);
    let d_im = fr.to_frame(&tensor::values(&ext_d(&im, 3, DIM)), 4);
    let d_psi: Vec<Complex64> = d_re.iter().zip(&d_im).map(|(&a, &b)| Complex64::new(a, b)).collect();

    let i = Complex64::i();
    let half = Complex64::new(0.5, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let z1 = [half, -half * i, zero, zero, zero, zero];
    let z2 = [zero, zero, half, -half * i, zero, zero];
    let z3 = [zero, zero, zero, zero, Complex64::new(t, 0.0), Complex64::new(0.0, t)];
    let conj = |v: &[Complex64; 6]| v.map(|x| x.conj());
    let mut type_31: f64 = 0.0;
    for zl in [conj(&z1), conj(&z2), conj(&z3)] {
        let v = tensor::evaluate(&d_psi, DIM, &[&z1, &z2, &z3, &zl]);
        type_31 = type_31.max(v.norm());
    }

    let rhs_residual = spec.einstein.then(|| {
        let one = Complex64::new(1.0, 0.0);
        let s = 0.5 / t;
        let phi1 = [one, i, zero, zero, zero, zero];
        let phi2 = [zero, zero, one, i, zero, zero];
        let phi3 = [zero, zero, zero, zero, Complex64::new(s, 0.0), Complex64::new(0.0, s)];
        let cj = |v: [Complex64; 6]| v.map(|x| x.conj());
        let w11 = |a: &[Complex64], b: &[Complex64]| tensor::wedge(a, 1, b, 1, DIM);
        let pair = tensor::axpy(&w11(&phi1, &cj(phi1)), one, &w11(&phi2, &cj(phi2)));
        let fiber = w11(&cj(phi3), &phi3);
        let first = tensor::wedge(&pair, 2, &fiber, 2, DIM);
        let second = tensor::wedge(&w11(&phi1, &cj(phi1)), 2, &w11(&phi2, &cj(phi2)), 2, DIM);
        let k = Complex64::new(-spec.s_n / 24.0, 0.0);
        let rhs: Vec<Complex64> = first.iter().zip(&second).map(|(a, b)| -a + k * b).collect();
        d_psi.iter().zip(&rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
    });
    let norm = d_psi.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    Ok(CanonicalFormCheck { type_31, rhs_residual, norm })
}

/// Lee form, `F∧dF` and Nijenhuis tensor of the emitted chart.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LeeIntegrabilityCheck {
    pub f_wedge_df: f64,
    pub lee: f64,
    pub nijenhuis: f64,
}

pub fn lee_and_integrability_check(chart: &ChartSpec, p: &[f64]) -> Result<LeeIntegrabilityCheck> {
    let pc = PointCurvature::at(chart, p, 2)?;
    let b = &pc.budget;
    let fdf = tensor::wedge(&b.f, 2, &b.df, 3, DIM);
    Ok(LeeIntegrabilityCheck {
        f_wedge_df: tensor::sup_norm(&fdf),
        lee: tensor::sup_norm(&b.alpha),
        nijenhuis: tensor::sup_norm(&b.nijenhuis),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quaternion_matrices() {
        let q = [0.3, -0.4, 0.5, 0.2];
        let u = [0.1, 0.7, -0.2, 0.4];
        let x = [1.0, 2.0, -1.0, 0.5];
        let l = left_matrix(q);
        let r = right_matrix(u);
        let qx = quat_mul(q, x);
        let xu = quat_mul(x, u);
        for a in 0..4 {
            let lx: f64 = (0..4).map(|b| l[a * 4 + b] * x[b]).sum();
            let rx: f64 = (0..4).map(|b| r[a * 4 + b] * x[b]).sum();
            assert!((lx - qx[a]).abs() < 1e-15);
            assert!((rx - xu[a]).abs() < 1e-15);
        }
    }

    #[test]
    fn rotation_jets_are_left_multiplication() {
        let (a, b): (f64, f64) = (0.7, -0.3);
        let s = (1.0 + a * a + b * b).sqrt();
        let l = left_matrix([1.0 / s, 0.0, a / s, b / s]);
        let rot = tensor::values(&rotation_jets(a, b, 1, &Gauge::default()));
        assert!(tensor::max_abs_diff(&rot, &l) < 1e-15);
    }

    #[test]
    fn extend_vars_keeps_coefficients() {
        let x = Jet::variable(4, 3, 1, 0.4);
        let y = (&x.sin() * &Jet::variable(4, 3, 3, 1.2)).extend_vars(6);
        let x6 = Jet::variable(6, 3, 1, 0.4);
        let y6 = &x6.sin() * &Jet::variable(6, 3, 3, 1.2);
        assert!(y.max_abs_diff(&y6) < 1e-15);
    }
}
