//! Almost Hermitian invariants: fundamental form, Lee form, Nijenhuis tensor,
//! type decomposition of `dF`, the decomposition of `∇F`, and Gray-Hervella
//! classification.
//!
//! The complex structure acts on 1-forms by `(Jβ)(X) = −β(JX)`. In a
//! J-adapted orthonormal frame `e_{n+i} = J e_i`, so `F = Σ e^i ∧ e^{n+i}`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chart::ChartSpec;
use crate::error::{GeomError, Result};
use crate::geometry::{conj, unitary_vector, Frame, LocalGeometry};
use crate::jet::Jet;
use crate::tensor::{
    self, axpy, change_basis, ext_d, flat, form_norm2, to_complex, unflat, valued_form_norm2, wedge, FrameTag,
    TensorValue,
};

/// `1/(n−1)`, the weight of the Lee part of `dF`. Zero on complex curves,
/// where `dF` and hence `α` vanish identically.
pub fn lee_weight(n: usize) -> f64 {
    if n > 1 {
        1.0 / (n as f64 - 1.0)
    } else {
        0.0
    }
}

/// Image of the frame vector `e_a` under `J`: `J e_a = sign · e_b`.
#[inline]
pub fn j_frame(a: usize, n: usize) -> (usize, f64) {
    if a < n {
        (a + n, 1.0)
    } else {
        (a - n, -1.0)
    }
}

/// Coordinate-level Hermitian data as jets.
#[derive(Debug, Clone)]
pub struct HermitianJets {
    /// `F_{ij} = J^k_i g_{kj}`, same order as the metric.
    pub f: Vec<Jet>,
    /// `(dF)_{ijk}`, one order lower.
    pub df: Vec<Jet>,
    /// `(∇_i F)_{jk}`, one order lower.
    pub nabla_f: Vec<Jet>,
    /// `δF`, one order lower.
    pub delta_f: Vec<Jet>,
    /// Lee form `α = J δF`, one order lower.
    pub alpha: Vec<Jet>,
    /// `(∇_i J)^k_j` stored at `[k][i][j]`, one order lower.
    pub nabla_j: Vec<Jet>,
    /// `N^k_{ij}` stored at `[k][i][j]`, one order lower.
    pub nijenhuis: Vec<Jet>,
}

/// Applies `J` to a 1-form: `(Jβ)_i = −β_k J^k_i`.
pub fn j_on_one_form(beta: &[Jet], j: &[Jet], dim: usize) -> Vec<Jet> {
    let order = beta[0].order().min(j[0].order());
    let nvars = beta[0].nvars();
    (0..dim)
        .map(|i| {
            let mut acc = Jet::zero(nvars, order);
            for k in 0..dim {
                acc.add_product(&beta[k], &j[k * dim + i]);
            }
            -acc
        })
        .collect()
}

pub fn hermitian_jets(geo: &LocalGeometry) -> Result<HermitianJets> {
    let dim = geo.dim;
    let d2 = dim * dim;
    let j = geo.j_jets()?;
    let order = geo.order;
    let nvars = j[0].nvars();
    let mut f = Vec::with_capacity(d2);
    for i in 0..dim {
        for jj in 0..dim {
            let mut acc = Jet::zero(nvars, order);
            for k in 0..dim {
                acc.add_product(&j[k * dim + i], &geo.g[k * dim + jj]);
            }
            f.push(acc);
        }
    }
    let df = ext_d(&f, 2, dim);
    let nabla_f = geo.covariant_derivative(&f, 2);
    let delta_f = geo.codifferential(&f, 2);
    let alpha = j_on_one_form(&delta_f, j, dim);

    let low = order - 1;
    let jl: Vec<Jet> = j.iter().map(|x| x.truncate(low)).collect();
    let dj: Vec<Vec<Jet>> = (0..dim).map(|v| j.iter().map(|x| x.d(v)).collect()).collect();
    let gamma = &geo.gamma;
    let mut nabla_j = Vec::with_capacity(d2 * dim);
    for k in 0..dim {
        for i in 0..dim {
            for jj in 0..dim {
                let mut acc = dj[i][k * dim + jj].clone();
                for m in 0..dim {
                    acc.add_product(&gamma[k * d2 + i * dim + m], &jl[m * dim + jj]);
                    let t = jl[k * dim + m].mul_jet(&gamma[m * d2 + i * dim + jj]);
                    acc -= &t;
                }
                nabla_j.push(acc);
            }
        }
    }
    let mut nijenhuis = Vec::with_capacity(d2 * dim);
    for k in 0..dim {
        for i in 0..dim {
            for jj in 0..dim {
                let mut acc = Jet::zero(nvars, low);
                for l in 0..dim {
                    let bracket = &dj[i][l * dim + jj] - &dj[jj][l * dim + i];
                    acc.add_product(&jl[k * dim + l], &bracket);
                    let t = jl[l * dim + i].mul_jet(&dj[l][k * dim + jj]);
                    acc -= &t;
                    acc.add_product(&jl[l * dim + jj], &dj[l][k * dim + i]);
                }
                nijenhuis.push(acc);
            }
        }
    }
    Ok(HermitianJets { f, df, nabla_f, delta_f, alpha, nabla_j, nijenhuis })
}

/// Squared norms of the Hermitian budget terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct BudgetNorms {
    pub alpha: f64,
    pub nijenhuis: f64,
    pub n0: f64,
    pub df: f64,
    pub df_minus: f64,
    pub df_plus: f64,
    pub df0_plus: f64,
    pub nabla_f: f64,
}

/// Orthonormal-frame components of the Hermitian invariants at a point.
#[derive(Debug, Clone)]
pub struct HermitianBudget {
    pub n: usize,
    pub point: Vec<f64>,
    pub frame: Frame,
    pub f: Vec<f64>,
    pub df: Vec<f64>,
    pub df_minus: Vec<f64>,
    pub df_plus: Vec<f64>,
    pub df0_plus: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `N(X,Y,Z) = ⟨X, N(Y,Z)⟩`.
    pub nijenhuis: Vec<f64>,
    pub b_nijenhuis: Vec<f64>,
    pub n0: Vec<f64>,
    /// `(∇F)(X,Y,Z) = (∇_X F)(Y,Z)`.
    pub nabla_f: Vec<f64>,
    pub delta_alpha: f64,
    pub norms: BudgetNorms,
}

/// Complex basis `(u_1..u_n, ū_1..ū_n)` as columns, in frame components.
pub fn unitary_basis(n: usize) -> Vec<Complex64> {
    let dim = 2 * n;
    let mut w = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..n {
        let u = unitary_vector(n, i);
        let ub = conj(&u);
        for a in 0..dim {
            w[a * dim + i] = u[a];
            w[a * dim + n + i] = ub[a];
        }
    }
    w
}

/// Keeps the components of a real frame-level `deg`-form whose type `(p,q)`
/// satisfies `keep(p)`, computed by masking components in a complex basis.
/// `basis` holds the complex basis vectors as columns, the first `n` spanning
/// the (1,0) vectors.
pub fn type_project(t: &[f64], deg: usize, n: usize, basis: &[Complex64], keep: impl Fn(usize) -> bool) -> Vec<f64> {
    let dim = 2 * n;
    let tc = to_complex(t);
    let mut comp = change_basis(&tc, deg, dim, basis);
    for (k, c) in comp.iter_mut().enumerate() {
        let p = unflat(k, deg, dim).iter().filter(|&&a| a < n).count();
        if !keep(p) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    let bm = DMatrix::from_row_slice(dim, dim, basis);
    let inv = bm.try_inverse().expect("complex basis is invertible");
    let inv: Vec<Complex64> = (0..dim * dim).map(|k| inv[(k / dim, k % dim)]).collect();
    tensor::real_part(&change_basis(&comp, deg, dim, &inv))
}

/// `(Λβ)(X) = Σ_i β(e_i, J e_i, X)` for a frame-level 3-form.
pub fn lambda_contract(beta: &[f64], n: usize) -> Vec<f64> {
    let dim = 2 * n;
    (0..dim).map(|c| (0..n).map(|i| beta[flat(&[i, n + i, c], dim)]).sum()).collect()
}

/// Standard fundamental form `Σ e^i ∧ e^{n+i}` in frame components.
pub fn standard_f(n: usize) -> Vec<f64> {
    let dim = 2 * n;
    let mut f = vec![0.0; dim * dim];
    for i in 0..n {
        f[i * dim + n + i] = 1.0;
        f[(n + i) * dim + i] = -1.0;
    }
    f
}

/// Computes the budget in the given adapted frame.
pub fn budget_in_frame(geo: &LocalGeometry, h: &HermitianJets, frame: &Frame) -> Result<HermitianBudget> {
    if geo.order < 2 {
        return Err(GeomError::InsufficientJets { needed: 2, have: geo.order });
    }
    let dim = geo.dim;
    let n = dim / 2;
    let fr = |t: &[Jet], rank: usize| frame.covariant(&tensor::values(t), rank);
    let f = fr(&h.f, 2);
    let df = fr(&h.df, 3);
    let nabla_f = fr(&h.nabla_f, 3);
    let alpha = fr(&h.alpha, 1);
    let delta_alpha = geo.codifferential(&h.alpha, 1)[0].value();

    // N_{aij} = g_{ak} N^k_{ij}
    let nv = tensor::values(&h.nijenhuis);
    let g = geo.g_values();
    let d2 = dim * dim;
    let mut n_low = vec![0.0; d2 * dim];
    for a in 0..dim {
        for k in 0..dim {
            let w = g[a * dim + k];
            for r in 0..d2 {
                n_low[a * d2 + r] += w * nv[k * d2 + r];
            }
        }
    }
    let nijenhuis = frame.covariant(&n_low, 3);
    let mut b_nijenhuis = vec![0.0; d2 * dim];
    for x in 0..dim {
        for y in 0..dim {
            for z in 0..dim {
                b_nijenhuis[flat(&[x, y, z], dim)] = (nijenhuis[flat(&[x, y, z], dim)]
                    + nijenhuis[flat(&[y, z, x], dim)]
                    + nijenhuis[flat(&[z, x, y], dim)])
                    / 3.0;
            }
        }
    }
    let n0 = axpy(&nijenhuis, -1.0, &b_nijenhuis);

    let basis = unitary_basis(n);
    let df_minus = type_project(&df, 3, n, &basis, |p| p == 0 || p == 3);
    let df_plus = type_project(&df, 3, n, &basis, |p| p == 1 || p == 2);
    let af = wedge(&alpha, 1, &standard_f(n), 2, dim);
    let df0_plus = axpy(&df_plus, -lee_weight(n), &af);

    let norms = BudgetNorms {
        alpha: alpha.iter().map(|x| x * x).sum(),
        nijenhuis: valued_form_norm2(&nijenhuis, 2, dim),
        n0: valued_form_norm2(&n0, 2, dim),
        df: form_norm2(&df, 3, dim),
        df_minus: form_norm2(&df_minus, 3, dim),
        df_plus: form_norm2(&df_plus, 3, dim),
        df0_plus: form_norm2(&df0_plus, 3, dim),
        nabla_f: valued_form_norm2(&nabla_f, 2, dim),
    };
    Ok(HermitianBudget {
        n,
        point: geo.point.clone(),
        frame: frame.clone(),
        f,
        df,
        df_minus,
        df_plus,
        df0_plus,
        alpha,
        nijenhuis,
        b_nijenhuis,
        n0,
        nabla_f,
        delta_alpha,
        norms,
    })
}

impl HermitianBudget {
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Right side of the `∇F` decomposition:
    /// `⅓(dF)⁻(X,Y,Z) − ½N⁰(JX,Y,Z) + ½(dF)⁺(X,Y,Z) − ½(dF)⁺(X,JY,JZ)`.
    pub fn nabla_f_assembled(&self) -> Vec<f64> {
        let dim = self.dim();
        let n = self.n;
        let mut out = vec![0.0; dim * dim * dim];
        for x in 0..dim {
            let (jx, sx) = j_frame(x, n);
            for y in 0..dim {
                let (jy, sy) = j_frame(y, n);
                for z in 0..dim {
                    let (jz, sz) = j_frame(z, n);
                    let k = flat(&[x, y, z], dim);
                    out[k] = self.df_minus[k] / 3.0 - 0.5 * sx * self.n0[flat(&[jx, y, z], dim)]
                        + 0.5 * self.df_plus[k]
                        - 0.5 * sy * sz * self.df_plus[flat(&[x, jy, jz], dim)];
                }
            }
        }
        out
    }

    /// `|∇F − assembled|` with the vector-valued 2-form norm.
    pub fn decomposition_residual(&self) -> f64 {
        let diff = axpy(&self.nabla_f, -1.0, &self.nabla_f_assembled());
        valued_form_norm2(&diff, 2, self.dim()).sqrt()
    }

    /// Right side of the norm budget
    /// `|α|²/(n−1) + |(dF)₀⁺|² + ¼|N⁰|² + ⅓|(dF)⁻|²`.
    pub fn norm_budget_rhs(&self) -> f64 {
        let m = &self.norms;
        m.alpha * lee_weight(self.n) + m.df0_plus + 0.25 * m.n0 + m.df_minus / 3.0
    }

    /// `Λ dF`, which equals `α` exactly when `dF − α∧F/(n−1)` is primitive.
    pub fn lambda_df(&self) -> Vec<f64> {
        lambda_contract(&self.df, self.n)
    }

    pub fn lambda_df_plus(&self) -> Vec<f64> {
        lambda_contract(&self.df_plus, self.n)
    }

    /// Worst `|N(JX,Y) + J N(X,Y)|` over frame vectors.
    pub fn nijenhuis_anti_linearity(&self) -> f64 {
        let dim = self.dim();
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..dim {
            // ⟨e_a, J N(X,Y)⟩ = −⟨J e_a, N(X,Y)⟩
            let (ja, sa) = j_frame(a, n);
            for x in 0..dim {
                let (jx, sx) = j_frame(x, n);
                for y in 0..dim {
                    let lhs = sx * self.nijenhuis[flat(&[a, jx, y], dim)];
                    let jn = -sa * self.nijenhuis[flat(&[ja, x, y], dim)];
                    worst = worst.max((lhs + jn).abs());
                }
            }
        }
        worst
    }
}

/// Hermitian budget at `p` in the deterministic adapted frame.
pub fn budget_at(chart: &ChartSpec, p: &[f64]) -> Result<HermitianBudget> {
    let geo = LocalGeometry::at(chart, p, 2)?;
    let h = hermitian_jets(&geo)?;
    let frame = geo.adapted_frame()?;
    budget_in_frame(&geo, &h, &frame)
}

/// Fundamental 2-form in coordinates.
pub fn fundamental_form(chart: &ChartSpec, p: &[f64]) -> Result<TensorValue> {
    let geo = LocalGeometry::at(chart, p, 1)?;
    let j = geo.j_values()?;
    let g = geo.g_values();
    let dim = geo.dim;
    let mut f = vec![0.0; dim * dim];
    for i in 0..dim {
        for jj in 0..dim {
            f[i * dim + jj] = (0..dim).map(|k| j[k * dim + i] * g[k * dim + jj]).sum();
        }
    }
    Ok(TensorValue::covariant(dim, 2, FrameTag::Coordinate, p, f))
}

/// Lee form `α = J δF` in coordinates, with the residual `|ΛdF − α|` of the
/// primitive decomposition of `dF`.
pub fn lee_form(chart: &ChartSpec, p: &[f64]) -> Result<(TensorValue, f64)> {
    let geo = LocalGeometry::at(chart, p, 2)?;
    let h = hermitian_jets(&geo)?;
    let frame = geo.adapted_frame()?;
    let b = budget_in_frame(&geo, &h, &frame)?;
    let res = tensor::max_abs_diff(&b.lambda_df(), &b.alpha);
    Ok((TensorValue::covariant(geo.dim, 1, FrameTag::Coordinate, p, tensor::values(&h.alpha)), res))
}

/// Nijenhuis tensor `N`, `𝔟N` and `N⁰` in the adapted frame.
pub fn nijenhuis(chart: &ChartSpec, p: &[f64]) -> Result<[TensorValue; 3]> {
    let b = budget_at(chart, p)?;
    let dim = b.dim();
    let t = |v: &Vec<f64>| TensorValue::covariant(dim, 3, FrameTag::Orthonormal, p, v.clone());
    Ok([t(&b.nijenhuis), t(&b.b_nijenhuis), t(&b.n0)])
}

/// Gray-Hervella component flags.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GrayHervellaFlags {
    /// Sup-norms of `(dF)⁻`, `N⁰`, `(dF)₀⁺`, `α` over the sample.
    pub sup_df_minus: f64,
    pub sup_n0: f64,
    pub sup_df0_plus: f64,
    pub sup_alpha: f64,
    /// `vanishes[k]` is true when component `W_{k+1}` is absent.
    pub vanishes: [bool; 4],
    pub tol: f64,
}

impl GrayHervellaFlags {
    pub fn from_sups(sups: [f64; 4], tol: f64) -> GrayHervellaFlags {
        GrayHervellaFlags {
            sup_df_minus: sups[0],
            sup_n0: sups[1],
            sup_df0_plus: sups[2],
            sup_alpha: sups[3],
            vanishes: sups.map(|s| s <= tol),
            tol,
        }
    }

    /// Smallest class containing the structure, e.g. `W3+W4`, or `Kahler`.
    pub fn label(&self) -> String {
        class_label(self.vanishes)
    }

    pub fn is_kahler(&self) -> bool {
        self.vanishes.iter().all(|&v| v)
    }
}

pub fn class_label(vanishes: [bool; 4]) -> String {
    let parts: Vec<String> =
        (0..4).filter(|&k| !vanishes[k]).map(|k| format!("W{}", k + 1)).collect();
    if parts.is_empty() {
        "Kahler".to_string()
    } else {
        parts.join("+")
    }
}

impl fmt::Display for GrayHervellaFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (|dF-|={:.3e}, |N0|={:.3e}, |dF0+|={:.3e}, |alpha|={:.3e})",
            self.label(),
            self.sup_df_minus,
            self.sup_n0,
            self.sup_df0_plus,
            self.sup_alpha
        )
    }
}

/// Classifies by sampling `samples` seeded points of the chart domain.
pub fn classify_gray_hervella(chart: &ChartSpec, samples: usize, seed: u64, tol: f64) -> Result<GrayHervellaFlags> {
    if samples == 0 {
        return Err(GeomError::InvalidParameter("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sups = [0.0f64; 4];
    for _ in 0..samples {
        let p = chart.domain.sample(&mut rng);
        let b = budget_at(chart, &p)?;
        let vals = [b.norms.df_minus, b.norms.n0, b.norms.df0_plus, b.norms.alpha];
        for (s, v) in sups.iter_mut().zip(vals) {
            *s = s.max(v.sqrt());
        }
    }
    Ok(GrayHervellaFlags::from_sups(sups, tol))
}
