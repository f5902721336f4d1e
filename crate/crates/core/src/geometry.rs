//! Pointwise tensor calculus on a chart: Levi-Civita connection, curvature,
//! adapted frames, covariant derivatives, codifferential and Laplacian.
//!
//! Connection coefficients are stored as `c[k*d*d + i*d + j] = C^k_{ij}` with
//! `D_{∂_i} ∂_j = C^k_{ij} ∂_k`. The curvature operator is
//! `R^a_{bcd} ∂_a = D_c D_d ∂_b − D_d D_c ∂_b` and the lowered tensor
//! `R_{abcd} = g_{ae} R^e_{bcd}` matches `R(X,Y,Z,W) = ⟨R(Z,W)Y, X⟩`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::chart::ChartSpec;
use crate::error::{GeomError, Result};
use crate::jet::Jet;
use crate::tensor::{self, change_basis, flat};

/// Product of two square matrices of jets.
pub fn matmul_jets(a: &[Jet], b: &[Jet], dim: usize) -> Vec<Jet> {
    let order = a[0].order().min(b[0].order());
    let nvars = a[0].nvars();
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = Jet::zero(nvars, order);
            for k in 0..dim {
                acc.add_product(&a[i * dim + k], &b[k * dim + j]);
            }
            out.push(acc);
        }
    }
    out
}

fn matmul_const_left(c: &[f64], b: &[Jet], dim: usize) -> Vec<Jet> {
    let nvars = b[0].nvars();
    let order = b[0].order();
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = Jet::zero(nvars, order);
            for k in 0..dim {
                let w = c[i * dim + k];
                if w != 0.0 {
                    acc += &b[k * dim + j].scale(w);
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Inverse of a matrix of jets whose value matrix is invertible, by the
/// Neumann series around the value inverse (exact at every jet order).
pub fn invert_jets(m: &[Jet], dim: usize) -> Option<Vec<Jet>> {
    let order = m[0].order();
    let nvars = m[0].nvars();
    let m0 = DMatrix::from_row_slice(dim, dim, &tensor::values(m));
    let inv0 = m0.try_inverse()?;
    let inv0: Vec<f64> = (0..dim * dim).map(|k| inv0[(k / dim, k % dim)]).collect();
    let h: Vec<Jet> = m.iter().map(|x| x.add_scalar(-x.value())).collect();
    let t: Vec<Jet> = matmul_const_left(&inv0, &h, dim).into_iter().map(|x| -x).collect();
    let mut term: Vec<Jet> = inv0.iter().map(|&v| Jet::constant(nvars, order, v)).collect();
    let mut sum = term.clone();
    for _ in 0..order {
        term = matmul_jets(&t, &term, dim);
        for (s, x) in sum.iter_mut().zip(&term) {
            *s += x;
        }
    }
    Some(sum)
}

/// Curvature operator `R^a_{bcd}` of the connection `c`, one jet order lower.
pub fn curvature_operator(c: &[Jet], dim: usize) -> Vec<Jet> {
    let order = c[0].order();
    assert!(order >= 1, "curvature needs first derivatives of the connection");
    let nvars = c[0].nvars();
    let low: Vec<Jet> = c.iter().map(|x| x.truncate(order - 1)).collect();
    let dc: Vec<Vec<Jet>> = (0..dim).map(|v| c.iter().map(|x| x.d(v)).collect()).collect();
    let d2 = dim * dim;
    let zero = Jet::zero(nvars, order - 1);
    let mut out = vec![zero.clone(); d2 * d2];
    for a in 0..dim {
        for b in 0..dim {
            for cc in 0..dim {
                for d in cc + 1..dim {
                    let mut r = &dc[cc][a * d2 + d * dim + b] - &dc[d][a * d2 + cc * dim + b];
                    for e in 0..dim {
                        r.add_product(&low[a * d2 + cc * dim + e], &low[e * d2 + d * dim + b]);
                        let prod = low[a * d2 + d * dim + e].mul_jet(&low[e * d2 + cc * dim + b]);
                        r -= &prod;
                    }
                    out[flat(&[a, b, d, cc], dim)] = -&r;
                    out[flat(&[a, b, cc, d], dim)] = r;
                }
            }
        }
    }
    out
}

/// Lowers the first index: `R_{abcd} = g_{ae} R^e_{bcd}` (values only).
pub fn lower_first(g: &[f64], op: &[f64], dim: usize) -> Vec<f64> {
    let block = dim * dim * dim;
    let mut out = vec![0.0; op.len()];
    for a in 0..dim {
        for e in 0..dim {
            let w = g[a * dim + e];
            if w == 0.0 {
                continue;
            }
            for r in 0..block {
                out[a * block + r] += w * op[e * block + r];
            }
        }
    }
    out
}

/// Metric, inverse metric and Levi-Civita connection at a point.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub dim: usize,
    pub order: usize,
    pub point: Vec<f64>,
    pub g: Vec<Jet>,
    pub ginv: Vec<Jet>,
    pub j: Option<Vec<Jet>>,
    /// `Γ^k_{ij}`, one jet order below the metric.
    pub gamma: Vec<Jet>,
}

impl LocalGeometry {
    /// Evaluates the chart at `p` with jets of the given order (≥ 1).
    pub fn at(chart: &ChartSpec, p: &[f64], order: usize) -> Result<LocalGeometry> {
        let f = chart.fields(p, order)?;
        LocalGeometry::from_jets(p, chart.dim(), f.g, f.j)
    }

    /// Builds the geometry from metric jets. The jets may carry more
    /// variables than `dim`; only the first `dim` are differentiated.
    pub fn from_jets(point: &[f64], dim: usize, g: Vec<Jet>, j: Option<Vec<Jet>>) -> Result<LocalGeometry> {
        let order = g[0].order();
        if order < 1 {
            return Err(GeomError::InsufficientJets { needed: 1, have: order });
        }
        let gv = tensor::values(&g);
        let gm = DMatrix::from_row_slice(dim, dim, &gv);
        let sym = gm.clone() * 0.5 + gm.transpose() * 0.5;
        let min_eig = sym.symmetric_eigen().eigenvalues.min();
        if !(min_eig >= 1e-12) {
            return Err(GeomError::SingularMetric { point: point.to_vec(), eigenvalue: min_eig });
        }
        let ginv = invert_jets(&g, dim)
            .ok_or(GeomError::SingularMetric { point: point.to_vec(), eigenvalue: min_eig })?;
        let d2 = dim * dim;
        let dg: Vec<Vec<Jet>> = (0..dim).map(|v| g.iter().map(|x| x.d(v)).collect()).collect();
        // Γ_{ijl} = g(∇_i ∂_j, ∂_l)
        let mut lower = Vec::with_capacity(d2 * dim);
        for i in 0..dim {
            for jj in 0..dim {
                for l in 0..dim {
                    let s = &(&dg[i][jj * dim + l] + &dg[jj][i * dim + l]) - &dg[l][i * dim + jj];
                    lower.push(s.scale(0.5));
                }
            }
        }
        let ginv_low: Vec<Jet> = ginv.iter().map(|x| x.truncate(order - 1)).collect();
        let zero = Jet::zero(g[0].nvars(), order - 1);
        let mut gamma = vec![zero; d2 * dim];
        for k in 0..dim {
            for i in 0..dim {
                for jj in i..dim {
                    let mut acc = Jet::zero(g[0].nvars(), order - 1);
                    for l in 0..dim {
                        acc.add_product(&ginv_low[k * dim + l], &lower[i * d2 + jj * dim + l]);
                    }
                    gamma[k * d2 + jj * dim + i] = acc.clone();
                    gamma[k * d2 + i * dim + jj] = acc;
                }
            }
        }
        Ok(LocalGeometry { dim, order, point: point.to_vec(), g, ginv, j, gamma })
    }

    pub fn n(&self) -> usize {
        self.dim / 2
    }

    pub fn g_values(&self) -> Vec<f64> {
        tensor::values(&self.g)
    }

    pub fn ginv_values(&self) -> Vec<f64> {
        tensor::values(&self.ginv)
    }

    pub fn j_jets(&self) -> Result<&Vec<Jet>> {
        self.j.as_ref().ok_or_else(|| GeomError::MissingComplexStructure("chart".into()))
    }

    pub fn j_values(&self) -> Result<Vec<f64>> {
        Ok(tensor::values(self.j_jets()?))
    }

    pub fn christoffel_values(&self) -> Vec<f64> {
        tensor::values(&self.gamma)
    }

    fn require(&self, needed: usize) -> Result<()> {
        if self.order < needed {
            Err(GeomError::InsufficientJets { needed, have: self.order })
        } else {
            Ok(())
        }
    }

    /// `R^a_{bcd}` as jets of order `order − 2`.
    pub fn riemann_operator(&self) -> Result<Vec<Jet>> {
        self.require(2)?;
        Ok(curvature_operator(&self.gamma, self.dim))
    }

    /// `R(∂_a, ∂_b, ∂_c, ∂_d)` at the point.
    pub fn riemann_coordinate(&self) -> Result<Vec<f64>> {
        let op = self.riemann_operator()?;
        Ok(lower_first(&self.g_values(), &tensor::values(&op), self.dim))
    }

    /// Levi-Civita covariant derivative of a covariant tensor of rank `rank`;
    /// the derivative slot comes first.
    pub fn covariant_derivative(&self, t: &[Jet], rank: usize) -> Vec<Jet> {
        covariant_derivative_with(&self.gamma, t, rank, self.dim)
    }

    /// `(δω)_{j…} = −g^{ik} (∇_i ω)_{k j…}` for a form of degree `deg ≥ 1`.
    pub fn codifferential(&self, form: &[Jet], deg: usize) -> Vec<Jet> {
        let dim = self.dim;
        let nabla = self.covariant_derivative(form, deg);
        let order = nabla[0].order();
        let nvars = nabla[0].nvars();
        let ginv: Vec<Jet> = self.ginv.iter().map(|x| x.truncate(order)).collect();
        let rest = dim.pow(deg as u32 - 1);
        let mut out = Vec::with_capacity(rest);
        for r in 0..rest {
            let mut acc = Jet::zero(nvars, order);
            for i in 0..dim {
                for k in 0..dim {
                    acc.add_product(&ginv[i * dim + k], &nabla[(i * dim + k) * rest + r]);
                }
            }
            out.push(-acc);
        }
        out
    }

    /// Positive Hodge Laplacian `δ d f` of a scalar with at least 2-jets.
    pub fn laplacian(&self, f: &Jet) -> Result<f64> {
        if f.order() < 2 {
            return Err(GeomError::InsufficientJets { needed: 2, have: f.order() });
        }
        let dim = self.dim;
        let gi = self.ginv_values();
        let gamma = self.christoffel_values();
        let mut acc = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let mut hess = f.partial(&[i, j]);
                for k in 0..dim {
                    hess -= gamma[k * dim * dim + i * dim + j] * f.gradient(k);
                }
                acc -= gi[i * dim + j] * hess;
            }
        }
        Ok(acc)
    }

    /// Orthonormal frame by Gram-Schmidt on the coordinate basis.
    pub fn orthonormal_frame(&self) -> Frame {
        let dim = self.dim;
        let g = DMatrix::from_row_slice(dim, dim, &self.g_values());
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for k in 0..dim {
            let mut v = DVector::from_element(dim, 0.0);
            v[k] = 1.0;
            for c in &cols {
                let proj = (c.transpose() * &g * &v)[0];
                v -= c * proj;
            }
            let norm = (v.transpose() * &g * &v)[0].sqrt();
            cols.push(v / norm);
        }
        Frame::from_columns(&cols, &self.point)
    }

    /// J-adapted orthonormal frame `e_1..e_n, e_{n+i} = J e_i`: seed with the
    /// lowest coordinate vector outside the current span, project, normalize.
    pub fn adapted_frame(&self) -> Result<Frame> {
        let dim = self.dim;
        let n = dim / 2;
        let g = DMatrix::from_row_slice(dim, dim, &self.g_values());
        let j = DMatrix::from_row_slice(dim, dim, &self.j_values()?);
        let mut first: Vec<DVector<f64>> = Vec::new();
        let mut span: Vec<DVector<f64>> = Vec::new();
        for k in 0..dim {
            if first.len() == n {
                break;
            }
            let mut v = DVector::from_element(dim, 0.0);
            v[k] = 1.0;
            let scale = (v.transpose() * &g * &v)[0].sqrt();
            for c in &span {
                let proj = (c.transpose() * &g * &v)[0];
                v -= c * proj;
            }
            let norm = (v.transpose() * &g * &v)[0].sqrt();
            if norm <= 1e-8 * scale {
                continue;
            }
            let e = v / norm;
            let je = &j * &e;
            span.push(e.clone());
            span.push(je);
            first.push(e);
        }
        if first.len() != n {
            return Err(GeomError::InvalidChart("could not build a J-adapted frame".into()));
        }
        let mut cols = first.clone();
        for e in &first {
            cols.push(&j * e);
        }
        Ok(Frame::from_columns(&cols, &self.point))
    }
}

/// `(∇T)_{i j₁…j_r}` for the connection `c` acting on a covariant tensor.
pub fn covariant_derivative_with(c: &[Jet], t: &[Jet], rank: usize, dim: usize) -> Vec<Jet> {
    let order = t[0].order().min(c[0].order() + 1).saturating_sub(1);
    let size = t.len();
    let d2 = dim * dim;
    let tl: Vec<Jet> = t.iter().map(|x| x.truncate(order)).collect();
    let cl: Vec<Jet> = c.iter().map(|x| x.truncate(order)).collect();
    let mut out = Vec::with_capacity(dim * size);
    for i in 0..dim {
        for k in 0..size {
            let mut acc = t[k].d(i).truncate(order);
            let idx = tensor::unflat(k, rank, dim);
            for s in 0..rank {
                let mut moved = idx.clone();
                for l in 0..dim {
                    moved[s] = l;
                    let coef = &cl[l * d2 + i * dim + idx[s]];
                    let prod = coef.mul_jet(&tl[flat(&moved, dim)]);
                    acc -= &prod;
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Orthonormal frame at a point; `e[i*dim + a]` is the `i`-th coordinate
/// component of `e_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub dim: usize,
    pub point: Vec<f64>,
    pub e: Vec<f64>,
}

impl Frame {
    fn from_columns(cols: &[DVector<f64>], point: &[f64]) -> Frame {
        let dim = cols.len();
        let mut e = vec![0.0; dim * dim];
        for (a, c) in cols.iter().enumerate() {
            for i in 0..dim {
                e[i * dim + a] = c[i];
            }
        }
        Frame { dim, point: point.to_vec(), e }
    }

    pub fn vector(&self, a: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.e[i * self.dim + a]).collect()
    }

    /// Components of a covariant tensor in this frame.
    pub fn covariant(&self, t: &[f64], rank: usize) -> Vec<f64> {
        change_basis(t, rank, self.dim, &self.e)
    }

    /// Gram matrix residual `max |g(e_a,e_b) − δ_ab|`.
    pub fn gram_residual(&self, g: &[f64]) -> f64 {
        let ge = self.covariant(g, 2);
        let mut worst: f64 = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                let d = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ge[a * self.dim + b] - d).abs());
            }
        }
        worst
    }

    /// Adapted frame rotated by the unitary `u` (row-major `n×n`):
    /// `e'_j = Σ_i Re(u_ij) e_i + Im(u_ij) J e_i`.
    pub fn rotated(&self, u: &[Complex64]) -> Frame {
        let dim = self.dim;
        let n = dim / 2;
        let mut e = vec![0.0; dim * dim];
        for jcol in 0..n {
            for i in 0..n {
                let w = u[i * n + jcol];
                for c in 0..dim {
                    let ei = self.e[c * dim + i];
                    let jei = self.e[c * dim + n + i];
                    e[c * dim + jcol] += w.re * ei + w.im * jei;
                    e[c * dim + n + jcol] += w.re * jei - w.im * ei;
                }
            }
        }
        Frame { dim, point: self.point.clone(), e }
    }
}

/// `u_i = (e_i − √−1 e_{n+i})/√2` in orthonormal-frame components.
pub fn unitary_vector(n: usize, i: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); 2 * n];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    v[i] = Complex64::new(s, 0.0);
    v[n + i] = Complex64::new(0.0, -s);
    v
}

pub fn conj(v: &[Complex64]) -> Vec<Complex64> {
    v.iter().map(|c| c.conj()).collect()
}

/// Random `n×n` unitary from the QR factorization of a Gaussian matrix.
pub fn random_unitary<R: rand::Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    use rand_distr::StandardNormal;
    let m = DMatrix::<Complex64>::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let q = m.qr().q();
    (0..n * n).map(|k| q[(k / n, k % n)]).collect()
}
