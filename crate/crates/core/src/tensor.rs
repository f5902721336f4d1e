//! Dense tensor components at a point and exterior-algebra helpers.
//!
//! Components are stored row-major in full (non-reduced) form: a rank-`r`
//! tensor over dimension `d` holds `d^r` entries. Differential forms are
//! stored the same way with explicit antisymmetry, so `ω_{ij} = −ω_{ji}`.
//! The wedge and exterior-derivative conventions are the determinant ones:
//! `(dx¹∧dx²)_{12} = 1` and `(dω)_{ijk} = ∂_i ω_{jk} + ∂_j ω_{ki} + ∂_k ω_{ij}`.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::jet::Jet;

/// Field of tensor components.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + PartialEq
{
    fn zero() -> Self;
    fn from_real(v: f64) -> Self;
    fn abs2(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(v: f64) -> Self {
        v
    }
    fn abs2(self) -> f64 {
        self * self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
}

/// Which basis the components refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FrameTag {
    Coordinate,
    Orthonormal,
    Unitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Variance {
    Upper,
    Lower,
}

/// Tensor components at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorValue {
    pub dim: usize,
    pub variance: Vec<Variance>,
    pub frame: FrameTag,
    pub point: Vec<f64>,
    pub components: Vec<f64>,
}

impl TensorValue {
    pub fn covariant(dim: usize, rank: usize, frame: FrameTag, point: &[f64], components: Vec<f64>) -> Self {
        debug_assert_eq!(components.len(), dim.pow(rank as u32));
        TensorValue { dim, variance: vec![Variance::Lower; rank], frame, point: point.to_vec(), components }
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.components[flat(idx, self.dim)]
    }

    /// Largest absolute component.
    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.components)
    }
}

#[inline]
pub fn flat(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

/// Multi-index of a flat offset.
pub fn unflat(mut k: usize, rank: usize, dim: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for slot in idx.iter_mut().rev() {
        *slot = k % dim;
        k /= dim;
    }
    idx
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn values(jets: &[Jet]) -> Vec<f64> {
    jets.iter().map(Jet::value).collect()
}

/// Contracts slot `pos` of a rank-`rank` tensor with the matrix `m`:
/// `out[..b..] = Σ_a t[..a..] m[a][b]`.
pub fn contract_slot<S: Scalar>(t: &[S], rank: usize, dim: usize, pos: usize, m: &[S]) -> Vec<S> {
    let inner = dim.pow((rank - pos - 1) as u32);
    let outer = dim.pow(pos as u32);
    let mut out = vec![S::zero(); t.len()];
    for o in 0..outer {
        for a in 0..dim {
            for b in 0..dim {
                let w = m[a * dim + b];
                if w == S::zero() {
                    continue;
                }
                let src = (o * dim + a) * inner;
                let dst = (o * dim + b) * inner;
                for r in 0..inner {
                    out[dst + r] = out[dst + r] + t[src + r] * w;
                }
            }
        }
    }
    out
}

/// Applies `m` to every slot: components of a covariant tensor in a new basis
/// whose vectors are the columns of `m`.
pub fn change_basis<S: Scalar>(t: &[S], rank: usize, dim: usize, m: &[S]) -> Vec<S> {
    let mut out = t.to_vec();
    for pos in 0..rank {
        out = contract_slot(&out, rank, dim, pos, m);
    }
    out
}

/// Evaluates a covariant tensor on a list of vectors.
pub fn evaluate<S: Scalar>(t: &[S], dim: usize, vectors: &[&[S]]) -> S {
    let rank = vectors.len();
    let mut acc = S::zero();
    for (k, &c) in t.iter().enumerate() {
        if c == S::zero() {
            continue;
        }
        let idx = unflat(k, rank, dim);
        let mut w = c;
        for (v, &i) in vectors.iter().zip(&idx) {
            w = w * v[i];
        }
        acc = acc + w;
    }
    acc
}

/// Sign of the permutation sorting `idx`, or 0 with a repeated entry.
pub fn permutation_sign(idx: &[usize]) -> i32 {
    let mut sign = 1;
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            if idx[i] == idx[j] {
                return 0;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Strictly increasing `k`-tuples from `0..dim`.
pub fn increasing_tuples(dim: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, dim: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..dim {
            cur.push(i);
            rec(i + 1, dim, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, dim, k, &mut Vec::new(), &mut out);
    out
}

/// Fills a full antisymmetric array from values on increasing tuples.
pub fn antisymmetric_from<S: Scalar>(dim: usize, deg: usize, mut f: impl FnMut(&[usize]) -> S) -> Vec<S> {
    let mut out = vec![S::zero(); dim.pow(deg as u32)];
    for (k, slot) in out.iter_mut().enumerate() {
        let idx = unflat(k, deg, dim);
        let sign = permutation_sign(&idx);
        if sign == 0 {
            continue;
        }
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        let v = f(&sorted);
        *slot = if sign > 0 { v } else { -v };
    }
    out
}

/// `|ω|² = Σ_{i₁<…<i_l} |ω_{i₁…i_l}|²` in an orthonormal basis.
pub fn form_norm2<S: Scalar>(t: &[S], deg: usize, dim: usize) -> f64 {
    increasing_tuples(dim, deg).iter().map(|idx| t[flat(idx, dim)].abs2()).sum()
}

/// Norm of a vector-valued form stored with the vector slot first:
/// `Σ_A Σ_{B₁<…<B_l} |T_{A B₁…B_l}|²`.
pub fn valued_form_norm2<S: Scalar>(t: &[S], deg: usize, dim: usize) -> f64 {
    let block = dim.pow(deg as u32);
    (0..dim).map(|a| form_norm2(&t[a * block..(a + 1) * block], deg, dim)).sum()
}

/// Inner product of two real forms in an orthonormal basis.
pub fn form_inner(a: &[f64], b: &[f64], deg: usize, dim: usize) -> f64 {
    increasing_tuples(dim, deg)
        .iter()
        .map(|idx| {
            let k = flat(idx, dim);
            a[k] * b[k]
        })
        .sum()
}

/// Wedge product of a `p`-form and a `q`-form.
pub fn wedge<S: Scalar>(a: &[S], p: usize, b: &[S], q: usize, dim: usize) -> Vec<S> {
    let deg = p + q;
    // (p,q)-shuffles: choose which positions feed the first factor
    let shuffles: Vec<(Vec<usize>, Vec<usize>, i32)> = increasing_tuples(deg, p)
        .into_iter()
        .map(|first| {
            let second: Vec<usize> = (0..deg).filter(|i| !first.contains(i)).collect();
            let perm: Vec<usize> = first.iter().chain(&second).copied().collect();
            let sign = permutation_sign(&perm);
            (first, second, sign)
        })
        .collect();
    antisymmetric_from(dim, deg, |idx| {
        let mut acc = S::zero();
        for (first, second, sign) in &shuffles {
            let ia: Vec<usize> = first.iter().map(|&k| idx[k]).collect();
            let ib: Vec<usize> = second.iter().map(|&k| idx[k]).collect();
            let term = a[flat(&ia, dim)] * b[flat(&ib, dim)];
            acc = if *sign > 0 { acc + term } else { acc - term };
        }
        acc
    })
}

/// Exterior derivative of a form whose components are jets; the result has
/// one lower jet order.
pub fn ext_d(form: &[Jet], deg: usize, dim: usize) -> Vec<Jet> {
    let nvars = form[0].nvars();
    let order = form[0].order().saturating_sub(1);
    let zero = Jet::zero(nvars, order);
    let derivs: Vec<Vec<Jet>> = (0..dim).map(|i| form.iter().map(|c| c.d(i)).collect()).collect();
    let mut reduced = std::collections::HashMap::new();
    for idx in increasing_tuples(dim, deg + 1) {
        let mut acc = zero.clone();
        for k in 0..=deg {
            let rest: Vec<usize> = idx.iter().enumerate().filter(|&(m, _)| m != k).map(|(_, &v)| v).collect();
            let term = &derivs[idx[k]][flat(&rest, dim)];
            if k % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        reduced.insert(flat(&idx, dim), acc);
    }
    let mut out = vec![zero.clone(); dim.pow(deg as u32 + 1)];
    for (k, slot) in out.iter_mut().enumerate() {
        let full = unflat(k, deg + 1, dim);
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

/// Largest deviation from full antisymmetry.
pub fn antisymmetry_defect(t: &[f64], deg: usize, dim: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, &v) in t.iter().enumerate() {
        let idx = unflat(k, deg, dim);
        let s = permutation_sign(&idx);
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        let reference = t[flat(&sorted, dim)];
        let expected = match s {
            0 => 0.0,
            1 => reference,
            _ => -reference,
        };
        worst = worst.max((v - expected).abs());
    }
    worst
}

/// Real part of a complex component array.
pub fn real_part(t: &[Complex64]) -> Vec<f64> {
    t.iter().map(|c| c.re).collect()
}

pub fn to_complex(t: &[f64]) -> Vec<Complex64> {
    t.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Componentwise `a + s·b`.
pub fn axpy<S: Scalar>(a: &[S], s: S, b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

pub fn scaled<S: Scalar>(a: &[S], s: S) -> Vec<S> {
    a.iter().map(|&x| s * x).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis1(dim: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    #[test]
    fn wedge_of_basis_forms() {
        let w = wedge(&basis1(4, 0), 1, &basis1(4, 1), 1, 4);
        assert_eq!(w[flat(&[0, 1], 4)], 1.0);
        assert_eq!(w[flat(&[1, 0], 4)], -1.0);
        let w3 = wedge(&w, 2, &basis1(4, 2), 1, 4);
        assert_eq!(w3[flat(&[0, 1, 2], 4)], 1.0);
        assert_eq!(w3[flat(&[2, 1, 0], 4)], -1.0);
        assert_eq!(antisymmetry_defect(&w3, 3, 4), 0.0);
    }

    #[test]
    fn wedge_is_graded_commutative() {
        let a: Vec<f64> = (0..4).map(|i| 0.3 + i as f64).collect();
        let b = wedge(&basis1(4, 1), 1, &basis1(4, 3), 1, 4);
        let ab = wedge(&a, 1, &b, 2, 4);
        let ba = wedge(&b, 2, &a, 1, 4);
        assert!(max_abs_diff(&ab, &ba) < 1e-15);
        let aa = wedge(&a, 1, &a, 1, 4);
        assert_eq!(sup_norm(&aa), 0.0);
    }

    #[test]
    fn d_of_x1_dx2() {
        // ω = x1 dx2 on R^4
        let dim = 4;
        let p = [0.5, 0.1, 0.2, 0.3];
        let mut form = vec![Jet::zero(4, 2); dim];
        form[1] = Jet::variable(4, 2, 0, p[0]);
        let d = ext_d(&form, 1, dim);
        assert_eq!(d[flat(&[0, 1], dim)].value(), 1.0);
        assert_eq!(d[flat(&[1, 0], dim)].value(), -1.0);
        let dd = ext_d(&d, 2, dim);
        assert!(dd.iter().all(|j| j.value() == 0.0));
    }

    #[test]
    fn change_basis_matches_evaluate() {
        let dim = 3;
        let t: Vec<f64> = (0..9).map(|k| (k as f64).sin()).collect();
        let m: Vec<f64> = (0..9).map(|k| (k as f64 * 0.7).cos()).collect();
        let tb = change_basis(&t, 2, dim, &m);
        let col = |b: usize| -> Vec<f64> { (0..dim).map(|a| m[a * dim + b]).collect() };
        for a in 0..dim {
            for b in 0..dim {
                let (ca, cb) = (col(a), col(b));
                let e = evaluate(&t, dim, &[&ca, &cb]);
                assert!((e - tb[a * dim + b]).abs() < 1e-14);
            }
        }
    }
}
