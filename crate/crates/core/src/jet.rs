//! Truncated multivariate Taylor arithmetic ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = ∂^α f(p) / α!` of a scalar
//! field at a point `p`, for every multi-index `α` of total degree at most the
//! jet's order. Coefficients are indexed by unordered multi-indices, so mixed
//! partials are symmetric by construction.
//!
//! Monomials are enumerated in graded order: every degree-`d` monomial comes
//! after all monomials of degree `< d`. The coefficient vector of an order-`k`
//! jet is therefore a prefix of the order-`k+1` vector, which makes truncation
//! a slice operation and lets one table per variable count serve every order.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use smallvec::SmallVec;

/// Highest supported jet order.
pub const MAX_ORDER: usize = 3;
/// Highest supported number of variables.
pub const MAX_VARS: usize = 12;

type Coeffs = SmallVec<[f64; 35]>;

/// Monomial bookkeeping shared by all jets over the same number of variables.
#[derive(Debug)]
pub struct Layout {
    nvars: usize,
    exponents: Vec<Vec<u8>>,
    len_by_order: [usize; MAX_ORDER + 1],
    mul: Vec<(u32, u32, u32)>,
    mul_end: [usize; MAX_ORDER + 1],
    // deriv[v] holds (dst, src, factor), sorted by dst
    deriv: Vec<Vec<(u32, u32, f64)>>,
    deriv_end: Vec<[usize; MAX_ORDER + 1]>,
    var_slot: Vec<usize>,
}

fn monomials(nvars: usize, degree: usize) -> Vec<Vec<u8>> {
    fn rec(nvars: usize, var: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if var + 1 == nvars {
            cur[var] = left as u8;
            out.push(cur.clone());
            cur[var] = 0;
            return;
        }
        for k in (0..=left).rev() {
            cur[var] = k as u8;
            rec(nvars, var + 1, left - k, cur, out);
        }
        cur[var] = 0;
    }
    let mut out = Vec::new();
    let mut cur = vec![0u8; nvars];
    rec(nvars, 0, degree, &mut cur, &mut out);
    out
}

impl Layout {
    fn build(nvars: usize) -> Layout {
        let mut exponents = Vec::new();
        let mut len_by_order = [0usize; MAX_ORDER + 1];
        for (d, slot) in len_by_order.iter_mut().enumerate() {
            exponents.extend(monomials(nvars, d));
            *slot = exponents.len();
        }
        let index_of = |e: &[u8]| -> Option<usize> { exponents.iter().position(|x| x.as_slice() == e) };
        let degree = |i: usize| -> usize { exponents[i].iter().map(|&x| x as usize).sum() };

        let mut mul = Vec::new();
        for i in 0..exponents.len() {
            for j in 0..exponents.len() {
                if degree(i) + degree(j) > MAX_ORDER {
                    continue;
                }
                let sum: Vec<u8> = exponents[i].iter().zip(&exponents[j]).map(|(a, b)| a + b).collect();
                let k = index_of(&sum).expect("product monomial within layout");
                mul.push((i as u32, j as u32, k as u32));
            }
        }
        mul.sort_by_key(|&(_, _, k)| k);
        let mut mul_end = [0usize; MAX_ORDER + 1];
        for (d, end) in mul_end.iter_mut().enumerate() {
            *end = mul.iter().filter(|&&(_, _, k)| (k as usize) < len_by_order[d]).count();
        }

        let mut deriv = Vec::with_capacity(nvars);
        let mut deriv_end = Vec::with_capacity(nvars);
        let mut var_slot = Vec::with_capacity(nvars);
        for v in 0..nvars {
            let mut unit = vec![0u8; nvars];
            unit[v] = 1;
            var_slot.push(index_of(&unit).unwrap());
            let mut table = Vec::new();
            for dst in 0..len_by_order[MAX_ORDER - 1] {
                let mut e = exponents[dst].clone();
                e[v] += 1;
                let src = index_of(&e).unwrap();
                table.push((dst as u32, src as u32, e[v] as f64));
            }
            let mut ends = [0usize; MAX_ORDER + 1];
            for (d, end) in ends.iter_mut().enumerate() {
                *end = table.iter().filter(|&&(dst, _, _)| (dst as usize) < len_by_order[d]).count();
            }
            deriv.push(table);
            deriv_end.push(ends);
        }
        Layout { nvars, exponents, len_by_order, mul, mul_end, deriv, deriv_end, var_slot }
    }

    /// Layout for `nvars` variables; built once and shared.
    pub fn get(nvars: usize) -> &'static Layout {
        static LAYOUTS: OnceLock<Vec<OnceLock<Layout>>> = OnceLock::new();
        assert!((1..=MAX_VARS).contains(&nvars), "jet variable count {nvars} out of range");
        let all = LAYOUTS.get_or_init(|| (0..=MAX_VARS).map(|_| OnceLock::new()).collect());
        all[nvars].get_or_init(|| Layout::build(nvars))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Number of coefficients of a jet of the given order.
    pub fn len(&self, order: usize) -> usize {
        self.len_by_order[order]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of the coefficient stored at `slot`.
    pub fn exponent(&self, slot: usize) -> &[u8] {
        &self.exponents[slot]
    }

    /// Storage slot of a multi-index, if it is within the maximum order.
    pub fn slot_of(&self, exponent: &[u8]) -> Option<usize> {
        self.exponents.iter().position(|e| e.as_slice() == exponent)
    }
}

/// Truncated Taylor expansion of a scalar field at a point.
#[derive(Clone, PartialEq)]
pub struct Jet {
    nvars: u8,
    order: u8,
    c: Coeffs,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(n={}, k={}, {:?})", self.nvars, self.order, self.c.as_slice())
    }
}

impl Jet {
    pub fn constant(nvars: usize, order: usize, value: f64) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let len = Layout::get(nvars).len(order);
        let mut c: Coeffs = SmallVec::from_elem(0.0, len);
        c[0] = value;
        Jet { nvars: nvars as u8, order: order as u8, c }
    }

    pub fn zero(nvars: usize, order: usize) -> Jet {
        Jet::constant(nvars, order, 0.0)
    }

    /// The coordinate function `x_var` expanded at `value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: f64) -> Jet {
        assert!(var < nvars);
        let mut j = Jet::constant(nvars, order, value);
        if order >= 1 {
            let slot = Layout::get(nvars).var_slot[var];
            j.c[slot] = 1.0;
        }
        j
    }

    /// Builds a jet from raw Taylor coefficients in layout order.
    pub fn from_coefficients(nvars: usize, order: usize, coeffs: &[f64]) -> Jet {
        let len = Layout::get(nvars).len(order);
        assert_eq!(coeffs.len(), len, "coefficient count does not match layout");
        Jet { nvars: nvars as u8, order: order as u8, c: SmallVec::from_slice(coeffs) }
    }

    /// The same expansion over `nvars` variables, the extra ones trailing and absent.
    pub fn extend_vars(&self, nvars: usize) -> Jet {
        assert!(nvars >= self.nvars(), "cannot drop variables");
        let src = self.layout();
        let dst = Layout::get(nvars);
        let mut c: Coeffs = SmallVec::from_elem(0.0, dst.len(self.order()));
        let mut e = vec![0u8; nvars];
        for (slot, &v) in self.c.iter().enumerate() {
            e[..self.nvars()].copy_from_slice(src.exponent(slot));
            c[dst.slot_of(&e).expect("exponent within layout")] = v;
        }
        Jet { nvars: nvars as u8, order: self.order, c }
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.nvars as usize
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order as usize
    }

    #[inline]
    pub fn layout(&self) -> &'static Layout {
        Layout::get(self.nvars())
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficients in layout order.
    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// First partial derivative `∂f/∂x_var` at the expansion point.
    pub fn gradient(&self, var: usize) -> f64 {
        if self.order == 0 {
            return f64::NAN;
        }
        self.c[self.layout().var_slot[var]]
    }

    /// Partial derivative `∂^k f / ∂x_{vars[0]} … ∂x_{vars[k-1]}` at the point.
    ///
    /// Returns NaN when the requested order exceeds the jet's order.
    pub fn partial(&self, vars: &[usize]) -> f64 {
        if vars.len() > self.order() {
            return f64::NAN;
        }
        let mut e = vec![0u8; self.nvars()];
        for &v in vars {
            e[v] += 1;
        }
        let slot = self.layout().slot_of(&e).expect("multi-index within layout");
        let factorial: f64 = e.iter().map(|&k| (1..=k as u64).product::<u64>() as f64).product();
        self.c[slot] * factorial
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order());
        let len = self.layout().len(order);
        Jet { nvars: self.nvars, order: order as u8, c: SmallVec::from_slice(&self.c[..len]) }
    }

    /// Partial derivative as a jet of one lower order.
    ///
    /// # Panics
    /// Panics on an order-0 jet; callers are expected to request enough jet
    /// order up front.
    pub fn d(&self, var: usize) -> Jet {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let layout = self.layout();
        let order = self.order() - 1;
        let mut c: Coeffs = SmallVec::from_elem(0.0, layout.len(order));
        let table = &layout.deriv[var][..layout.deriv_end[var][order]];
        for &(dst, src, factor) in table {
            c[dst as usize] = factor * self.c[src as usize];
        }
        Jet { nvars: self.nvars, order: order as u8, c }
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(self.nvars, other.nvars, "jets over different variable counts");
        let order = self.order.min(other.order);
        let len = self.layout().len(order as usize);
        let c: Coeffs = self.c[..len].iter().zip(&other.c[..len]).map(|(&a, &b)| f(a, b)).collect();
        Jet { nvars: self.nvars, order, c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { nvars: self.nvars, order: self.order, c: self.c.iter().map(|&a| a * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    /// Truncated product.
    pub fn mul_jet(&self, other: &Jet) -> Jet {
        debug_assert_eq!(self.nvars, other.nvars, "jets over different variable counts");
        let order = self.order.min(other.order) as usize;
        let layout = self.layout();
        let mut c: Coeffs = SmallVec::from_elem(0.0, layout.len(order));
        let (a, b) = (&self.c, &other.c);
        for &(i, j, k) in &layout.mul[..layout.mul_end[order]] {
            c[k as usize] += a[i as usize] * b[j as usize];
        }
        Jet { nvars: self.nvars, order: order as u8, c }
    }

    /// `self += a * b`, truncated to this jet's order.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let order = self.order.min(a.order).min(b.order) as usize;
        if order < self.order() {
            *self = self.truncate(order);
        }
        let layout = self.layout();
        for &(i, j, k) in &layout.mul[..layout.mul_end[order]] {
            self.c[k as usize] += a.c[i as usize] * b.c[j as usize];
        }
    }

    /// Composition `f ∘ self` given `f(v), f'(v), f''(v), f'''(v)` at `v = self.value()`.
    pub fn compose(&self, derivs: [f64; MAX_ORDER + 1]) -> Jet {
        let order = self.order();
        let mut h = self.clone();
        h.c[0] = 0.0;
        // Horner in the nilpotent part h
        let taylor = [derivs[0], derivs[1], derivs[2] / 2.0, derivs[3] / 6.0];
        let mut acc = Jet::constant(self.nvars(), order, taylor[order]);
        for k in (0..order).rev() {
            acc = acc.mul_jet(&h);
            acc.c[0] += taylor[k];
        }
        acc
    }

    pub fn recip(&self) -> Jet {
        let v = self.value();
        self.compose([1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v), -6.0 / (v * v * v * v)])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn tan(&self) -> Jet {
        let t = self.value().tan();
        let sec2 = 1.0 + t * t;
        self.compose([t, sec2, 2.0 * t * sec2, 2.0 * sec2 * (1.0 + 3.0 * t * t)])
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose([e, e, e, e])
    }

    pub fn ln(&self) -> Jet {
        let v = self.value();
        self.compose([v.ln(), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)])
    }

    pub fn sqrt(&self) -> Jet {
        let v = self.value();
        let r = v.sqrt();
        self.compose([r, 0.5 / r, -0.25 / (r * v), 0.375 / (r * v * v)])
    }

    pub fn atan(&self) -> Jet {
        let v = self.value();
        let q = 1.0 / (1.0 + v * v);
        self.compose([v.atan(), q, -2.0 * v * q * q, (6.0 * v * v - 2.0) * q * q * q])
    }

    /// Integer power by repeated squaring; valid at any expansion point.
    pub fn powi(&self, n: i64) -> Jet {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut result = Jet::constant(self.nvars(), self.order(), 1.0);
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        result
    }

    /// Real power `self^r`; requires a positive value unless `r` is an integer.
    pub fn powf(&self, r: f64) -> Jet {
        if r.fract() == 0.0 && r.abs() < 1e9 {
            return self.powi(r as i64);
        }
        let v = self.value();
        let p = v.powf(r);
        self.compose([
            p,
            r * p / v,
            r * (r - 1.0) * p / (v * v),
            r * (r - 1.0) * (r - 2.0) * p / (v * v * v),
        ])
    }

    /// Largest absolute coefficient difference; jets are compared at the common order.
    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        let len = self.c.len().min(other.c.len());
        self.c[..len].iter().zip(&other.c[..len]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

macro_rules! jet_binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.zip_with(rhs, |a, b| a $op b)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, +);
jet_binop!(Sub, sub, -);

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}
impl Mul<Jet> for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}
impl Mul<&Jet> for Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}
impl Mul<Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}

impl Div<&Jet> for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.mul_jet(&rhs.recip())
    }
}
impl Div<Jet> for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        &self / &rhs
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}
impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.order < self.order {
            *self = self.truncate(rhs.order());
        }
        let len = self.c.len();
        for (a, b) in self.c.iter_mut().zip(&rhs.c[..len]) {
            *a += b;
        }
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if rhs.order < self.order {
            *self = self.truncate(rhs.order());
        }
        let len = self.c.len();
        for (a, b) in self.c.iter_mut().zip(&rhs.c[..len]) {
            *a -= b;
        }
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        for a in self.c.iter_mut() {
            *a *= rhs;
        }
    }
}
