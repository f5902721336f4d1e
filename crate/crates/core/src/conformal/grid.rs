//! Periodic scalar fields on `[0,2π)^d`: uniform grids with their discrete
//! Fourier coefficients, and trigonometric sums with exact jets.

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::jet::{Jet, Layout};
use crate::{GeomError, Result};

pub const GRID_MAGIC: &[u8; 8] = b"AHGGRID1";

/// Signed wavenumbers of an `n`-point periodic grid; the Nyquist mode is `+n/2`.
pub fn wavenumbers(n: usize) -> Vec<f64> {
    (0..n).map(|m| if m <= n / 2 { m as f64 } else { m as f64 - n as f64 }).collect()
}

/// Multi-dimensional complex FFT over a row-major array (first axis slowest).
pub struct FftNd {
    res: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("res", &self.res).finish()
    }
}

impl FftNd {
    pub fn new(res: &[usize]) -> FftNd {
        let mut planner = FftPlanner::new();
        FftNd {
            res: res.to_vec(),
            forward: res.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: res.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values to coefficients `c_k` with `f(x) = Σ c_k e^{ik·x}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.pass(data, &self.forward);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Coefficients to values.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.pass(data, &self.inverse);
    }

    fn pass(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let total = self.len();
        assert_eq!(data.len(), total);
        let mut stride = total;
        for (axis, &n) in self.res.iter().enumerate() {
            stride /= n;
            let plan = &plans[axis];
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            let block = n * stride;
            for outer in 0..total / block {
                for inner in 0..stride {
                    let base = outer * block + inner;
                    for (m, z) in line.iter_mut().enumerate() {
                        *z = data[base + m * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (m, z) in line.iter().enumerate() {
                        data[base + m * stride] = *z;
                    }
                }
            }
        }
    }

    /// Wavevector of flat index `idx`.
    pub fn wavevector(&self, idx: usize) -> Vec<f64> {
        let mut k = vec![0.0; self.res.len()];
        let mut rem = idx;
        for axis in (0..self.res.len()).rev() {
            let n = self.res[axis];
            let m = rem % n;
            rem /= n;
            k[axis] = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        }
        k
    }
}

/// Real field sampled on the uniform grid `x_m = 2π m / N` of `[0,2π)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    res: Vec<usize>,
    values: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(res: Vec<usize>, values: Vec<f64>) -> Result<SpectralGrid> {
        if res.is_empty() || res.iter().any(|&n| n < 2 || !n.is_power_of_two()) {
            return Err(GeomError::InvalidParameter(format!("grid resolution {res:?} must be powers of two ≥ 2")));
        }
        let total: usize = res.iter().product();
        if values.len() != total {
            return Err(GeomError::InvalidParameter(format!(
                "grid of resolution {res:?} needs {total} values, got {}",
                values.len()
            )));
        }
        Ok(SpectralGrid { res, values })
    }

    pub fn zeros(res: Vec<usize>) -> Result<SpectralGrid> {
        let total = res.iter().product();
        SpectralGrid::new(res, vec![0.0; total])
    }

    pub fn from_fn(res: Vec<usize>, mut f: impl FnMut(&[f64]) -> f64) -> Result<SpectralGrid> {
        let mut grid = SpectralGrid::zeros(res)?;
        for idx in 0..grid.values.len() {
            grid.values[idx] = f(&grid.node(idx));
        }
        Ok(grid)
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn ndim(&self) -> usize {
        self.res.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Coordinates of flat index `idx`.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        node_of(&self.res, idx)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftNd::new(&self.res).forward(&mut data);
        data
    }

    /// Real part of the inverse transform of `coeffs`.
    pub fn from_coefficients(res: Vec<usize>, coeffs: &[Complex64]) -> Result<SpectralGrid> {
        let mut data = coeffs.to_vec();
        FftNd::new(&res).inverse(&mut data);
        SpectralGrid::new(res, data.iter().map(|z| z.re).collect())
    }

    /// `max |c_k − conj(c_{−k})|`, zero for real fields.
    pub fn hermitian_symmetry_residual(&self) -> f64 {
        let c = self.coefficients();
        let mut worst: f64 = 0.0;
        for idx in 0..c.len() {
            let j = negated_index(&self.res, idx);
            worst = worst.max((c[idx] - c[j].conj()).norm());
        }
        worst
    }

    /// Relative error of values → coefficients → values.
    pub fn round_trip_error(&self) -> Result<f64> {
        let back = SpectralGrid::from_coefficients(self.res.clone(), &self.coefficients())?;
        let scale = self.sup_norm().max(f64::MIN_POSITIVE);
        let err = self.values.iter().zip(&back.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        Ok(err / scale.max(1.0))
    }

    /// Spectral partial derivative along the listed axes (repeats allowed).
    pub fn derivative(&self, axes: &[usize]) -> Result<SpectralGrid> {
        if axes.iter().any(|&a| a >= self.ndim()) {
            return Err(GeomError::InvalidParameter(format!("derivative axes {axes:?} out of range")));
        }
        let fft = FftNd::new(&self.res);
        let coeffs = self.coefficients();
        let out = spectral_derivative(&fft, &coeffs, axes);
        SpectralGrid::new(self.res.clone(), out)
    }

    /// Trigonometric sum interpolating the grid values.
    pub fn to_trig_sum(&self) -> TrigSum {
        let fft = FftNd::new(&self.res);
        let coeffs = self.coefficients();
        let mut sum = TrigSum::new(self.ndim());
        sum.constant = coeffs[0].re;
        for (idx, c) in coeffs.iter().enumerate().skip(1) {
            if c.norm() > 0.0 {
                sum.modes.push(TrigMode { k: fft.wavevector(idx), amplitude: *c });
            }
        }
        sum
    }

    /// Jet of the trigonometric interpolant at an arbitrary point.
    pub fn jet_at(&self, p: &[f64], order: usize) -> Result<Jet> {
        self.to_trig_sum().jet(p, order)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&(self.res.len() as u64).to_le_bytes())?;
        for &n in &self.res {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<SpectralGrid> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(GeomError::Format("grid file does not start with AHGGRID1".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let axes = u64::from_le_bytes(word) as usize;
        if axes == 0 || axes > 12 {
            return Err(GeomError::Format(format!("grid axis count {axes} out of range")));
        }
        let mut res = Vec::with_capacity(axes);
        for _ in 0..axes {
            r.read_exact(&mut word)?;
            res.push(u64::from_le_bytes(word) as usize);
        }
        let total = res.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        let total = total.filter(|&t| t <= 1 << 28).ok_or_else(|| GeomError::Format(format!("grid resolution {res:?} too large")))?;
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        SpectralGrid::new(res, values).map_err(|e| GeomError::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SpectralGrid> {
        let file = std::fs::File::open(path)?;
        SpectralGrid::read_from(std::io::BufReader::new(file))
    }
}

pub(crate) fn node_of(res: &[usize], idx: usize) -> Vec<f64> {
    let mut x = vec![0.0; res.len()];
    let mut rem = idx;
    for axis in (0..res.len()).rev() {
        let n = res[axis];
        x[axis] = TAU * (rem % n) as f64 / n as f64;
        rem /= n;
    }
    x
}

fn negated_index(res: &[usize], idx: usize) -> usize {
    let mut out = 0;
    let mut rem = idx;
    let mut stride = 1;
    for axis in (0..res.len()).rev() {
        let n = res[axis];
        let m = rem % n;
        rem /= n;
        out += ((n - m) % n) * stride;
        stride *= n;
    }
    out
}

/// Real part of the inverse transform of `c_k (ik)^β`, i.e. the derivative of
/// the trigonometric interpolant evaluated at the nodes.
pub fn spectral_derivative(fft: &FftNd, coeffs: &[Complex64], axes: &[usize]) -> Vec<f64> {
    let mut data = coeffs.to_vec();
    if !axes.is_empty() {
        for (idx, z) in data.iter_mut().enumerate() {
            let k = fft.wavevector(idx);
            let mut factor = Complex64::new(1.0, 0.0);
            for &a in axes {
                factor *= Complex64::new(0.0, k[a]);
            }
            *z *= factor;
        }
    }
    fft.inverse(&mut data);
    data.iter().map(|z| z.re).collect()
}

/// One term `Re(amplitude · e^{ik·x})`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigMode {
    pub k: Vec<f64>,
    pub amplitude: Complex64,
}

/// `constant + Σ Re(a_m e^{i k_m·x})`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSum {
    pub nvars: usize,
    pub constant: f64,
    pub modes: Vec<TrigMode>,
}

impl TrigSum {
    pub fn new(nvars: usize) -> TrigSum {
        TrigSum { nvars, constant: 0.0, modes: Vec::new() }
    }

    /// Adds `a cos(k·x) + b sin(k·x)`.
    pub fn push(&mut self, k: Vec<f64>, a: f64, b: f64) {
        assert_eq!(k.len(), self.nvars);
        self.modes.push(TrigMode { k, amplitude: Complex64::new(a, -b) });
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        self.constant
            + self
                .modes
                .iter()
                .map(|m| {
                    let th: f64 = m.k.iter().zip(p).map(|(k, x)| k * x).sum();
                    m.amplitude.re * th.cos() - m.amplitude.im * th.sin()
                })
                .sum::<f64>()
    }

    pub fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        if p.len() != self.nvars {
            return Err(GeomError::InvalidParameter(format!(
                "trigonometric sum in {} variables evaluated at a {}-point",
                self.nvars,
                p.len()
            )));
        }
        if order > crate::jet::MAX_ORDER {
            return Err(GeomError::OrderOverflow(order));
        }
        let layout = Layout::get(self.nvars);
        let slots = layout.len(order);
        let table: Vec<(&[u8], usize, f64)> = (0..slots)
            .map(|s| {
                let e = layout.exponent(s);
                let deg = e.iter().map(|&x| x as usize).sum();
                let fact: f64 = e.iter().map(|&x| (1..=x as u32).product::<u32>() as f64).product();
                (e, deg, 1.0 / fact)
            })
            .collect();
        let mut c = vec![0.0; slots];
        c[0] = self.constant;
        for m in &self.modes {
            let th: f64 = m.k.iter().zip(p).map(|(k, x)| k * x).sum();
            let w = m.amplitude * Complex64::new(th.cos(), th.sin());
            let rot = [w.re, -w.im, -w.re, w.im];
            for (slot, (e, deg, inv)) in table.iter().enumerate() {
                let mut mono = *inv;
                for (v, &pow) in e.iter().enumerate() {
                    for _ in 0..pow {
                        mono *= m.k[v];
                    }
                }
                c[slot] += rot[deg % 4] * mono;
            }
        }
        Ok(Jet::from_coefficients(self.nvars, order, &c))
    }

    /// Samples the sum on a grid.
    pub fn to_grid(&self, res: Vec<usize>) -> Result<SpectralGrid> {
        SpectralGrid::from_fn(res, |x| self.value(x))
    }
}
