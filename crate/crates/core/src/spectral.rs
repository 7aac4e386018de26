//! Grids, transforms and Fourier-multiplier calculus on the 1-D and 2-D torus.
//!
//! Fields are stored as complex amplitudes in FFT order with the convention
//! `u(x) = sum_k u_hat(k) exp(i k.x)` on `[-pi, pi]^d`, so that the zero mode
//! is the mean and `||u||_L2^2 = (2 pi)^d sum_k |u_hat(k)|^2`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Uniform periodic grid on `[-pi, pi]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::param("d", format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::param("n", format!("points per dimension must be even and >= 8, got {n}")));
        }
        Ok(Grid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -PI + j as f64 * self.spacing()
    }

    /// Physical coordinates of flat node index `idx` (row-major, x outermost).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.node(idx), 0.0],
            _ => [self.node(idx / self.n), self.node(idx % self.n)],
        }
    }

    /// `(2 pi)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    /// Quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Integer wavevector of flat coefficient index `idx`; the unused
    /// component is zero in 1-D.
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        match self.dim {
            1 => [self.wavenumber(idx), 0],
            _ => [self.wavenumber(idx / self.n), self.wavenumber(idx % self.n)],
        }
    }

    pub fn index_of(&self, k: [i64; 2]) -> Option<usize> {
        let n = self.n as i64;
        let half = n / 2;
        let wrap = |ki: i64| -> Option<usize> {
            if ki.abs() >= half {
                None
            } else {
                Some(ki.rem_euclid(n) as usize)
            }
        };
        match self.dim {
            1 => {
                if k[1] != 0 {
                    return None;
                }
                wrap(k[0])
            }
            _ => Some(wrap(k[0])? * self.n + wrap(k[1])?),
        }
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = (self.n / 2) as i64;
        let k = self.wavevector(idx);
        k[0].abs() == half || k[1].abs() == half
    }

    /// Whether the 2/3 rule keeps this mode: every `|k_i|` strictly below `n/3`.
    pub fn dealias_keeps(&self, idx: usize) -> bool {
        let n = self.n as i64;
        let k = self.wavevector(idx);
        3 * k[0].abs() < n && 3 * k[1].abs() < n
    }

    pub fn k_norm_sq(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        (k[0] * k[0] + k[1] * k[1]) as f64
    }

    /// Grid used to evaluate cubic integrands without aliasing: `3n/2`
    /// points per dimension, rounded up to even.
    pub fn padded(&self) -> Grid {
        let m = 3 * self.n / 2;
        Grid {
            dim: self.dim,
            n: m + m % 2,
        }
    }

    pub fn refined(&self, factor: usize) -> Grid {
        Grid {
            dim: self.dim,
            n: self.n * factor,
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            1 => write!(f, "{}", self.n),
            _ => write!(f, "{}x{}", self.n, self.n),
        }
    }
}

/// `|k|^(2s)` with the convention that the zero mode counts only when `s = 0`,
/// so that the order-zero homogeneous norm is the full L2 norm.
fn weight(k2: f64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else if k2 == 0.0 {
        0.0
    } else {
        k2.powf(s)
    }
}

/// Band-limited real scalar field on the torus, stored spectrally.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = Complex64::new(c, 0.0);
        f
    }

    /// Builds a field from coefficients in FFT order. Nyquist modes are
    /// zeroed; the caller is responsible for Hermitian symmetry.
    pub fn from_coeffs(grid: Grid, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        for (idx, c) in coeffs.iter_mut().enumerate() {
            if grid.is_nyquist(idx) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        Ok(SpectralField { grid, coeffs })
    }

    /// Samples `f` at the grid nodes and transforms.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let samples: Vec<f64> = (0..grid.len()).map(|idx| f(grid.point(idx))).collect();
        Transform::new(grid)
            .forward(&samples)
            .expect("sample count matches grid by construction")
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Amplitude of wavevector `k`, zero when `k` is not representable.
    pub fn coeff(&self, k: [i64; 2]) -> Complex64 {
        self.grid
            .index_of(k)
            .map_or(Complex64::new(0.0, 0.0), |idx| self.coeffs[idx])
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Applies a Fourier multiplier given as a function of the wavevector.
    pub fn apply(&self, symbol: impl Fn([i64; 2]) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| c * symbol(self.grid.wavevector(idx)))
            .collect();
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    /// `Lambda^alpha = (-Laplacian)^(alpha/2)`, multiplier `|k|^alpha`.
    pub fn fractional_laplacian(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(self.apply(|k| {
            let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
            let m = if k2 == 0.0 { 0.0 } else { k2.powf(alpha / 2.0) };
            Complex64::new(m, 0.0)
        }))
    }

    /// Partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        self.apply(|k| I * k[axis] as f64)
    }

    pub fn gradient(&self) -> VectorField {
        VectorField {
            components: (0..self.grid.dim()).map(|a| self.derivative(a)).collect(),
        }
    }

    pub fn laplacian(&self) -> Self {
        self.apply(|k| Complex64::new(-((k[0] * k[0] + k[1] * k[1]) as f64), 0.0))
    }

    /// 2/3-rule truncation.
    pub fn dealias(&self) -> Self {
        let mut out = self.clone();
        out.dealias_in_place();
        out
    }

    pub(crate) fn dealias_in_place(&mut self) {
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            if !self.grid.dealias_keeps(idx) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Squared Sobolev norm of order `s`; the homogeneous version drops the
    /// zero mode unless `s = 0`.
    pub fn sobolev_norm_sq(&self, s: f64, homogeneous: bool) -> f64 {
        assert!(s >= 0.0, "Sobolev order must be non-negative");
        let hom: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| weight(self.grid.k_norm_sq(idx), s) * c.norm_sqr())
            .sum();
        let mut total = self.grid.volume() * hom;
        if !homogeneous && s > 0.0 {
            total += self.sobolev_norm_sq(0.0, true);
        }
        total
    }

    pub fn sobolev_norm(&self, s: f64, homogeneous: bool) -> f64 {
        self.sobolev_norm_sq(s, homogeneous).sqrt()
    }

    /// L2 inner product by Plancherel.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        Ok(self.grid.volume() * s)
    }

    /// `L^p` norm by nodal quadrature for `p` in {2, 4, inf}.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        let mut tr = Transform::new(self.grid);
        self.lp_norm_with(p, &mut tr)
    }

    pub fn lp_norm_with(&self, p: f64, tr: &mut Transform) -> Result<f64> {
        let exponent = LpExponent::try_from(p)?;
        let values = tr.inverse(self)?;
        Ok(exponent.norm(&values, self.grid.cell_volume()))
    }

    pub fn to_samples(&self) -> Vec<f64> {
        Transform::new(self.grid)
            .inverse(self)
            .expect("transform built for this grid")
    }

    /// Copies the representable modes onto another grid of the same
    /// dimension (zero padding or truncation).
    pub fn resample(&self, target: Grid) -> Result<Self> {
        if target.dim() != self.grid.dim() {
            return Err(Error::GridMismatch);
        }
        let mut out = SpectralField::zeros(target);
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if let Some(j) = target.index_of(self.grid.wavevector(idx)) {
                out.coeffs[j] = c;
            }
        }
        Ok(out)
    }

    /// `x -> f(lambda x)` on a grid `lambda` times finer: mode `k` moves to
    /// `lambda k`.
    pub fn dilate(&self, lambda: usize) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::param("lambda", "must be a positive integer"));
        }
        let target = self.grid.refined(lambda);
        let l = lambda as i64;
        let mut out = SpectralField::zeros(target);
        for (idx, &c) in self.coeffs.iter().enumerate() {
            let k = self.grid.wavevector(idx);
            if let Some(j) = target.index_of([l * k[0], l * k[1]]) {
                out.coeffs[j] = c;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> Self {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn max_coeff_diff(&self, other: &SpectralField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("diffusion exponent must lie in (0, 2], got {alpha}")))
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        self.scaled(a)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

/// `d` scalar components sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<SpectralField>,
}

impl VectorField {
    pub fn new(components: Vec<SpectralField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::param("components", "vector field needs at least one component"))?;
        let grid = first.grid();
        if components.len() != grid.dim() {
            return Err(Error::SizeMismatch {
                expected: grid.dim(),
                actual: components.len(),
            });
        }
        if components.iter().any(|c| c.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { components })
    }

    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            components: vec![SpectralField::zeros(grid); grid.dim()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[SpectralField] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &SpectralField {
        &self.components[i]
    }

    pub(crate) fn components_mut(&mut self) -> &mut [SpectralField] {
        &mut self.components
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(SpectralField::is_finite)
    }

    pub fn divergence(&self) -> SpectralField {
        let mut out = SpectralField::zeros(self.grid());
        for (axis, c) in self.components.iter().enumerate() {
            out += &c.derivative(axis);
        }
        out
    }

    /// Scalar curl `d_x v_y - d_y v_x`; 2-D only.
    pub fn curl2d(&self) -> Result<SpectralField> {
        if self.grid().dim() != 2 {
            return Err(Error::Dimension {
                op: "curl2d",
                dim: self.grid().dim(),
            });
        }
        Ok(&self.components[1].derivative(0) - &self.components[0].derivative(1))
    }

    /// Sum over components of the squared Sobolev norms.
    pub fn sobolev_norm_sq(&self, s: f64, homogeneous: bool) -> f64 {
        self.components
            .iter()
            .map(|c| c.sobolev_norm_sq(s, homogeneous))
            .sum()
    }

    pub fn sobolev_norm(&self, s: f64, homogeneous: bool) -> f64 {
        self.sobolev_norm_sq(s, homogeneous).sqrt()
    }

    /// `||grad v||_L2`, all first derivatives of all components.
    pub fn gradient_norm(&self) -> f64 {
        self.sobolev_norm(1.0, true)
    }

    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        VectorField {
            components: self.components.iter().map(f).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|c| c.scaled(a))
    }

    pub fn dealias(&self) -> Self {
        self.map(SpectralField::dealias)
    }

    pub fn max_coeff_diff(&self, other: &VectorField) -> Result<f64> {
        let mut m: f64 = 0.0;
        for (a, b) in self.components.iter().zip(&other.components) {
            m = m.max(a.max_coeff_diff(b)?);
        }
        Ok(m)
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        VectorField {
            components: self.components.iter().zip(&rhs.components).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        VectorField {
            components: self.components.iter().zip(&rhs.components).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Supported Lebesgue exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpExponent {
    Two,
    Four,
    Infinity,
}

impl TryFrom<f64> for LpExponent {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        if p == 2.0 {
            Ok(LpExponent::Two)
        } else if p == 4.0 {
            Ok(LpExponent::Four)
        } else if p == f64::INFINITY {
            Ok(LpExponent::Infinity)
        } else {
            Err(Error::Unsupported(format!("L^p norm with p = {p}")))
        }
    }
}

impl LpExponent {
    /// Nodal (periodic trapezoid) quadrature of `|f|^p`.
    pub fn norm(self, values: &[f64], cell: f64) -> f64 {
        match self {
            LpExponent::Two => (cell * values.iter().map(|v| v * v).sum::<f64>()).sqrt(),
            LpExponent::Four => (cell * values.iter().map(|v| (v * v) * (v * v)).sum::<f64>()).powf(0.25),
            LpExponent::Infinity => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// FFT plans and workspace for one grid. Not shared between simulations.
pub struct Transform {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    /// `(-1)^(k_1 + ... + k_d)`, the phase of the `-pi` grid offset.
    sign: Vec<f64>,
    elapsed: Duration,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl Transform {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let sign = (0..grid.len())
            .map(|idx| {
                let k = grid.wavevector(idx);
                if (k[0] + k[1]).rem_euclid(2) == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        Transform {
            grid,
            forward,
            inverse,
            buf: vec![Complex64::new(0.0, 0.0); grid.len()],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            sign,
            elapsed: Duration::ZERO,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Wall time spent inside FFT kernels since construction or the last reset.
    pub fn fft_time(&self) -> Duration {
        self.elapsed
    }

    pub fn reset_timer(&mut self) {
        self.elapsed = Duration::ZERO;
    }

    fn run(&mut self, forward: bool) {
        let start = Instant::now();
        let plan = if forward { &self.forward } else { &self.inverse };
        plan.process_with_scratch(&mut self.buf, &mut self.scratch);
        if self.grid.dim() == 2 {
            transpose(&mut self.buf, self.grid.n());
            plan.process_with_scratch(&mut self.buf, &mut self.scratch);
            transpose(&mut self.buf, self.grid.n());
        }
        self.elapsed += start.elapsed();
    }

    pub fn forward(&mut self, samples: &[f64]) -> Result<SpectralField> {
        let mut out = SpectralField::zeros(self.grid);
        self.forward_into(samples, &mut out)?;
        Ok(out)
    }

    pub fn forward_into(&mut self, samples: &[f64], out: &mut SpectralField) -> Result<()> {
        if samples.len() != self.grid.len() {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                actual: samples.len(),
            });
        }
        if out.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        for (b, &s) in self.buf.iter_mut().zip(samples) {
            *b = Complex64::new(s, 0.0);
        }
        self.run(true);
        let scale = 1.0 / self.grid.len() as f64;
        for (idx, c) in out.coeffs.iter_mut().enumerate() {
            *c = if self.grid.is_nyquist(idx) {
                Complex64::new(0.0, 0.0)
            } else {
                self.buf[idx] * (self.sign[idx] * scale)
            };
        }
        Ok(())
    }

    pub fn inverse(&mut self, f: &SpectralField) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid.len()];
        self.inverse_into(f, &mut out)?;
        Ok(out)
    }

    pub fn inverse_into(&mut self, f: &SpectralField, out: &mut [f64]) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        if out.len() != self.grid.len() {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                actual: out.len(),
            });
        }
        for ((b, &c), &s) in self.buf.iter_mut().zip(&f.coeffs).zip(&self.sign) {
            *b = c * s;
        }
        self.run(false);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re;
        }
        Ok(())
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}
