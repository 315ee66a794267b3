//! Periodic grids, the discrete Fourier transform and diagonal Fourier
//! multipliers.
//!
//! Transform convention: `û_k = (1/n) Σ_j u(x_j) exp(−i ξ_k x_j)` with
//! `x_j = j·h` and `ξ_k = 2πk/L`. Coefficients are stored in FFT order, i.e.
//! slot `i` holds mode `k = i` for `i < n/2` and `k = i − n` otherwise, so the
//! slot `n/2` carries the unpaired Nyquist mode `k = −n/2`.
//!
//! Norms carry the factor `L` so that discrete norms of resolved fields agree
//! with the continuum integrals: `‖u‖_s² = L Σ_k (1+ξ_k²)^s |û_k|²`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Relative tolerance on the imaginary residue accepted by [`inverse`].
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("spectrum is not Hermitian: imaginary residue {residue:.3e} (relative)")]
    NonHermitianSpectrum { residue: f64 },
    #[error("symbol `{label}` is not finite at wavenumber {xi}")]
    NonFiniteSymbol { label: String, xi: f64 },
    #[error("Helmholtz inverse needs mu*beta < 0, got {mubeta}")]
    InvalidSign { mubeta: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Uniform periodic grid on `[0, length)`.
pub struct Grid {
    length: f64,
    n: usize,
    spacing: f64,
    wavenumbers: Vec<f64>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("length", &self.length).field("n", &self.n).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Arc<Grid>, SpectralError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::InvalidGrid(format!("length must be positive and finite, got {length}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(SpectralError::InvalidGrid(format!("n must be even and >= 8, got {n}")));
        }
        let mut planner = FftPlanner::new();
        let wavenumbers = (0..n).map(|i| 2.0 * std::f64::consts::PI * mode_of_slot(i, n) as f64 / length).collect();
        Ok(Arc::new(Grid {
            length,
            n,
            spacing: length / n as f64,
            wavenumbers,
            fft_forward: planner.plan_fft_forward(n),
            fft_inverse: planner.plan_fft_inverse(n),
        }))
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Wavenumbers in FFT slot order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.spacing
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.x(j))
    }

    /// Storage slot of integer mode `k`, for `−n/2 ≤ k < n/2`.
    pub fn slot_of_mode(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k < -half || k >= half {
            return None;
        }
        Some(if k >= 0 { k as usize } else { (k + self.n as i64) as usize })
    }

    /// Integer mode index stored in slot `i`.
    pub fn mode_of_slot(&self, i: usize) -> i64 {
        mode_of_slot(i, self.n)
    }

    pub fn nyquist_slot(&self) -> usize {
        self.n / 2
    }

    /// Largest retained mode under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }
}

fn mode_of_slot(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Real samples `u(x_j)` on a grid.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Field, SpectralError> {
        if values.len() != grid.n {
            return Err(SpectralError::LengthMismatch { expected: grid.n, got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite { index });
        }
        Ok(Field { grid, values })
    }

    /// No finiteness check; callers test [`Field::is_finite`] themselves.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.n);
        Field { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Field {
        let n = grid.n;
        Field { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Field {
        let n = grid.n;
        Field { grid, values: vec![c; n] }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Field, SpectralError> {
        let values = grid.points().map(f).collect();
        Field::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// `∫ u dx` by the rectangle rule (exact for resolved trigonometric data).
    pub fn integral(&self) -> f64 {
        self.grid.spacing * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Quadrature L² norm `sqrt(h Σ u_j²)`.
    pub fn l2_quadrature(&self) -> f64 {
        (self.grid.spacing * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Quadrature inner product `h Σ a_j b_j`.
    pub fn inner(&self, other: &Field) -> f64 {
        debug_assert!(self.same_grid(other));
        self.grid.spacing * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        self.zip_with(other, |x, y| x + a * y)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_with(other, |x, y| x - y)
    }

    /// Raw pointwise product, no dealiasing.
    pub fn pointwise_mul(&self, other: &Field) -> Field {
        self.zip_with(other, |x, y| x * y)
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert!(self.same_grid(other), "fields live on different grids");
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Spectral interpolation onto another grid of the same length: modes
    /// resolved on both grids are kept, the rest dropped.
    pub fn resample(&self, target: &Arc<Grid>) -> Result<Field, SpectralError> {
        if (target.length - self.grid.length).abs() > 1e-12 * self.grid.length {
            return Err(SpectralError::GridMismatch);
        }
        let src = forward(self);
        let mut out = Spectrum::zeros(target.clone());
        let kmax = (self.grid.n.min(target.n) / 2) as i64;
        for k in (-kmax + 1)..kmax {
            let (Some(a), Some(b)) = (self.grid.slot_of_mode(k), target.slot_of_mode(k)) else {
                continue;
            };
            out.coeffs[b] = src.coeffs[a];
        }
        inverse(&out)
    }
}

/// Fourier coefficients of a field, in FFT slot order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: Arc<Grid>) -> Spectrum {
        let n = grid.n;
        Spectrum { grid, coeffs: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_coeffs(grid: Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Spectrum, SpectralError> {
        if coeffs.len() != grid.n {
            return Err(SpectralError::LengthMismatch { expected: grid.n, got: coeffs.len() });
        }
        Ok(Spectrum { grid, coeffs })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of integer mode `k`; zero outside the grid's mode range.
    pub fn mode(&self, k: i64) -> Complex64 {
        self.grid.slot_of_mode(k).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn set_mode(&mut self, k: i64, c: Complex64) {
        let i = self.grid.slot_of_mode(k).expect("mode outside grid range");
        self.coeffs[i] = c;
    }

    /// Largest deviation from `û_{−k} = conj(û_k)` relative to the largest
    /// coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n;
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = self.coeffs[0].im.abs().max(self.coeffs[n / 2].im.abs());
        for i in 1..n / 2 {
            worst = worst.max((self.coeffs[i] - self.coeffs[n - i].conj()).norm());
        }
        worst / scale
    }

    /// Multiply slot-wise by a precomputed table.
    pub fn scale_by(&mut self, table: &[Complex64]) {
        for (c, m) in self.coeffs.iter_mut().zip(table) {
            *c *= m;
        }
    }

    /// Multiply by a symbol evaluated at each wavenumber. The Nyquist slot
    /// receives `(m(ξ_N) + m(−ξ_N))/2`, which keeps real data real and
    /// zeroes it for odd symbols such as `iξ`.
    pub fn apply_symbol(&mut self, m: impl Fn(f64) -> Complex64) {
        let nyq = self.grid.nyquist_slot();
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            let xi = self.grid.wavenumbers[i];
            let factor = if i == nyq { 0.5 * (m(xi) + m(-xi)) } else { m(xi) };
            *c *= factor;
        }
    }

    /// Zero every mode with `|k| > n/3`.
    pub fn truncate(&mut self) {
        let cutoff = self.grid.dealias_cutoff();
        let n = self.grid.n;
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            if mode_of_slot(i, n).abs() > cutoff {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Zero every mode with `|k| > kmax`.
    pub fn band_limit(&mut self, kmax: i64) {
        let n = self.grid.n;
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            if mode_of_slot(i, n).abs() > kmax {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let sum: f64 =
            self.coeffs.iter().zip(&self.grid.wavenumbers).map(|(c, xi)| (1.0 + xi * xi).powf(s) * c.norm_sqr()).sum();
        (self.grid.length * sum).sqrt()
    }

    pub fn add_scaled(&mut self, a: f64, other: &Spectrum) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }
}

pub fn forward(f: &Field) -> Spectrum {
    let grid = f.grid.clone();
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft_forward.process(&mut buf);
    let inv_n = 1.0 / grid.n as f64;
    for c in buf.iter_mut() {
        *c *= inv_n;
    }
    Spectrum { grid, coeffs: buf }
}

/// Back to physical space. The imaginary residue must stay below
/// [`IMAG_RESIDUE_TOL`] relative to the largest sample magnitude.
pub fn inverse(s: &Spectrum) -> Result<Field, SpectralError> {
    let grid = s.grid.clone();
    let mut buf = s.coeffs.clone();
    grid.fft_inverse.process(&mut buf);
    let scale = buf.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let residue = buf.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if residue > IMAG_RESIDUE_TOL * scale {
        return Err(SpectralError::NonHermitianSpectrum { residue: residue / scale });
    }
    let values: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite { index });
    }
    Ok(Field { grid, values })
}

/// Inverse for spectra built from real data by real-preserving symbols.
pub(crate) fn inverse_real(s: &Spectrum) -> Field {
    let grid = s.grid.clone();
    let mut buf = s.coeffs.clone();
    grid.fft_inverse.process(&mut buf);
    Field { grid, values: buf.into_iter().map(|c| c.re).collect() }
}

/// A Fourier multiplier `ξ ↦ m(ξ)` with a human-readable label.
#[derive(Clone)]
pub struct MultiplierSymbol {
    label: String,
    symbol: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
}

impl fmt::Debug for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiplierSymbol").field("label", &self.label).finish()
    }
}

impl MultiplierSymbol {
    pub fn new(label: impl Into<String>, symbol: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        MultiplierSymbol { label: label.into(), symbol: Arc::new(symbol) }
    }

    pub fn real(label: impl Into<String>, symbol: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(label, move |xi| Complex64::new(symbol(xi), 0.0))
    }

    pub fn identity() -> Self {
        Self::real("identity", |_| 1.0)
    }

    /// `(iξ)^order`.
    pub fn derivative(order: u32) -> Self {
        Self::new(format!("d^{order}/dx^{order}"), move |xi| Complex64::new(0.0, xi).powu(order))
    }

    /// `(1+ξ²)^{s/2}`.
    pub fn bessel(s: f64) -> Self {
        Self::real(format!("Lambda^{s}"), move |xi| (1.0 + xi * xi).powf(0.5 * s))
    }

    /// `(1 − μβ ξ²)^{−1}`.
    pub fn helmholtz_inverse(mubeta: f64) -> Self {
        Self::real(format!("(1+{mubeta}*d_xx)^-1"), move |xi| 1.0 / (1.0 - mubeta * xi * xi))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        (self.symbol)(xi)
    }

    /// Pointwise product of two symbols.
    pub fn compose(&self, other: &MultiplierSymbol) -> MultiplierSymbol {
        let (a, b) = (self.symbol.clone(), other.symbol.clone());
        MultiplierSymbol::new(format!("{}*{}", self.label, other.label), move |xi| a(xi) * b(xi))
    }

    /// Symbol values on the grid, Nyquist slot symmetrized.
    pub fn table(&self, grid: &Grid) -> Result<Vec<Complex64>, SpectralError> {
        let nyq = grid.nyquist_slot();
        grid.wavenumbers
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let m = if i == nyq { 0.5 * (self.eval(xi) + self.eval(-xi)) } else { self.eval(xi) };
                if m.re.is_finite() && m.im.is_finite() {
                    Ok(m)
                } else {
                    Err(SpectralError::NonFiniteSymbol { label: self.label.clone(), xi })
                }
            })
            .collect()
    }
}

pub fn apply_multiplier(f: &Field, m: &MultiplierSymbol) -> Result<Field, SpectralError> {
    let table = m.table(&f.grid)?;
    let mut s = forward(f);
    s.scale_by(&table);
    inverse(&s)
}

pub fn derivative(f: &Field, order: u32) -> Field {
    assert!(order >= 1, "derivative order must be positive");
    let mut s = forward(f);
    s.apply_symbol(|xi| Complex64::new(0.0, xi).powu(order));
    inverse_real(&s)
}

/// `Λ^s f` with `Λ = (1 − ∂x²)^{1/2}`.
pub fn bessel_potential(f: &Field, s: f64) -> Field {
    let mut sp = forward(f);
    sp.apply_symbol(|xi| Complex64::new((1.0 + xi * xi).powf(0.5 * s), 0.0));
    inverse_real(&sp)
}

/// `(1 + μβ ∂x²)^{−1} f`, defined for `μβ < 0`.
pub fn helmholtz_inverse(f: &Field, mubeta: f64) -> Result<Field, SpectralError> {
    if !(mubeta < 0.0) {
        return Err(SpectralError::InvalidSign { mubeta });
    }
    let mut s = forward(f);
    s.apply_symbol(|xi| Complex64::new(1.0 / (1.0 - mubeta * xi * xi), 0.0));
    Ok(inverse_real(&s))
}

pub fn sobolev_norm(f: &Field, s: f64) -> f64 {
    forward(f).sobolev_norm(s)
}

/// 2/3-rule projection.
pub fn dealias(f: &Field) -> Field {
    let mut s = forward(f);
    s.truncate();
    inverse_real(&s)
}

/// Keep only modes `|k| ≤ kmax`.
pub fn band_limit(f: &Field, kmax: i64) -> Field {
    let mut s = forward(f);
    s.band_limit(kmax);
    inverse_real(&s)
}

/// Dealiased product `P(a·b)`.
pub fn product(a: &Field, b: &Field) -> Field {
    dealias(&a.pointwise_mul(b))
}

/// Outcome of [`multiplier_inequality_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierCheck {
    /// Largest `lhs / rhs`; the inequality holds iff this is `≤ 1`.
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub violations: usize,
    pub n_samples: usize,
}

impl MultiplierCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `(1 − μβξ²)^{−1} ξ ≤ |μβ|^{−1} (1+ξ²)^{−1/2}` at `ξ = 0` and at
/// `n_samples − 1` log-spaced points in `[1e−6, xi_max]`.
pub fn multiplier_inequality_check(
    mu: f64,
    beta: f64,
    xi_max: f64,
    n_samples: usize,
) -> Result<MultiplierCheck, SpectralError> {
    if !(beta < 0.0 && mu > 0.0) {
        return Err(SpectralError::InvalidParams(format!("need beta < 0 and mu > 0, got mu={mu}, beta={beta}")));
    }
    let mb = (mu * beta).abs();
    if mb >= 1.0 {
        return Err(SpectralError::InvalidParams(format!("|mu*beta| = {mb} must be < 1")));
    }
    if n_samples < 2 || !(xi_max > 1e-6) {
        return Err(SpectralError::InvalidParams(format!(
            "need n_samples >= 2 and xi_max > 1e-6, got {n_samples}, {xi_max}"
        )));
    }
    let (lo, hi) = (-6.0f64, xi_max.log10());
    let steps = (n_samples - 2).max(1) as f64;
    let mut ratios = Vec::with_capacity(n_samples);
    let mut violations = 0;
    for i in 0..n_samples {
        let xi = if i == 0 { 0.0 } else { 10f64.powf(lo + (hi - lo) * (i - 1) as f64 / steps) };
        let lhs = xi / (1.0 - mu * beta * xi * xi);
        let rhs = 1.0 / (mb * (1.0 + xi * xi).sqrt());
        if lhs > rhs {
            violations += 1;
        }
        ratios.push(lhs / rhs);
    }
    ratios.sort_by(f64::total_cmp);
    let max_ratio = ratios[n_samples - 1];
    let median_ratio = if n_samples % 2 == 1 {
        ratios[n_samples / 2]
    } else {
        0.5 * (ratios[n_samples / 2 - 1] + ratios[n_samples / 2])
    };
    Ok(MultiplierCheck { max_ratio, median_ratio, violations, n_samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::new(2.0 * PI, n).unwrap()
    }

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn grid_rejects_odd_or_small() {
        assert!(Grid::new(1.0, 7).is_err());
        assert!(Grid::new(1.0, 6).is_err());
        assert!(Grid::new(1.0, 9).is_err());
        assert!(Grid::new(0.0, 16).is_err());
        assert!(Grid::new(f64::NAN, 16).is_err());
    }

    #[test]
    fn grid_wavenumbers_antisymmetric_except_nyquist() {
        let g = Grid::new(3.0, 16).unwrap();
        assert_eq!(g.spacing() * 16.0, 3.0);
        for k in 1..8i64 {
            let a = g.wavenumbers()[g.slot_of_mode(k).unwrap()];
            let b = g.wavenumbers()[g.slot_of_mode(-k).unwrap()];
            assert_eq!(a, -b);
        }
        assert_eq!(g.mode_of_slot(g.nyquist_slot()), -8);
        assert!(g.slot_of_mode(8).is_none());
    }

    #[test]
    fn field_rejects_nan_and_bad_length() {
        let g = grid(8);
        assert!(matches!(Field::new(g.clone(), vec![0.0; 7]), Err(SpectralError::LengthMismatch { .. })));
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert_eq!(Field::new(g, v).unwrap_err(), SpectralError::NonFinite { index: 3 });
    }

    #[test]
    fn forward_of_constant_is_dc() {
        let g = grid(16);
        let s = forward(&Field::constant(g, 1.0));
        assert!((s.mode(0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for k in 1..8 {
            assert!(s.mode(k).norm() < 1e-15 && s.mode(-k).norm() < 1e-15);
        }
    }

    #[test]
    fn forward_of_sine() {
        let g = grid(64);
        let s = forward(&Field::from_fn(g, f64::sin).unwrap());
        assert!((s.mode(1) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((s.mode(-1) - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        let rest: f64 = (2..32).map(|k| s.mode(k).norm() + s.mode(-k).norm()).sum();
        assert!(rest < 1e-13);
    }

    #[test]
    fn inverse_reconstructs_sine_and_zero() {
        let g = grid(64);
        let mut s = Spectrum::zeros(g.clone());
        assert!(inverse(&s).unwrap().max_abs() == 0.0);
        s.set_mode(1, Complex64::new(0.0, -0.5));
        s.set_mode(-1, Complex64::new(0.0, 0.5));
        let f = inverse(&s).unwrap();
        let exact = Field::from_fn(g, f64::sin).unwrap();
        assert!(max_diff(&f, &exact) < 1e-14);
    }

    #[test]
    fn inverse_rejects_broken_symmetry() {
        let g = grid(64);
        let mut s = Spectrum::zeros(g);
        s.set_mode(1, Complex64::new(1.0, 0.0));
        assert!(matches!(inverse(&s), Err(SpectralError::NonHermitianSpectrum { .. })));
    }

    #[test]
    fn apply_multiplier_examples() {
        let g = grid(32);
        let c = Field::from_fn(g.clone(), f64::cos).unwrap();
        let id = apply_multiplier(&c, &MultiplierSymbol::identity()).unwrap();
        assert!(max_diff(&id, &c) < 1e-15);

        let two = apply_multiplier(&c, &MultiplierSymbol::bessel(2.0)).unwrap();
        assert!(max_diff(&two, &c.scale(2.0)) < 1e-13);

        let c2 = Field::from_fn(g, |x| (2.0 * x).cos()).unwrap();
        let h = apply_multiplier(&c2, &MultiplierSymbol::helmholtz_inverse(-0.1)).unwrap();
        assert!(max_diff(&h, &c2.scale(1.0 / 1.4)) < 1e-13);
    }

    #[test]
    fn apply_multiplier_rejects_non_real_symbol() {
        let g = grid(16);
        let f = Field::from_fn(g, f64::cos).unwrap();
        let odd = MultiplierSymbol::new("i", |_| Complex64::new(0.0, 1.0));
        assert!(matches!(apply_multiplier(&f, &odd), Err(SpectralError::NonHermitianSpectrum { .. })));
    }

    #[test]
    fn multiplier_table_rejects_infinite_symbol() {
        let g = grid(16);
        let bad = MultiplierSymbol::real("1/xi", |xi| 1.0 / xi);
        assert!(matches!(bad.table(&g), Err(SpectralError::NonFiniteSymbol { .. })));
    }

    #[test]
    fn derivative_examples() {
        let g = grid(64);
        let s = Field::from_fn(g.clone(), f64::sin).unwrap();
        let c = Field::from_fn(g.clone(), f64::cos).unwrap();
        assert!(max_diff(&derivative(&s, 1), &c) < 1e-12);
        assert!(derivative(&Field::constant(g.clone(), 3.0), 1).max_abs() < 1e-14);
        let s3 = Field::from_fn(g.clone(), |x| (3.0 * x).sin()).unwrap();
        let expect = Field::from_fn(g, |x| -27.0 * (3.0 * x).cos()).unwrap();
        assert!(max_diff(&derivative(&s3, 3), &expect) < 1e-10);
    }

    #[test]
    fn odd_derivative_kills_nyquist_even_keeps_it() {
        let g = grid(16);
        let nyq = Field::from_fn(g.clone(), |x| (8.0 * x).cos()).unwrap();
        assert!(derivative(&nyq, 1).max_abs() < 1e-12);
        assert!(derivative(&nyq, 3).max_abs() < 1e-9);
        let d2 = derivative(&nyq, 2);
        assert!(max_diff(&d2, &nyq.scale(-64.0)) < 1e-11);
    }

    #[test]
    fn bessel_examples() {
        let g = grid(32);
        let c2 = Field::from_fn(g.clone(), |x| (2.0 * x).cos()).unwrap();
        assert!(max_diff(&bessel_potential(&c2, 0.0), &c2) < 1e-15);
        assert!(max_diff(&bessel_potential(&c2, -1.0), &c2.scale(5f64.sqrt().recip())) < 1e-14);
    }

    #[test]
    fn helmholtz_examples() {
        let g = grid(32);
        let c = Field::constant(g.clone(), 0.7);
        assert!(max_diff(&helmholtz_inverse(&c, -0.05).unwrap(), &c) < 1e-15);
        let s4 = Field::from_fn(g.clone(), |x| (4.0 * x).sin()).unwrap();
        let h = helmholtz_inverse(&s4, -0.05).unwrap();
        assert!(max_diff(&h, &s4.scale(1.0 / 1.8)) < 1e-14);
        assert_eq!(helmholtz_inverse(&s4, 0.1).unwrap_err(), SpectralError::InvalidSign { mubeta: 0.1 });
        assert!(helmholtz_inverse(&s4, 0.0).is_err());
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = grid(64);
        let s = Field::from_fn(g.clone(), f64::sin).unwrap();
        assert!((sobolev_norm(&s, 0.0) - PI.sqrt()).abs() < 1e-13);
        assert!((sobolev_norm(&s, 1.0) - (2.0 * PI).sqrt()).abs() < 1e-13);
        for sv in [-1.0, 0.0, 2.5] {
            assert_eq!(sobolev_norm(&Field::zeros(g.clone()), sv), 0.0);
        }
    }

    #[test]
    fn dealias_examples() {
        let g = grid(64);
        let low = Field::from_fn(g.clone(), |x| (21.0 * x).cos() + (3.0 * x).sin()).unwrap();
        assert!(max_diff(&dealias(&low), &low) < 1e-13);
        let high = Field::from_fn(g, |x| (31.0 * x).cos()).unwrap();
        assert!(dealias(&high).max_abs() < 1e-13);
    }

    #[test]
    fn resample_preserves_resolved_modes() {
        let coarse = grid(32);
        let fine = grid(128);
        let f = Field::from_fn(coarse, |x| (3.0 * x).sin() + 0.2 * (5.0 * x).cos()).unwrap();
        let up = f.resample(&fine).unwrap();
        let exact = Field::from_fn(fine, |x| (3.0 * x).sin() + 0.2 * (5.0 * x).cos()).unwrap();
        assert!(max_diff(&up, &exact) < 1e-13);
    }

    #[test]
    fn multiplier_inequality_examples() {
        let chk = multiplier_inequality_check(0.01, -1.0, 1e4, 100_000).unwrap();
        assert!(chk.passed());
        assert!(chk.max_ratio <= 1.0);
        assert!(matches!(multiplier_inequality_check(2.0, -1.0, 1e4, 100), Err(SpectralError::InvalidParams(_))));
        assert!(multiplier_inequality_check(0.1, 1.0, 1e4, 100).is_err());
    }
}
