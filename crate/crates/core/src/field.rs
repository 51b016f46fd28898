//! Real periodic fields on the square `[-π, π)²` and their Fourier coefficients.
//!
//! Coefficients follow `f(x) = Σ_k f̂(k) e^{ik·x}`, so the forward transform
//! carries the `1/n²` factor and `f̂(0)` is the spatial mean. Wavenumbers on
//! an `n`-point axis run over `-n/2, …, n/2 - 1`; storage uses FFT order
//! (index `i` holds `k = i` for `i < n/2` and `k = i - n` otherwise).
//!
//! Both representations are stored row-major with the first index running
//! along `x₁`: physical value `[j₁ * n + j₂]` is the sample at
//! `(x_{j₁}, x_{j₂})` with `x_j = -π + jΔx`.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{KseError, Result};

/// Uniform periodic grid with `n × n` nodes.
pub struct Grid {
    n: usize,
    dealias_radius: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("dealias_radius", &self.dealias_radius)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.dealias_radius == other.dealias_radius
    }
}

impl Grid {
    /// Grid with the standard dealiasing radius `n/3`.
    pub fn new(n: usize) -> Result<Arc<Grid>> {
        Self::with_dealias_radius(n, n as f64 / 3.0)
    }

    /// Grid with a custom dealiasing radius. Used for fault injection and
    /// for deliberately under-dealiased runs.
    pub fn with_dealias_radius(n: usize, dealias_radius: f64) -> Result<Arc<Grid>> {
        if n < 8 || n % 2 != 0 {
            return Err(KseError::InvalidGrid(n));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            n,
            dealias_radius,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes (and of Fourier modes), `n²`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node spacing `Δx = 2π/n`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn dealias_radius(&self) -> f64 {
        self.dealias_radius
    }

    /// Physical coordinate of node `j` along either axis.
    pub fn node(&self, j: usize) -> f64 {
        -PI + j as f64 * self.spacing()
    }

    /// Signed wavenumber stored at FFT index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// FFT index holding signed wavenumber `k`, if it is representable.
    pub fn index_of(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k < -half || k >= half {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.n as i64) as usize)
        }
    }

    /// Wavenumber pair of flat mode index `idx`.
    pub fn mode(&self, idx: usize) -> (i64, i64) {
        (self.wavenumber(idx / self.n), self.wavenumber(idx % self.n))
    }

    /// Flat index of mode `(k₁, k₂)`, if representable.
    pub fn mode_index(&self, k1: i64, k2: i64) -> Option<usize> {
        Some(self.index_of(k1)? * self.n + self.index_of(k2)?)
    }

    /// `|k|²` at flat mode index `idx`.
    pub fn k_squared(&self, idx: usize) -> f64 {
        let (k1, k2) = self.mode(idx);
        (k1 * k1 + k2 * k2) as f64
    }

    pub fn is_nyquist(&self, k: i64) -> bool {
        k == -((self.n / 2) as i64)
    }

    /// Wavenumber as seen by first-order derivatives: the unpaired Nyquist
    /// wavenumber maps to zero.
    pub fn derivative_wavenumber(&self, k: i64) -> f64 {
        if self.is_nyquist(k) {
            0.0
        } else {
            k as f64
        }
    }

    /// Spectral multiplier `(ik₁)^{a₁}(ik₂)^{a₂}` at mode index `idx`, with the
    /// Nyquist row/column zeroed along each axis carrying an odd order.
    pub fn derivative_multiplier(&self, idx: usize, order: (u32, u32)) -> Complex64 {
        let (k1, k2) = self.mode(idx);
        axis_multiplier(self, k1, order.0) * axis_multiplier(self, k2, order.1)
    }

    /// Evaluate `f` at every node, row-major.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for j1 in 0..n {
            let x1 = self.node(j1);
            for j2 in 0..n {
                out.push(f(x1, self.node(j2)));
            }
        }
        out
    }

    /// Forward transform of real samples.
    ///
    /// The output is projected onto exactly conjugate-symmetric spectra; a
    /// rounding-level antisymmetric residue would otherwise be invisible to
    /// the nonlinear terms and grow at the linear rate.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut data);
        self.symmetrize(&mut data);
        data
    }

    /// Replace `c(k)` by `½(c(k) + conj c(−k))`.
    pub fn symmetrize(&self, coeffs: &mut [Complex64]) {
        let n = self.n;
        for i1 in 0..n {
            let m1 = (n - i1) % n;
            for i2 in 0..n {
                let a = i1 * n + i2;
                let b = m1 * n + (n - i2) % n;
                if a > b {
                    continue;
                }
                let v = (coeffs[a] + coeffs[b].conj()) * 0.5;
                coeffs[a] = v;
                coeffs[b] = v.conj();
            }
        }
    }

    /// Inverse transform; the imaginary residue is discarded.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.inverse_in_place(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Forward transform of two real fields with a single complex FFT.
    pub fn forward_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut data: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.forward_in_place(&mut data);
        let n = self.n;
        let len = data.len();
        let mut fa = vec![Complex64::default(); len];
        let mut fb = vec![Complex64::default(); len];
        for i1 in 0..n {
            let m1 = (n - i1) % n;
            for i2 in 0..n {
                let m2 = (n - i2) % n;
                let z = data[i1 * n + i2];
                let zc = data[m1 * n + m2].conj();
                fa[i1 * n + i2] = (z + zc) * 0.5;
                fb[i1 * n + i2] = (z - zc) * Complex64::new(0.0, -0.5);
            }
        }
        (fa, fb)
    }

    /// Inverse transform of two conjugate-symmetric spectra with a single
    /// complex FFT.
    pub fn inverse_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut data: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| x + Complex64::i() * y)
            .collect();
        self.inverse_in_place(&mut data);
        data.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    fn forward_in_place(&self, data: &mut [Complex64]) {
        self.fft2(data, &self.forward);
        let n = self.n;
        let scale = 1.0 / (n * n) as f64;
        for i1 in 0..n {
            for i2 in 0..n {
                // (-1)^{k₁+k₂} shifts the DFT origin from x=0 to x=-π.
                let s = if (i1 + i2) % 2 == 0 { scale } else { -scale };
                data[i1 * n + i2] *= s;
            }
        }
    }

    fn inverse_in_place(&self, data: &mut [Complex64]) {
        let n = self.n;
        for i1 in 0..n {
            for i2 in 0..n {
                if (i1 + i2) % 2 == 1 {
                    data[i1 * n + i2] = -data[i1 * n + i2];
                }
            }
        }
        self.fft2(data, &self.inverse);
    }

    fn fft2(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        debug_assert_eq!(data.len(), n * n);
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
    }

    /// Zero every coefficient with `|k| ≥ dealias_radius`.
    pub fn dealias_in_place(&self, coeffs: &mut [Complex64]) {
        let r2 = self.dealias_radius * self.dealias_radius;
        for (idx, c) in coeffs.iter_mut().enumerate() {
            if self.k_squared(idx) >= r2 {
                *c = Complex64::default();
            }
        }
    }
}

fn axis_multiplier(grid: &Grid, k: i64, order: u32) -> Complex64 {
    if order == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if order % 2 == 1 && grid.is_nyquist(k) {
        return Complex64::default();
    }
    Complex64::new(0.0, k as f64).powu(order)
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Direction of a Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Physical values to coefficients.
    Forward,
    /// Coefficients to physical values.
    Inverse,
}

/// Real scalar field holding physical samples, Fourier coefficients, or both.
///
/// Fields are values: every operation returns a new field. Whichever
/// representation an operation needs is computed on demand.
#[derive(Clone)]
pub struct SpectralField {
    grid: Arc<Grid>,
    physical: Option<Vec<f64>>,
    spectral: Option<Vec<Complex64>>,
}

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("n", &self.grid.n)
            .field("physical", &self.physical.is_some())
            .field("spectral", &self.spectral.is_some())
            .finish()
    }
}

/// Shell-binned spectrum and the resolution margin beyond the dealias radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSpectrum {
    /// `amplitudes[ρ]` is the largest `|f̂(k)|` with `ρ ≤ |k| < ρ + 1`.
    pub amplitudes: Vec<f64>,
    /// Largest `|f̂(k)|` with `|k| ≥ n/3`.
    pub resolution_margin: f64,
}

impl ShellSpectrum {
    pub fn max_amplitude(&self) -> f64 {
        self.amplitudes.iter().copied().fold(0.0, f64::max)
    }
}

impl SpectralField {
    pub fn from_physical(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KseError::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(SpectralField {
            grid,
            physical: Some(values),
            spectral: None,
        })
    }

    pub fn from_spectral(grid: Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(KseError::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField {
            grid,
            physical: None,
            spectral: Some(coeffs),
        })
    }

    /// Sample a closed-form function at the grid nodes.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.sample(f);
        SpectralField {
            grid: Arc::clone(grid),
            physical: Some(values),
            spectral: None,
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralField {
            grid: Arc::clone(grid),
            physical: Some(vec![0.0; grid.len()]),
            spectral: Some(vec![Complex64::default(); grid.len()]),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn has_physical(&self) -> bool {
        self.physical.is_some()
    }

    pub fn has_spectral(&self) -> bool {
        self.spectral.is_some()
    }

    /// Physical samples, transforming if only coefficients are held.
    pub fn values(&self) -> Cow<'_, [f64]> {
        match (&self.physical, &self.spectral) {
            (Some(v), _) => Cow::Borrowed(v),
            (None, Some(c)) => Cow::Owned(self.grid.inverse(c)),
            (None, None) => unreachable!("field without representation"),
        }
    }

    /// Fourier coefficients, transforming if only samples are held.
    pub fn coeffs(&self) -> Cow<'_, [Complex64]> {
        match (&self.spectral, &self.physical) {
            (Some(c), _) => Cow::Borrowed(c),
            (None, Some(v)) => Cow::Owned(self.grid.forward(v)),
            (None, None) => unreachable!("field without representation"),
        }
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        match self.spectral {
            Some(c) => c,
            None => self.grid.forward(self.physical.as_deref().unwrap_or_default()),
        }
    }

    /// Coefficient `f̂(k₁, k₂)`; zero when the mode is not representable.
    pub fn coefficient(&self, k1: i64, k2: i64) -> Complex64 {
        self.grid
            .mode_index(k1, k2)
            .map(|idx| self.coeffs()[idx])
            .unwrap_or_default()
    }

    /// Populate the target representation, keeping the source one.
    pub fn transform(&self, direction: Direction) -> SpectralField {
        let mut out = self.clone();
        match direction {
            Direction::Forward => out.spectral = Some(self.coeffs().into_owned()),
            Direction::Inverse => out.physical = Some(self.values().into_owned()),
        }
        out
    }

    fn with_coeffs(&self, coeffs: Vec<Complex64>) -> SpectralField {
        SpectralField {
            grid: Arc::clone(&self.grid),
            physical: None,
            spectral: Some(coeffs),
        }
    }

    /// Apply a per-mode multiplier in Fourier space.
    pub fn map_modes(&self, f: impl Fn(usize, Complex64) -> Complex64) -> SpectralField {
        let coeffs = self
            .coeffs()
            .iter()
            .enumerate()
            .map(|(idx, &c)| f(idx, c))
            .collect();
        self.with_coeffs(coeffs)
    }

    /// Spectral derivative `∂₁^{a₁}∂₂^{a₂} f`.
    pub fn derive(&self, order: (u32, u32)) -> SpectralField {
        let grid = &self.grid;
        self.map_modes(|idx, c| c * grid.derivative_multiplier(idx, order))
    }

    pub fn laplacian(&self) -> SpectralField {
        let grid = &self.grid;
        self.map_modes(|idx, c| c * -grid.k_squared(idx))
    }

    /// Remove all modes with `|k| ≥ n/3`.
    pub fn dealias(&self) -> SpectralField {
        let mut coeffs = self.coeffs().into_owned();
        self.grid.dealias_in_place(&mut coeffs);
        self.with_coeffs(coeffs)
    }

    /// Spatial mean, i.e. `f̂(0, 0)`.
    pub fn mean(&self) -> f64 {
        match (&self.spectral, &self.physical) {
            (Some(c), _) => c[0].re,
            (None, Some(v)) => v.iter().sum::<f64>() / v.len() as f64,
            (None, None) => unreachable!(),
        }
    }

    /// Remove the spatial mean in whichever representations are held.
    pub fn subtract_mean(&self) -> SpectralField {
        let mut out = self.clone();
        let mean = self.mean();
        if let Some(v) = out.physical.as_mut() {
            v.iter_mut().for_each(|x| *x -= mean);
        }
        if let Some(c) = out.spectral.as_mut() {
            c[0] = Complex64::default();
        }
        out
    }

    pub fn shell_spectrum(&self) -> ShellSpectrum {
        let grid = &self.grid;
        let coeffs = self.coeffs();
        let shells = (grid.n as f64 / 2f64.sqrt()).floor() as usize + 1;
        let mut amplitudes = vec![0.0f64; shells];
        let mut resolution_margin = 0.0f64;
        let cutoff2 = (grid.n as f64 / 3.0).powi(2);
        for (idx, c) in coeffs.iter().enumerate() {
            let k2 = grid.k_squared(idx);
            let a = c.norm();
            let shell = (k2.sqrt().floor() as usize).min(shells - 1);
            amplitudes[shell] = amplitudes[shell].max(a);
            if k2 >= cutoff2 {
                resolution_margin = resolution_margin.max(a);
            }
        }
        ShellSpectrum {
            amplitudes,
            resolution_margin,
        }
    }

    /// Pointwise product in physical space (not dealiased).
    pub fn product(&self, other: &SpectralField) -> SpectralField {
        let a = self.values();
        let b = other.values();
        SpectralField {
            grid: Arc::clone(&self.grid),
            physical: Some(a.iter().zip(b.iter()).map(|(x, y)| x * y).collect()),
            spectral: None,
        }
    }

    /// Riemann-sum integral `∫ f dx` over the full torus.
    pub fn integral(&self) -> f64 {
        let dx = self.grid.spacing();
        self.values().iter().sum::<f64>() * dx * dx
    }

    /// Largest `|f̂(-k) - conj f̂(k)|` relative to the largest coefficient.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.grid.n;
        let c = self.coeffs();
        let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i1 in 0..n {
            for i2 in 0..n {
                let j = ((n - i1) % n) * n + (n - i2) % n;
                worst = worst.max((c[j] - c[i1 * n + i2].conj()).norm());
            }
        }
        worst / scale
    }

    fn zip_coeffs(&self, other: &SpectralField, f: impl Fn(Complex64, Complex64) -> Complex64) -> SpectralField {
        assert_eq!(self.grid.n, other.grid.n, "fields on different grids");
        let a = self.coeffs();
        let b = other.coeffs();
        self.with_coeffs(a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)).collect())
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.zip_coeffs(rhs, |a, b| a + b)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.zip_coeffs(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.map_modes(|_, c| c * rhs)
    }
}

/// Pair of scalar fields `(u₁, u₂)` on a shared grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    components: [SpectralField; 2],
}

impl VectorField {
    pub fn new(u1: SpectralField, u2: SpectralField) -> Result<Self> {
        if *u1.grid != *u2.grid {
            return Err(KseError::GridMismatch(u1.grid.n, u2.grid.n));
        }
        Ok(VectorField {
            components: [u1, u2],
        })
    }

    /// `∇φ`.
    pub fn gradient(phi: &SpectralField) -> Self {
        VectorField {
            components: [phi.derive((1, 0)), phi.derive((0, 1))],
        }
    }

    /// `(-∂₂ψ, ∂₁ψ)`, divergence-free by construction.
    pub fn perp_gradient(psi: &SpectralField) -> Self {
        VectorField {
            components: [&psi.derive((0, 1)) * -1.0, psi.derive((1, 0))],
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        VectorField {
            components: [SpectralField::zeros(grid), SpectralField::zeros(grid)],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[SpectralField; 2] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &SpectralField {
        &self.components[i]
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> VectorField {
        VectorField {
            components: [f(&self.components[0]), f(&self.components[1])],
        }
    }

    /// `∂₁u₁ + ∂₂u₂`.
    pub fn divergence(&self) -> SpectralField {
        &self.components[0].derive((1, 0)) + &self.components[1].derive((0, 1))
    }

    /// `∂₁u₂ - ∂₂u₁`.
    pub fn curl(&self) -> SpectralField {
        &self.components[1].derive((1, 0)) - &self.components[0].derive((0, 1))
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        VectorField {
            components: [
                &self.components[0] + &rhs.components[0],
                &self.components[1] + &rhs.components[1],
            ],
        }
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        VectorField {
            components: [
                &self.components[0] - &rhs.components[0],
                &self.components[1] - &rhs.components[1],
            ],
        }
    }
}

impl Mul<f64> for &VectorField {
    type Output = VectorField;
    fn mul(self, rhs: f64) -> VectorField {
        self.map(|c| c * rhs)
    }
}

/// Sum of squared coefficient moduli, `Σ_k |f̂(k)|²`.
pub fn coefficient_energy(coeffs: &[Complex64]) -> f64 {
    coeffs.iter().map(|c| c.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::new(n).unwrap()
    }

    fn random_field(g: &Arc<Grid>, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        SpectralField::from_physical(Arc::clone(g), values).unwrap()
    }

    /// Band-limited real field with modes `|k| ≤ band`, built as a sum of
    /// sines and cosines so it is exactly real.
    fn band_limited(g: &Arc<Grid>, band: i64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for k1 in -band..=band {
            for k2 in 0..=band {
                if k1 * k1 + k2 * k2 > band * band || (k2 == 0 && k1 <= 0) {
                    continue;
                }
                terms.push((k1 as f64, k2 as f64, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            }
        }
        SpectralField::from_fn(g, |x, y| {
            terms
                .iter()
                .map(|&(k1, k2, a, b)| a * (k1 * x + k2 * y).cos() + b * (k1 * x + k2 * y).sin())
                .sum()
        })
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn rejects_odd_and_tiny_grids() {
        assert!(matches!(Grid::new(15), Err(KseError::InvalidGrid(15))));
        assert!(matches!(Grid::new(6), Err(KseError::InvalidGrid(6))));
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn sine_has_two_imaginary_coefficients() {
        let g = grid(16);
        let f = SpectralField::from_fn(&g, |x, _| x.sin());
        let c = f.coeffs();
        for (idx, z) in c.iter().enumerate() {
            let expected = match g.mode(idx) {
                (1, 0) => Complex64::new(0.0, -0.5),
                (-1, 0) => Complex64::new(0.0, 0.5),
                _ => Complex64::default(),
            };
            assert!((z - expected).norm() < 1e-14, "mode {:?}: {z}", g.mode(idx));
        }
    }

    #[test]
    fn constant_maps_to_zero_mode() {
        let g = grid(16);
        let f = SpectralField::from_fn(&g, |_, _| 2.5);
        let c = f.coeffs();
        assert!((c[0] - Complex64::new(2.5, 0.0)).norm() < 1e-14);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn matches_brute_force_dft() {
        let g = grid(8);
        let f = random_field(&g, 7);
        let values = f.values().into_owned();
        let coeffs = f.coeffs();
        let n = g.n();
        for idx in 0..g.len() {
            let (k1, k2) = g.mode(idx);
            let mut sum = Complex64::default();
            for j1 in 0..n {
                for j2 in 0..n {
                    let phase = -(k1 as f64 * g.node(j1) + k2 as f64 * g.node(j2));
                    sum += values[j1 * n + j2] * Complex64::from_polar(1.0, phase);
                }
            }
            sum /= (n * n) as f64;
            assert!((sum - coeffs[idx]).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_conjugate_symmetry() {
        let g = grid(32);
        let f = random_field(&g, 3);
        let spectral = f.transform(Direction::Forward);
        let back = SpectralField::from_spectral(Arc::clone(&g), spectral.coeffs().into_owned())
            .unwrap()
            .transform(Direction::Inverse);
        let orig = f.values();
        let scale = orig.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(max_abs_diff(&orig, &back.values()) / scale < 1e-12);
        assert!(spectral.conjugate_asymmetry() < 1e-12);
    }

    #[test]
    fn pair_transforms_match_single() {
        let g = grid(16);
        let a = random_field(&g, 1);
        let b = random_field(&g, 2);
        let (fa, fb) = g.forward_pair(&a.values(), &b.values());
        let (ca, cb) = (a.coeffs(), b.coeffs());
        for i in 0..g.len() {
            assert!((fa[i] - ca[i]).norm() < 1e-14);
            assert!((fb[i] - cb[i]).norm() < 1e-14);
        }
        let (va, vb) = g.inverse_pair(&ca, &cb);
        assert!(max_abs_diff(&va, &a.values()) < 1e-13);
        assert!(max_abs_diff(&vb, &b.values()) < 1e-13);
    }

    #[test]
    fn derivatives_of_sine() {
        let g = grid(16);
        let f = SpectralField::from_fn(&g, |x, _| x.sin());
        let d1 = f.derive((1, 0));
        let d2 = f.derive((2, 0));
        let cos = g.sample(|x, _| x.cos());
        let msin = g.sample(|x, _| -x.sin());
        assert!(max_abs_diff(&d1.values(), &cos) < 1e-12);
        assert!(max_abs_diff(&d2.values(), &msin) < 1e-12);
    }

    #[test]
    fn odd_derivative_kills_nyquist() {
        let g = grid(16);
        let f = SpectralField::from_fn(&g, |x, _| (8.0 * x).cos());
        assert!(f.derive((1, 0)).values().iter().all(|v| v.abs() < 1e-14));
        assert!(f.derive((1, 1)).values().iter().all(|v| v.abs() < 1e-14));
        // Even orders keep it: ∂₁² cos(8x) = -64 cos(8x).
        let d2 = f.derive((2, 0));
        let expected = g.sample(|x, _| -64.0 * (8.0 * x).cos());
        assert!(max_abs_diff(&d2.values(), &expected) < 1e-10);
        assert!(f.derive((0, 1)).values().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn dealias_examples() {
        let g = grid(16);
        let low = band_limited(&g, 2, 5);
        let kept = low.dealias();
        assert!(max_abs_diff(&low.values(), &kept.values()) < 1e-13);

        let high = SpectralField::from_fn(&g, |x, _| (6.0 * x).cos());
        assert!(high.dealias().values().iter().all(|v| v.abs() < 1e-14));

        // sin²(5x) = ½ - ½cos(10x); mode 10 aliases to -6 on n=16 and is removed.
        let s = SpectralField::from_fn(&g, |x, _| (5.0 * x).sin());
        let sq = s.product(&s).dealias();
        let c = sq.coeffs();
        assert!((c[0].re - 0.5).abs() < 1e-14);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn mean_subtraction() {
        let g = grid(16);
        let c = SpectralField::from_fn(&g, |_, _| 4.0).subtract_mean();
        assert!(c.values().iter().all(|v| v.abs() < 1e-14));
        let f = SpectralField::from_fn(&g, |x, _| x.sin() + 3.0).subtract_mean();
        assert!(max_abs_diff(&f.values(), &g.sample(|x, _| x.sin())) < 1e-14);
        let kkp = SpectralField::from_fn(&g, |x, y| (x + y).sin() + x.sin() + y.sin());
        assert!(max_abs_diff(&kkp.values(), &kkp.subtract_mean().values()) < 1e-14);
        // spectral-only path
        let s = SpectralField::from_fn(&g, |x, _| x.sin() + 3.0).transform(Direction::Forward);
        let s = SpectralField::from_spectral(Arc::clone(&g), s.coeffs().into_owned()).unwrap();
        assert_eq!(s.subtract_mean().coeffs()[0], Complex64::default());
    }

    #[test]
    fn shell_spectrum_examples() {
        let g = grid(16);
        let s = SpectralField::from_fn(&g, |x, _| x.sin()).shell_spectrum();
        assert_eq!(s.amplitudes.len(), 12);
        assert!((s.amplitudes[1] - 0.5).abs() < 1e-14);
        assert!(s.amplitudes.iter().enumerate().all(|(i, a)| i == 1 || *a < 1e-14));

        let z = SpectralField::zeros(&g).shell_spectrum();
        assert!(z.amplitudes.iter().all(|a| *a == 0.0));
        assert_eq!(z.resolution_margin, 0.0);

        let mut coeffs = vec![Complex64::default(); g.len()];
        for (k1, k2, v) in [(1, 2, Complex64::new(0.3, 0.1)), (2, 0, Complex64::new(-0.2, 0.4))] {
            coeffs[g.mode_index(k1, k2).unwrap()] = v;
            coeffs[g.mode_index(-k1, -k2).unwrap()] = v.conj();
        }
        let f = SpectralField::from_spectral(Arc::clone(&g), coeffs).unwrap();
        assert_eq!(f.shell_spectrum().resolution_margin, 0.0);
    }

    #[test]
    fn vector_grid_mismatch() {
        let a = SpectralField::zeros(&grid(8));
        let b = SpectralField::zeros(&grid(16));
        assert!(matches!(VectorField::new(a, b), Err(KseError::GridMismatch(8, 16))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn parseval(seed in any::<u64>()) {
            let g = grid(16);
            let f = random_field(&g, seed);
            let physical = f.values().iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
            let spectral = coefficient_energy(&f.coeffs());
            prop_assert!((physical - spectral).abs() / physical < 1e-12);
        }

        #[test]
        fn derive_commutes_with_dealias(seed in any::<u64>()) {
            let g = grid(16);
            let f = band_limited(&g, 4, seed);
            for order in [(1, 0), (0, 1), (2, 1)] {
                let a = f.derive(order).dealias();
                let b = f.dealias().derive(order);
                prop_assert!(max_abs_diff(&a.values(), &b.values()) < 1e-11);
            }
        }

        #[test]
        fn repeated_first_derivative(seed in any::<u64>()) {
            let g = grid(16);
            let f = band_limited(&g, 5, seed);
            let twice = f.derive((1, 0)).derive((1, 0));
            let once = f.derive((2, 0));
            prop_assert!(max_abs_diff(&twice.values(), &once.values()) < 1e-11);
        }

        #[test]
        fn subtract_mean_idempotent(seed in any::<u64>()) {
            let g = grid(8);
            let f = random_field(&g, seed).subtract_mean();
            let twice = f.subtract_mean();
            prop_assert!(max_abs_diff(&f.values(), &twice.values()) < 1e-15);
            prop_assert!(f.mean().abs() < 1e-15);
        }
    }
}
