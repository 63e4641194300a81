//! Uniform periodic grids on `[-L, L)^d` and complex fields sampled on them.

use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result, param_err};
use crate::fft::{Fft2, FftPlan, signed_index};
use crate::math::{PI, is_power_of_two, wrap};

/// Minimum ratio between the grid Nyquist frequency and the finest frequency in play.
pub const NYQUIST_MARGIN: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpatialGrid {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(param_err!("grid dimension must be 1 or 2, got {dim}"));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(param_err!("half-width must be positive, got {half_width}"));
        }
        if points < 64 || !is_power_of_two(points) {
            return Err(param_err!("points per axis must be a power of two >= 64, got {points}"));
        }
        Ok(Self { dim, half_width, points })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    #[inline]
    pub fn points(&self) -> usize {
        self.points
    }
    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }
    /// Total sample count `N^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Cell volume `h^d`.
    #[inline]
    pub fn cell(&self) -> f64 {
        Float::powi(self.spacing(), self.dim as i32)
    }
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }
    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }
    /// Position of flat sample index `k` (row-major, first axis slowest).
    pub fn position(&self, k: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.coord(k), 0.0]
        } else {
            [self.coord(k / self.points), self.coord(k % self.points)]
        }
    }
    /// Angular frequency of FFT bin `k` along one axis.
    #[inline]
    pub fn wavenumber(&self, k: usize) -> f64 {
        signed_index(k, self.points) as f64 * PI / self.half_width
    }
    /// Frequency of flat spectral index `k`.
    pub fn frequency(&self, k: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.wavenumber(k), 0.0]
        } else {
            [self.wavenumber(k / self.points), self.wavenumber(k % self.points)]
        }
    }
    #[inline]
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }
    /// Fourier bin spacing `π/L`.
    #[inline]
    pub fn frequency_spacing(&self) -> f64 {
        PI / self.half_width
    }
    /// Minimum-image displacement on the torus.
    #[inline]
    pub fn wrap(&self, dx: f64) -> f64 {
        wrap(dx, self.half_width)
    }
    /// Checks that frequencies up to `freq` are resolved with the standard margin.
    pub fn check_resolves(&self, freq: f64) -> Result<()> {
        if NYQUIST_MARGIN * freq > self.nyquist() * (1.0 + 1e-12) {
            return Err(Error::Resolution(alloc::format!(
                "frequency {freq} needs Nyquist >= {} but the grid has {}",
                NYQUIST_MARGIN * freq,
                self.nyquist()
            )));
        }
        Ok(())
    }
    /// Index of the grid point nearest to `x` on one axis.
    pub fn nearest_index(&self, x: f64) -> usize {
        let u = (wrap(x, self.half_width) + self.half_width) / self.spacing();
        (Float::round(u) as usize) % self.points
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialField {
    pub grid: SpatialGrid,
    pub values: Vec<Complex64>,
}

impl SpatialField {
    pub fn zeros(grid: SpatialGrid) -> Self {
        Self { grid, values: alloc::vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_values(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(alloc::format!(
                "{} samples for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.position(k))).collect();
        Self { grid, values }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell()
    }

    pub fn norm_l2(&self) -> f64 {
        Float::sqrt(self.norm_sq())
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum::<f64>() * self.grid.cell()
    }

    /// `⟨self, other⟩ = ∫ self · conj(other)`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell())
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn scale(&mut self, c: Complex64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0));
        self
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: Complex64, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// Relative L² distance `‖self − other‖ / ‖other‖`.
    pub fn rel_diff(&self, other: &Self) -> Result<f64> {
        let d = self.sub(other)?.norm_l2();
        let n = other.norm_l2();
        Ok(if n == 0.0 { d } else { d / n })
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_l2();
        if n > 0.0 {
            self.scale(Complex64::new(1.0 / n, 0.0));
        }
        self
    }

    /// Plain DFT of the samples (see [`Spectral`]).
    pub fn spectrum(&self) -> Vec<Complex64> {
        Spectral::new(self.grid).expect("valid grid").forward(&self.values)
    }
}

/// Grid-aware DFT pair. Coefficients are the raw DFT of the samples; the
/// continuous transform is `û(ζ_k) ≈ h^d e^{iζ_k·L} U_k`.
#[derive(Clone, Debug)]
pub struct Spectral {
    grid: SpatialGrid,
    plan1: FftPlan,
    plan2: Option<Fft2>,
}

impl Spectral {
    pub fn new(grid: SpatialGrid) -> Result<Self> {
        let plan1 = FftPlan::new(grid.points())?;
        let plan2 = if grid.dim() == 2 { Some(Fft2::new(grid.points())?) } else { None };
        Ok(Self { grid, plan1, plan2 })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut v = values.to_vec();
        self.forward_in_place(&mut v);
        v
    }

    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut v = coeffs.to_vec();
        self.inverse_in_place(&mut v);
        v
    }

    pub fn forward_in_place(&self, v: &mut [Complex64]) {
        match &self.plan2 {
            Some(p) => p.forward(v),
            None => self.plan1.forward(v),
        }
    }

    pub fn inverse_in_place(&self, v: &mut [Complex64]) {
        match &self.plan2 {
            Some(p) => p.inverse(v),
            None => self.plan1.inverse(v),
        }
    }

    /// Apply a Fourier multiplier `m(ζ)` to a field.
    pub fn multiply(&self, field: &SpatialField, m: impl Fn([f64; 2]) -> Complex64) -> SpatialField {
        let mut v = self.forward(&field.values);
        for (k, c) in v.iter_mut().enumerate() {
            *c *= m(self.grid.frequency(k));
        }
        self.inverse_in_place(&mut v);
        SpatialField { grid: self.grid, values: v }
    }

    /// Largest |ζ| carrying relative spectral energy above `tol`.
    pub fn bandwidth(&self, field: &SpatialField, tol: f64) -> f64 {
        let v = self.forward(&field.values);
        let total: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        let mut best = 0.0f64;
        for (k, c) in v.iter().enumerate() {
            if c.norm_sqr() > tol * total {
                let f = self.grid.frequency(k);
                best = best.max(Float::sqrt(f[0] * f[0] + f[1] * f[1]));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = SpatialGrid::new(1, 8.0, 64).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.coord(0), -8.0);
        assert_eq!(g.wavenumber(1), PI / 8.0);
        assert_eq!(g.wavenumber(63), -PI / 8.0);
        assert!((g.nyquist() - 4.0 * PI).abs() < 1e-14);
        assert!(g.check_resolves(PI).is_ok());
        assert!(g.check_resolves(1.01 * PI).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpatialGrid::new(3, 1.0, 64).is_err());
        assert!(SpatialGrid::new(1, 1.0, 32).is_err());
        assert!(SpatialGrid::new(1, 1.0, 96).is_err());
        assert!(SpatialGrid::new(1, -1.0, 64).is_err());
    }

    #[test]
    fn multiplier_derivative_of_plane_wave() {
        let g = SpatialGrid::new(1, PI, 64).unwrap();
        let f = SpatialField::from_fn(g, |p| Complex64::from_polar(1.0, 3.0 * p[0]));
        let sp = Spectral::new(g).unwrap();
        let d = sp.multiply(&f, |z| Complex64::new(0.0, z[0]));
        for (k, v) in d.values.iter().enumerate() {
            let expect = Complex64::new(0.0, 3.0) * f.values[k];
            assert!((v - expect).norm() < 1e-11);
        }
    }

    #[test]
    fn constant_field_norms() {
        let g = SpatialGrid::new(2, 0.5, 64).unwrap();
        let f = SpatialField::from_fn(g, |_| Complex64::new(1.0, 0.0));
        assert!((f.norm_sq() - 1.0).abs() < 1e-12);
        assert!((f.norm_l1() - 1.0).abs() < 1e-12);
    }
}
