//! Gaussian-windowed phase-space transform `T_R`, its adjoint, anti-Wick
//! localization and packet coefficients.
//!
//! `T_R f(x, ξ) = C_R ∫ e^{iξ(x−y)} e^{−(x−y)²/(2R)} f(y) dy` with
//! `C_R = 2^{−d/2} π^{−3d/4} R^{−d/4}`, sampled at x centres every `stride`
//! grid points and at every DFT frequency. The window is periodized on the
//! torus, so the discrete transform satisfies `T*T = W` with `|W − 1| ≲ 2e^{−L²/R}`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result, param_err};
use crate::grid::{Spectral, SpatialField, SpatialGrid};
use crate::math::{PI, wrap};
use crate::phase_space::{Lattice, LatticeIndex, PhasePoint, PhaseSpaceRegion, partition_weights};

/// Transform widths of headroom required between the data bandwidth and Nyquist.
pub const WINDOW_WIDTHS: f64 = 8.0;

pub fn normalization(dim: usize, big_r: f64) -> f64 {
    let d = dim as f64;
    Float::powf(2.0, -d / 2.0) * Float::powf(PI, -0.75 * d) * Float::powf(big_r, -d / 4.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseSpaceGrid {
    pub grid: SpatialGrid,
    pub stride: usize,
    pub big_r: f64,
}

impl PhaseSpaceGrid {
    /// Largest power-of-two stride with x spacing at most `√R/4`.
    pub fn new(grid: SpatialGrid, big_r: f64) -> Result<Self> {
        let target = Float::sqrt(big_r) / 4.0 / grid.spacing();
        let mut stride = 1usize;
        while 2 * stride <= grid.points() && (2 * stride) as f64 <= target {
            stride *= 2;
        }
        Self::with_stride(grid, big_r, stride)
    }

    pub fn with_stride(grid: SpatialGrid, big_r: f64, stride: usize) -> Result<Self> {
        if !(big_r > 0.0 && big_r.is_finite()) {
            return Err(param_err!("scale must be positive, got {big_r}"));
        }
        if stride == 0 || grid.points() % stride != 0 {
            return Err(param_err!("stride {stride} must divide {}", grid.points()));
        }
        if Float::sqrt(big_r) > grid.half_width() / 4.0 {
            return Err(Error::Resolution(alloc::format!(
                "window width sqrt(R) = {} exceeds L/4 = {}",
                Float::sqrt(big_r),
                grid.half_width() / 4.0
            )));
        }
        Ok(Self { grid, stride, big_r })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }
    pub fn centers_per_axis(&self) -> usize {
        self.grid.points() / self.stride
    }
    pub fn centers(&self) -> usize {
        self.centers_per_axis().pow(self.dim() as u32)
    }
    pub fn x_spacing(&self) -> f64 {
        self.stride as f64 * self.grid.spacing()
    }
    pub fn xi_spacing(&self) -> f64 {
        self.grid.frequency_spacing()
    }
    /// Quadrature weight `(Δx Δξ)^d`.
    pub fn cell(&self) -> f64 {
        Float::powi(self.x_spacing() * self.xi_spacing(), self.dim() as i32)
    }
    pub fn len(&self) -> usize {
        self.centers() * self.grid.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Largest representable |ξ| (the frequency window).
    pub fn window(&self) -> f64 {
        self.grid.nyquist()
    }

    /// Grid index of the j-th x centre (row-major over centres).
    fn center_grid_index(&self, j: usize) -> [usize; 2] {
        let m = self.centers_per_axis();
        if self.dim() == 1 { [j * self.stride, 0] } else { [(j / m) * self.stride, (j % m) * self.stride] }
    }

    pub fn x_center(&self, j: usize) -> [f64; 2] {
        let g = self.center_grid_index(j);
        let mut x = [0.0; 2];
        for a in 0..self.dim() {
            x[a] = self.grid.coord(g[a]);
        }
        x
    }

    /// `(x, ξ)` of flat sample `idx = j·N^d + k`.
    pub fn point(&self, idx: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.grid.len();
        (self.x_center(idx / n), self.grid.frequency(idx % n))
    }

    pub fn phase_point(&self, idx: usize) -> PhasePoint {
        let (x, xi) = self.point(idx);
        let d = self.dim();
        PhasePoint { x: x[..d].to_vec(), xi: xi[..d].to_vec() }
    }

    /// One-axis periodized window indexed by grid offset.
    fn window_table(&self) -> Vec<f64> {
        let n = self.grid.points();
        let h = self.grid.spacing();
        let l = self.grid.half_width();
        (0..n)
            .map(|o| {
                let u = wrap(o as f64 * h, l);
                (-2i32..=2).map(|m| Float::exp(-Float::powi(u - 2.0 * l * m as f64, 2) / (2.0 * self.big_r))).sum()
            })
            .collect()
    }

    /// `max |W − 1|` where `T*T = W` pointwise on the grid.
    pub fn frame_deviation(&self) -> f64 {
        let w = self.window_table();
        let n = self.grid.points();
        let c2 = normalization(1, self.big_r).powi(2) * 2.0 * PI * self.x_spacing();
        let d = self.dim() as i32;
        (0..self.stride)
            .map(|r| {
                let s: f64 = (0..self.centers_per_axis()).map(|j| w[(r + n - j * self.stride) % n].powi(2)).sum();
                Float::abs(Float::powi(c2 * s, d) - 1.0)
            })
            .fold(0.0, f64::max)
    }

    fn window_at(&self, table: &[f64], j: usize, k: usize) -> f64 {
        let n = self.grid.points();
        let c = self.center_grid_index(j);
        let idx = if self.dim() == 1 { [k, 0] } else { [k / n, k % n] };
        let mut w = 1.0;
        for a in 0..self.dim() {
            w *= table[(idx[a] + n - c[a]) % n];
        }
        w
    }
}

/// Samples `F(x_j, ξ_k)`, flat index `j·N^d + k`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseSpaceField {
    pub psgrid: PhaseSpaceGrid,
    pub values: Vec<Complex64>,
}

impl PhaseSpaceField {
    pub fn zeros(psgrid: PhaseSpaceGrid) -> Self {
        Self { psgrid, values: alloc::vec![Complex64::new(0.0, 0.0); psgrid.len()] }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.psgrid.cell()
    }

    pub fn norm_l2(&self) -> f64 {
        Float::sqrt(self.norm_sq())
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.psgrid != other.psgrid {
            return Err(Error::GridMismatch("phase-space grids differ".into()));
        }
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.psgrid.cell())
    }

    /// Location and magnitude of the largest sample.
    pub fn peak(&self) -> (PhasePoint, f64) {
        let (idx, m) = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        (self.psgrid.phase_point(idx), m)
    }

    pub fn magnitude_at(&self, idx: usize) -> f64 {
        self.values[idx].norm()
    }
}

fn check_band(f: &SpatialField, big_r: f64) -> Result<()> {
    let bw = Spectral::new(f.grid)?.bandwidth(f, 1e-20);
    let need = bw + WINDOW_WIDTHS / Float::sqrt(big_r);
    if need > f.grid.nyquist() {
        return Err(Error::Resolution(alloc::format!(
            "data bandwidth {bw} plus window headroom exceeds Nyquist {}",
            f.grid.nyquist()
        )));
    }
    Ok(())
}

/// `T_R f` on `psgrid`.
pub fn fbi_forward(f: &SpatialField, psgrid: &PhaseSpaceGrid) -> Result<PhaseSpaceField> {
    if f.grid != psgrid.grid {
        return Err(Error::GridMismatch("field grid differs from the phase-space grid".into()));
    }
    check_band(f, psgrid.big_r)?;
    let spectral = Spectral::new(f.grid)?;
    let table = psgrid.window_table();
    let n = f.grid.len();
    let d = f.grid.dim();
    let l = f.grid.half_width();
    let pref = normalization(d, psgrid.big_r) * f.grid.cell();
    let rows = crate::par::par_map_range(psgrid.centers(), |j| {
        let mut g: Vec<Complex64> = (0..n).map(|k| f.values[k] * psgrid.window_at(&table, j, k)).collect();
        spectral.forward_in_place(&mut g);
        let xc = psgrid.x_center(j);
        for (k, v) in g.iter_mut().enumerate() {
            let xi = f.grid.frequency(k);
            let ph = (0..d).map(|a| xi[a] * (xc[a] + l)).sum::<f64>();
            *v *= Complex64::from_polar(pref, ph);
        }
        g
    });
    Ok(PhaseSpaceField { psgrid: *psgrid, values: rows.concat() })
}

/// Quadrature adjoint `T_R* F` on the spatial grid of `F`.
pub fn fbi_adjoint(field: &PhaseSpaceField, grid: &SpatialGrid) -> Result<SpatialField> {
    let ps = field.psgrid;
    if ps.grid != *grid {
        return Err(Error::Resolution("spatial grid does not match the phase-space grid".into()));
    }
    if field.values.len() != ps.len() {
        return Err(Error::Resolution("phase-space sample count does not match its grid".into()));
    }
    let spectral = Spectral::new(*grid)?;
    let table = ps.window_table();
    let n = grid.len();
    let d = grid.dim();
    let l = grid.half_width();
    // inverse() divides by N^d; undo it.
    let pref = normalization(d, ps.big_r) * ps.cell() * n as f64;
    let parts = crate::par::par_map_range(ps.centers(), |j| {
        if field.values[j * n..(j + 1) * n].iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
            return Vec::new();
        }
        let xc = ps.x_center(j);
        let mut h: Vec<Complex64> = (0..n)
            .map(|k| {
                let xi = grid.frequency(k);
                let ph = -(0..d).map(|a| xi[a] * (xc[a] + l)).sum::<f64>();
                field.values[j * n + k] * Complex64::from_polar(1.0, ph)
            })
            .collect();
        spectral.inverse_in_place(&mut h);
        for (k, v) in h.iter_mut().enumerate() {
            *v *= pref * ps.window_at(&table, j, k);
        }
        h
    });
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); n];
    for p in parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    SpatialField::from_values(*grid, out)
}

#[derive(Clone, Debug)]
pub struct Localized {
    pub field: SpatialField,
    /// `‖1_{0<m<1} T_r f‖`: transform mass inside the mask's transition band.
    pub band_mass: f64,
}

/// Anti-Wick localization `T_r* m T_r f` with the smooth mask of `region`.
pub fn localize(f: &SpatialField, region: &PhaseSpaceRegion, r: f64) -> Result<Localized> {
    localize_with(f, r, |x, xi| region.mask(x, xi, r), region.dim())
}

/// Anti-Wick quantization of an arbitrary mask `m(x, ξ) ∈ [0, 1]`.
pub fn localize_with(f: &SpatialField, r: f64, mask: impl Fn(&[f64], &[f64]) -> f64, dim: usize) -> Result<Localized> {
    if dim != f.grid.dim() {
        return Err(param_err!("region dimension does not match the field"));
    }
    let ps = PhaseSpaceGrid::new(f.grid, r)?;
    let mut big_f = fbi_forward(f, &ps)?;
    let d = dim;
    let mut band = 0.0;
    for (idx, v) in big_f.values.iter_mut().enumerate() {
        let (x, xi) = ps.point(idx);
        let m = mask(&x[..d], &xi[..d]).clamp(0.0, 1.0);
        if m > 0.0 && m < 1.0 {
            band += v.norm_sqr();
        }
        *v *= m;
    }
    let field = fbi_adjoint(&big_f, &f.grid)?;
    Ok(Localized { field, band_mass: Float::sqrt(band * ps.cell()) })
}

/// `α_T = ‖ψ_T T_r f‖` for every lattice node (same order as `lattice`).
pub fn packet_coefficients(f: &SpatialField, lattice: &Lattice, big_r: f64) -> Result<Vec<f64>> {
    if Float::abs(lattice.r - big_r) > 1e-12 * big_r {
        return Err(param_err!("lattice scale {} differs from R = {big_r}", lattice.r));
    }
    if lattice.dim != f.grid.dim() {
        return Err(param_err!("lattice dimension does not match the field"));
    }
    if lattice.is_empty() {
        return Ok(Vec::new());
    }
    let ps = PhaseSpaceGrid::new(f.grid, big_r)?;
    let big_f = fbi_forward(f, &ps)?;
    let pw = partition_weights(lattice)?.periodic(f.grid.half_width());
    let lookup: BTreeMap<LatticeIndex, usize> = lattice.indices.iter().enumerate().map(|(k, i)| (*i, k)).collect();
    let d = lattice.dim;
    let mut acc = alloc::vec![0.0; lattice.len()];
    let n = f.grid.len();
    for j in 0..ps.centers() {
        let xc = ps.x_center(j);
        let xs: Vec<Vec<(i64, f64)>> = (0..d).map(|a| pw.axis_x_support(xc[a])).collect();
        for k in 0..n {
            let v = big_f.values[j * n + k].norm_sqr();
            if v == 0.0 {
                continue;
            }
            let xi = f.grid.frequency(k);
            let ks: Vec<Vec<(i64, f64)>> = (0..d).map(|a| pw.axis_xi_support(xi[a])).collect();
            for_each_node(d, &xs, &ks, |idx, w| {
                if let Some(&t) = lookup.get(&idx) {
                    acc[t] += w * w * v;
                }
            });
        }
    }
    Ok(acc.into_iter().map(|s| Float::sqrt(s * ps.cell())).collect())
}

fn for_each_node(d: usize, xs: &[Vec<(i64, f64)>], ks: &[Vec<(i64, f64)>], mut f: impl FnMut(LatticeIndex, f64)) {
    if d == 1 {
        for &(i, wx) in &xs[0] {
            for &(k, wk) in &ks[0] {
                f(LatticeIndex { x: [i, 0], xi: [k, 0] }, wx * wk);
            }
        }
        return;
    }
    for &(i1, a1) in &xs[0] {
        for &(i2, a2) in &xs[1] {
            for &(k1, b1) in &ks[0] {
                for &(k2, b2) in &ks[1] {
                    f(LatticeIndex { x: [i1, i2], xi: [k1, k2] }, a1 * a2 * b1 * b2);
                }
            }
        }
    }
}
