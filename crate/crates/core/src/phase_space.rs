//! Phase-space geometry at scale `r`: the metric `d_r`, lattices
//! `r^{1/2}ℤ^d × r^{-1/2}ℤ^d`, thickened regions, coherent states and a smooth
//! partition of unity subordinate to the lattice.

use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Result, param_err};
use crate::grid::{SpatialField, SpatialGrid};
use crate::math::{bump, dist, norm, wrap};

/// Default factor between the inner and outer thickening margins.
pub const DEFAULT_OUTER_FACTOR: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: &[f64], xi: &[f64]) -> Result<Self> {
        if x.len() != xi.len() || !(1..=2).contains(&x.len()) {
            return Err(param_err!("phase point needs matching x/xi of length 1 or 2"));
        }
        if x.iter().chain(xi).any(|v| !v.is_finite()) {
            return Err(param_err!("phase point has non-finite components"));
        }
        Ok(Self { x: x.to_vec(), xi: xi.to_vec() })
    }

    /// One-dimensional point.
    pub fn d1(x: f64, xi: f64) -> Self {
        Self { x: alloc::vec![x], xi: alloc::vec![xi] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x2(&self) -> [f64; 2] {
        pad(&self.x)
    }

    pub fn xi2(&self) -> [f64; 2] {
        pad(&self.xi)
    }
}

pub(crate) fn pad(v: &[f64]) -> [f64; 2] {
    [v[0], if v.len() > 1 { v[1] } else { 0.0 }]
}

/// The scale parameters `(R, ν, δ₀, δ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScaleParams {
    big_r: f64,
    nu: f64,
    delta0: f64,
    delta: f64,
    nu_clamped: bool,
}

impl ScaleParams {
    /// Validates `R ≥ 1`, `0 < δ ≤ δ₀ < 1/2` and `R^{-1/2+δ₀} ≤ ν ≤ 1`.
    /// A degenerate `ν ≤ R^{-1/2}` is clamped to `R^{-1/2+δ₀}` and flagged.
    pub fn new(big_r: f64, nu: f64, delta0: f64, delta: f64) -> Result<Self> {
        if !(big_r.is_finite() && big_r >= 1.0) {
            return Err(param_err!("R must be >= 1, got {big_r}"));
        }
        if !(delta > 0.0 && delta <= delta0 && delta0 < 0.5) {
            return Err(param_err!("need 0 < delta <= delta0 < 1/2, got delta = {delta}, delta0 = {delta0}"));
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(param_err!("nu must lie in (0, 1], got {nu}"));
        }
        let floor = Float::powf(big_r, -0.5 + delta0);
        let mut nu_clamped = false;
        let mut nu = nu;
        if nu <= Float::powf(big_r, -0.5) {
            nu = floor;
            nu_clamped = true;
        } else if nu < floor * (1.0 - 1e-12) {
            return Err(param_err!("nu = {nu} is below R^(-1/2+delta0) = {floor}"));
        }
        Ok(Self { big_r, nu, delta0, delta, nu_clamped })
    }

    #[inline]
    pub fn big_r(&self) -> f64 {
        self.big_r
    }
    #[inline]
    pub fn nu(&self) -> f64 {
        self.nu
    }
    #[inline]
    pub fn delta0(&self) -> f64 {
        self.delta0
    }
    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }
    /// Whether `ν` was clamped up from a degenerate value.
    #[inline]
    pub fn nu_clamped(&self) -> bool {
        self.nu_clamped
    }
    /// Legal range `[ν^{-2-δ₀}, R]` of intermediate scales.
    pub fn scale_range(&self) -> (f64, f64) {
        (Float::powf(self.nu, -2.0 - self.delta0), self.big_r)
    }
}

/// Euclidean, for ξ-balls; directional with an annulus for sectors.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum FrequencySet {
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ξ : |ξ/|ξ| − center| ≤ radius, inner ≤ |ξ| ≤ outer}` with `center` a unit vector.
    Sector { center: Vec<f64>, radius: f64, inner: f64, outer: f64 },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseSpaceRegion {
    pub x_center: Vec<f64>,
    pub x_radius: f64,
    pub freq: FrequencySet,
    pub margin_x: f64,
    pub margin_xi: f64,
}

impl PhaseSpaceRegion {
    pub fn ball(x_center: &[f64], x_radius: f64, xi_center: &[f64], xi_radius: f64) -> Result<Self> {
        let r = Self {
            x_center: x_center.to_vec(),
            x_radius,
            freq: FrequencySet::Ball { center: xi_center.to_vec(), radius: xi_radius },
            margin_x: 0.0,
            margin_xi: 0.0,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn sector(x_center: &[f64], x_radius: f64, direction: &[f64], aperture: f64) -> Result<Self> {
        let r = Self {
            x_center: x_center.to_vec(),
            x_radius,
            freq: FrequencySet::Sector { center: direction.to_vec(), radius: aperture, inner: 0.5, outer: 2.0 },
            margin_x: 0.0,
            margin_xi: 0.0,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_margins(mut self, margin_x: f64, margin_xi: f64) -> Result<Self> {
        self.margin_x = margin_x;
        self.margin_xi = margin_xi;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.x_center.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.x_center.len();
        if !(1..=2).contains(&d) {
            return Err(param_err!("region dimension must be 1 or 2"));
        }
        if !(self.margin_x >= 0.0 && self.margin_xi >= 0.0) {
            return Err(param_err!("margins must be nonnegative"));
        }
        if !(self.x_radius >= 0.0) {
            return Err(param_err!("spatial radius must be nonnegative"));
        }
        match &self.freq {
            FrequencySet::Ball { center, radius } => {
                if center.len() != d || !(*radius >= 0.0 && *radius <= 1.0) {
                    return Err(param_err!("frequency ball needs dimension {d} and radius in [0, 1]"));
                }
            }
            FrequencySet::Sector { center, radius, inner, outer } => {
                if center.len() != d || Float::abs(norm(center) - 1.0) > 1e-12 {
                    return Err(param_err!("sector center must be a unit vector of dimension {d}"));
                }
                if !(*radius >= 0.0 && *radius <= 1.0 && 0.0 < *inner && inner < outer) {
                    return Err(param_err!("sector needs radius in [0, 1] and 0 < inner < outer"));
                }
            }
        }
        Ok(())
    }

    /// Distance of `x` beyond the margined spatial ball (0 inside).
    pub fn excess_x(&self, x: &[f64]) -> f64 {
        (dist(x, &self.x_center) - self.x_radius - self.margin_x).max(0.0)
    }

    /// Distance of `xi` beyond the margined frequency set (0 inside).
    pub fn excess_xi(&self, xi: &[f64]) -> f64 {
        match &self.freq {
            FrequencySet::Ball { center, radius } => (dist(xi, center) - radius - self.margin_xi).max(0.0),
            FrequencySet::Sector { center, radius, inner, outer } => {
                let m = norm(xi);
                let radial = (inner - m).max(m - outer).max(0.0);
                let angular = if m == 0.0 {
                    0.0
                } else {
                    let chord = xi.iter().zip(center).map(|(a, c)| (a / m - c) * (a / m - c)).sum::<f64>();
                    m * (Float::sqrt(chord) - radius).max(0.0)
                };
                (Float::hypot(radial, angular) - self.margin_xi).max(0.0)
            }
        }
    }

    pub fn contains(&self, p: &PhasePoint) -> bool {
        const TOL: f64 = 1e-12;
        self.excess_x(&p.x) <= TOL * (1.0 + self.x_radius + self.margin_x)
            && self.excess_xi(&p.xi) <= TOL
    }

    /// Axis-aligned bounding box of the margined region: `(x_lo, x_hi, xi_lo, xi_hi)`.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2], [f64; 2], [f64; 2]) {
        let d = self.dim();
        let ex = self.x_radius + self.margin_x;
        let mut xl = [0.0; 2];
        let mut xh = [0.0; 2];
        let mut kl = [0.0; 2];
        let mut kh = [0.0; 2];
        for i in 0..d {
            xl[i] = self.x_center[i] - ex;
            xh[i] = self.x_center[i] + ex;
            match &self.freq {
                FrequencySet::Ball { center, radius } => {
                    kl[i] = center[i] - radius - self.margin_xi;
                    kh[i] = center[i] + radius + self.margin_xi;
                }
                FrequencySet::Sector { outer, .. } => {
                    kl[i] = -outer - self.margin_xi;
                    kh[i] = outer + self.margin_xi;
                }
            }
        }
        (xl, xh, kl, kh)
    }

    pub fn translated(&self, a: &[f64]) -> Self {
        let mut r = self.clone();
        for (c, s) in r.x_center.iter_mut().zip(a) {
            *c += s;
        }
        r
    }

    /// Smooth phase-space mask: 1 on the margined region, 0 beyond a
    /// transition band of `d_r`-width 2 (that is `2r^{1/2}` in x, `2r^{-1/2}` in ξ).
    pub fn mask(&self, x: &[f64], xi: &[f64], r: f64) -> f64 {
        let sx = Float::sqrt(r);
        let ex = self.excess_x(x) / sx;
        let ek = self.excess_xi(xi) * sx;
        let s = ex + ek;
        if s <= 0.0 { 1.0 } else { bump(1.0 + s / 2.0) }
    }
}

/// `d_r((x₁,ξ₁),(x₂,ξ₂)) = r^{-1/2}|x₁−x₂| + r^{1/2}|ξ₁−ξ₂|`.
pub fn d_r_metric(p1: &PhasePoint, p2: &PhasePoint, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(param_err!("scale must be positive, got {r}"));
    }
    if p1.dim() != p2.dim() {
        return Err(param_err!("points of different dimension"));
    }
    let s = Float::sqrt(r);
    Ok(dist(&p1.x, &p2.x) / s + s * dist(&p1.xi, &p2.xi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatticeIndex {
    pub x: [i64; 2],
    pub xi: [i64; 2],
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lattice {
    pub r: f64,
    pub dim: usize,
    pub points: Vec<PhasePoint>,
    pub indices: Vec<LatticeIndex>,
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn x_spacing(&self) -> f64 {
        Float::sqrt(self.r)
    }
    pub fn xi_spacing(&self) -> f64 {
        1.0 / Float::sqrt(self.r)
    }
}

/// Lattice points of `r^{1/2}ℤ^d × r^{-1/2}ℤ^d` inside the margined region,
/// ordered lexicographically by (x index, ξ index).
pub fn lattice_points(r: f64, region: &PhaseSpaceRegion) -> Result<Lattice> {
    if !(r >= 1.0) {
        return Err(param_err!("lattice scale must be >= 1, got {r}"));
    }
    region.validate()?;
    let d = region.dim();
    let sx = Float::sqrt(r);
    let sk = 1.0 / sx;
    let (xl, xh, kl, kh) = region.bounding_box();
    let range = |lo: f64, hi: f64, s: f64| -> (i64, i64) {
        let eps = 1e-9;
        (Float::ceil(lo / s - eps) as i64, Float::floor(hi / s + eps) as i64)
    };
    let axes = |lo: [f64; 2], hi: [f64; 2], s: f64| -> Vec<[i64; 2]> {
        let a = range(lo[0], hi[0], s);
        let mut out = Vec::new();
        if d == 1 {
            for i in a.0..=a.1 {
                out.push([i, 0]);
            }
        } else {
            let b = range(lo[1], hi[1], s);
            for i in a.0..=a.1 {
                for j in b.0..=b.1 {
                    out.push([i, j]);
                }
            }
        }
        out
    };
    let xs = axes(xl, xh, sx);
    let ks = axes(kl, kh, sk);
    let mut points = Vec::new();
    let mut indices = Vec::new();
    for ix in &xs {
        let x: Vec<f64> = (0..d).map(|i| ix[i] as f64 * sx).collect();
        if region.excess_x(&x) > 1e-12 * (1.0 + region.x_radius + region.margin_x) {
            continue;
        }
        for ik in &ks {
            let xi: Vec<f64> = (0..d).map(|i| ik[i] as f64 * sk).collect();
            let p = PhasePoint { x: x.clone(), xi };
            if region.contains(&p) {
                points.push(p);
                indices.push(LatticeIndex { x: *ix, xi: *ik });
            }
        }
    }
    Ok(Lattice { r, dim: d, points, indices })
}

/// Margins `(R r^{-1/2+δ₀}, r^{-1/2+δ₀})` of the scale-`r` thickening.
pub fn thicken_margins(r: f64, big_r: f64, delta0: f64) -> (f64, f64) {
    let k = Float::powf(r, -0.5 + delta0);
    (big_r * k, k)
}

fn check_scale(r: f64, params: &ScaleParams) -> Result<()> {
    let (lo, hi) = params.scale_range();
    if !(r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12)) {
        return Err(param_err!("scale r = {r} outside [nu^(-2-delta0), R] = [{lo}, {hi}]"));
    }
    Ok(())
}

/// Inner thickening at scale `r`.
pub fn thicken(region: &PhaseSpaceRegion, r: f64, params: &ScaleParams) -> Result<PhaseSpaceRegion> {
    thicken_scaled(region, r, params, 1.0)
}

/// Outer thickening: margins multiplied by `factor` (default [`DEFAULT_OUTER_FACTOR`]).
pub fn thicken_outer(region: &PhaseSpaceRegion, r: f64, params: &ScaleParams, factor: f64) -> Result<PhaseSpaceRegion> {
    if !(factor >= 1.0) {
        return Err(param_err!("outer thickening factor must be >= 1, got {factor}"));
    }
    thicken_scaled(region, r, params, factor)
}

fn thicken_scaled(region: &PhaseSpaceRegion, r: f64, params: &ScaleParams, factor: f64) -> Result<PhaseSpaceRegion> {
    check_scale(r, params)?;
    let (mx, mk) = thicken_margins(r, params.big_r(), params.delta0());
    let mut out = region.clone();
    out.margin_x += factor * mx;
    out.margin_xi += factor * mk;
    out.validate()?;
    Ok(out)
}

/// Values are `e^{iξ₀·(y−x₀)} e^{-|y−x₀|²/(2R)}` with minimum-image displacement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationWarning {
    /// `|φ|` at the wrap seam.
    pub boundary_amplitude: f64,
    /// Fraction of `|φ|²` mass that an infinite line would carry beyond the seam.
    pub tail_mass: f64,
}

/// Sampled coherent state. Returns a warning when the periodic box is too
/// small for the Gaussian tail to fall below `1e-12` at the seam.
pub fn coherent_state(
    x0: &[f64],
    xi0: &[f64],
    big_r: f64,
    grid: &SpatialGrid,
) -> Result<(SpatialField, Option<TruncationWarning>)> {
    let d = grid.dim();
    if x0.len() != d || xi0.len() != d {
        return Err(param_err!("coherent state dimension does not match grid"));
    }
    if !(big_r > 0.0) {
        return Err(param_err!("scale must be positive"));
    }
    let x0 = pad(x0);
    let xi0 = pad(xi0);
    let field = SpatialField::from_fn(*grid, |y| {
        let mut phase = 0.0;
        let mut q = 0.0;
        for i in 0..d {
            let dy = grid.wrap(y[i] - x0[i]);
            phase += xi0[i] * dy;
            q += dy * dy;
        }
        Complex64::from_polar(Float::exp(-q / (2.0 * big_r)), phase)
    });
    let l = grid.half_width();
    let amp = Float::exp(-l * l / (2.0 * big_r));
    let warning = (amp > 1e-12).then(|| TruncationWarning {
        boundary_amplitude: amp,
        tail_mass: 1.0 - Float::powi(1.0 - crate::math::erfc(l / Float::sqrt(big_r)), d as i32),
    });
    Ok((field, warning))
}

/// Tensor-product smooth partition of unity on the lattice at scale `r`.
///
/// Per axis the raw weight of lattice node `i` is `b(3(x − i s)/s)`, where `b`
/// is the plateau bump, and it is divided by the sum over all nodes. The
/// x axis may be periodic (nodes `i s ∈ [−L, L)` on a torus).
#[derive(Clone, Debug)]
pub struct PartitionWeights {
    pub lattice: Lattice,
    periodic_half_width: Option<f64>,
}

/// Family `ψ_{x₀,ξ₀}` for `lattice`, normalized over the full unclipped lattice.
pub fn partition_weights(lattice: &Lattice) -> Result<PartitionWeights> {
    if lattice.is_empty() {
        return Err(param_err!("partition needs a nonempty lattice"));
    }
    Ok(PartitionWeights { lattice: lattice.clone(), periodic_half_width: None })
}

impl PartitionWeights {
    /// Treat x as periodic on `[-L, L)`.
    pub fn periodic(mut self, half_width: f64) -> Self {
        self.periodic_half_width = Some(half_width);
        self
    }

    /// Normalized weight of lattice node `idx` along one x axis at `x`.
    pub fn axis_x(&self, i: i64, x: f64) -> f64 {
        let s = self.lattice.x_spacing();
        match self.periodic_half_width {
            None => axis_weight(i, x, s),
            Some(l) => periodic_axis_weight(i, x, s, l),
        }
    }

    pub fn axis_xi(&self, i: i64, xi: f64) -> f64 {
        axis_weight(i, xi, self.lattice.xi_spacing())
    }

    /// `ψ_k` at phase point `p` for lattice entry `k`.
    pub fn weight(&self, k: usize, p: &PhasePoint) -> f64 {
        let idx = &self.lattice.indices[k];
        let mut w = 1.0;
        for a in 0..self.lattice.dim {
            w *= self.axis_x(idx.x[a], p.x[a]) * self.axis_xi(idx.xi[a], p.xi[a]);
        }
        w
    }

    /// Nodes with nonzero x-axis weight at `x`, with their weights.
    pub fn axis_x_support(&self, x: f64) -> Vec<(i64, f64)> {
        let s = self.lattice.x_spacing();
        let nodes: Vec<i64> = match self.periodic_half_width {
            None => {
                let c = Float::round(x / s) as i64;
                (c - 1..=c + 1).collect()
            }
            Some(l) => periodic_nodes(x, s, l),
        };
        nodes.into_iter().map(|i| (i, self.axis_x(i, x))).filter(|p| p.1 > 0.0).collect()
    }

    pub fn axis_xi_support(&self, xi: f64) -> Vec<(i64, f64)> {
        let c = Float::round(xi / self.lattice.xi_spacing()) as i64;
        (c - 1..=c + 1).map(|i| (i, self.axis_xi(i, xi))).filter(|p| p.1 > 0.0).collect()
    }

    /// Sum of the weights over the full (unclipped) lattice at `p`.
    pub fn full_sum(&self, p: &PhasePoint) -> f64 {
        let mut total = 1.0;
        for a in 0..self.lattice.dim {
            let sx = self.lattice.x_spacing();
            let sk = self.lattice.xi_spacing();
            let cx = Float::round(p.x[a] / sx) as i64;
            let ck = Float::round(p.xi[a] / sk) as i64;
            let fx: f64 = match self.periodic_half_width {
                None => (cx - 2..=cx + 2).map(|i| self.axis_x(i, p.x[a])).sum(),
                Some(l) => periodic_nodes(p.x[a], sx, l).iter().map(|&i| self.axis_x(i, p.x[a])).sum(),
            };
            let fk: f64 = (ck - 2..=ck + 2).map(|i| self.axis_xi(i, p.xi[a])).sum();
            total *= fx * fk;
        }
        total
    }
}

#[inline]
fn raw(u: f64) -> f64 {
    bump(3.0 * u)
}

fn axis_weight(i: i64, x: f64, s: f64) -> f64 {
    let w = raw(x / s - i as f64);
    if w == 0.0 {
        return 0.0;
    }
    let c = Float::round(x / s) as i64;
    let total: f64 = (c - 2..=c + 2).map(|j| raw(x / s - j as f64)).sum();
    w / total
}

/// Node index range on the torus: `i s ∈ [−L, L)`.
fn node_range(s: f64, l: f64) -> (i64, i64) {
    (Float::ceil(-l / s - 1e-12) as i64, Float::ceil(l / s - 1e-12) as i64 - 1)
}

fn periodic_nodes(x: f64, s: f64, l: f64) -> Vec<i64> {
    let (lo, hi) = node_range(s, l);
    let mut out: Vec<i64> = Vec::with_capacity(5);
    for o in -2..=2 {
        let y = wrap(x + o as f64 * s, l);
        let i = (Float::round(y / s) as i64).clamp(lo, hi);
        for j in [i - 1, i, i + 1] {
            let j = if j < lo { hi } else if j > hi { lo } else { j };
            if !out.contains(&j) {
                out.push(j);
            }
        }
    }
    out
}

fn periodic_axis_weight(i: i64, x: f64, s: f64, l: f64) -> f64 {
    let w = raw(wrap(x - i as f64 * s, l) / s);
    if w == 0.0 {
        return 0.0;
    }
    let total: f64 = periodic_nodes(x, s, l).iter().map(|&j| raw(wrap(x - j as f64 * s, l) / s)).sum();
    w / total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_region(xr: f64, kr: f64) -> PhaseSpaceRegion {
        PhaseSpaceRegion::ball(&[0.0], xr, &[0.0], kr).unwrap()
    }

    #[test]
    fn metric_examples() {
        let p = PhasePoint::d1(1.0, 0.2);
        assert_eq!(d_r_metric(&p, &p, 9.0).unwrap(), 0.0);
        let q = PhasePoint::d1(1.0 + 3.0, 0.2);
        assert!((d_r_metric(&p, &q, 9.0).unwrap() - 1.0).abs() < 1e-15);
        let a = PhasePoint::d1(0.0, 0.0);
        let b = PhasePoint::d1(5.0, 0.3);
        assert!((d_r_metric(&a, &b, 100.0).unwrap() - 3.5).abs() < 1e-14);
        assert!(d_r_metric(&a, &b, 0.0).is_err());
    }

    #[test]
    fn lattice_box_example() {
        let l = lattice_points(4.0, &box_region(4.0, 1.0)).unwrap();
        assert_eq!(l.len(), 25);
        assert_eq!(l.points[0], PhasePoint::d1(-4.0, -1.0));
        assert_eq!(l.points[24], PhasePoint::d1(4.0, 1.0));
        let xs: Vec<f64> = l.points.iter().step_by(5).map(|p| p.x[0]).collect();
        assert_eq!(xs, [-4.0, -2.0, 0.0, 2.0, 4.0]);
    }

    #[test]
    fn lattice_outside_is_empty() {
        let reg = PhaseSpaceRegion::ball(&[0.7], 0.2, &[0.0], 0.1).unwrap();
        assert!(lattice_points(4.0, &reg).unwrap().is_empty());
    }

    #[test]
    fn lattice_nu_ball_at_most_three_per_axis() {
        let r: f64 = 64.0;
        for d in [1usize, 2] {
            let x = alloc::vec![0.0; d];
            let c = alloc::vec![0.3; d];
            let reg = PhaseSpaceRegion::ball(&x, 0.0, &c, 1.0 / r.sqrt()).unwrap();
            let l = lattice_points(r, &reg).unwrap();
            assert!(!l.is_empty() && l.len() <= 3usize.pow(d as u32));
        }
    }

    #[test]
    fn thicken_margin_examples() {
        assert_eq!(thicken_margins(256.0, 256.0, 0.0), (16.0, 1.0 / 16.0));
        assert_eq!(thicken_margins(16.0, 256.0, 0.0), (64.0, 0.25));
    }

    #[test]
    fn thicken_checks_range() {
        let p = ScaleParams::new(256.0, 1.0, 0.25, 0.1).unwrap();
        let reg = box_region(10.0, 0.5);
        assert!(thicken(&reg, 512.0, &p).is_err());
        assert!(thicken(&reg, 0.5, &p).is_err());
        let t = thicken(&reg, 16.0, &p).unwrap();
        let (mx, mk) = thicken_margins(16.0, 256.0, 0.25);
        assert_eq!((t.margin_x, t.margin_xi), (mx, mk));
        let o = thicken_outer(&reg, 16.0, &p, DEFAULT_OUTER_FACTOR).unwrap();
        assert_eq!(o.margin_x, 4.0 * mx);
    }

    #[test]
    fn scale_params_validation_and_clamp() {
        assert!(ScaleParams::new(0.5, 1.0, 0.25, 0.1).is_err());
        assert!(ScaleParams::new(256.0, 1.0, 0.1, 0.2).is_err());
        assert!(ScaleParams::new(256.0, 1.0, 0.5, 0.1).is_err());
        let p = ScaleParams::new(256.0, 0.01, 0.25, 0.1).unwrap();
        assert!(p.nu_clamped());
        assert!((p.nu() - 256f64.powf(-0.25)).abs() < 1e-15);
        assert!(ScaleParams::new(256.0, 0.2, 0.25, 0.1).is_err());
    }

    #[test]
    fn coherent_state_center_and_norm() {
        let big_r = 16.0;
        let g = SpatialGrid::new(1, 64.0, 1024).unwrap();
        let (f, w) = coherent_state(&[1.0], &[0.5], big_r, &g).unwrap();
        assert!(w.is_none());
        let k = g.nearest_index(1.0);
        assert!((f.values[k].norm() - 1.0).abs() < 1e-15);
        assert!((f.values[k] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let expect = (core::f64::consts::PI * big_r).sqrt();
        assert!((f.norm_sq() - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn coherent_state_truncation_warning() {
        let g = SpatialGrid::new(1, 8.0, 64).unwrap();
        let (_, w) = coherent_state(&[0.0], &[0.0], 64.0, &g).unwrap();
        let w = w.expect("box too small");
        assert!(w.boundary_amplitude > 1e-12 && w.tail_mass > 0.0);
    }

    #[test]
    fn coherent_state_translation_covariance() {
        let g = SpatialGrid::new(1, 32.0, 256).unwrap();
        let h = g.spacing();
        let shift = 5;
        let (a, _) = coherent_state(&[0.0], &[0.7], 4.0, &g).unwrap();
        let (b, _) = coherent_state(&[shift as f64 * h], &[0.7], 4.0, &g).unwrap();
        let n = g.points();
        for i in 0..n {
            let j = (i + n - shift) % n;
            assert!((b.values[i].norm() - a.values[j].norm()).abs() < 1e-14);
            assert!((b.values[i] - a.values[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn partition_single_cell_and_midpoint() {
        let l = lattice_points(4.0, &box_region(8.0, 1.0)).unwrap();
        let pw = partition_weights(&l).unwrap();
        let k = l.points.iter().position(|p| *p == PhasePoint::d1(0.0, 0.0)).unwrap();
        assert_eq!(pw.weight(k, &PhasePoint::d1(0.1, 0.05)), 1.0);
        let k2 = l.points.iter().position(|p| *p == PhasePoint::d1(2.0, 0.0)).unwrap();
        let mid = PhasePoint::d1(1.0, 0.0);
        assert!((pw.weight(k, &mid) + pw.weight(k2, &mid) - 1.0).abs() < 1e-15);
        assert!(pw.weight(k, &PhasePoint::d1(2.0, 0.0)) == 0.0);
    }

    #[test]
    fn periodic_partition_sums_to_one_across_seam() {
        let reg = box_region(8.0, 0.5);
        let l = lattice_points(9.0, &reg).unwrap();
        let pw = partition_weights(&l).unwrap().periodic(10.0);
        for i in 0..200 {
            let x = -10.0 + 0.1 * i as f64;
            let s = pw.full_sum(&PhasePoint::d1(x, 0.13));
            assert!((s - 1.0).abs() < 1e-12, "x = {x}: {s}");
        }
    }
}
