//! Space-time cubes, their smooth weights, and `L^p` norms over cubes.

use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result, param_err};
use crate::grid::SpatialGrid;
use crate::math::band_profile;
use crate::propagate::FieldTrajectory;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpaceTimeCube {
    pub center_x: Vec<f64>,
    pub center_t: f64,
    pub side: f64,
    /// Required quadrature points per side.
    pub resolution: usize,
}

impl SpaceTimeCube {
    pub fn new(center_x: &[f64], center_t: f64, side: f64, resolution: usize) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(param_err!("cube side must be positive, got {side}"));
        }
        if resolution < 8 {
            return Err(param_err!("cube resolution must be at least 8 points per side"));
        }
        if center_x.is_empty() || center_x.len() > 2 {
            return Err(param_err!("cube centre must have dimension 1 or 2"));
        }
        Ok(Self { center_x: center_x.to_vec(), center_t, side, resolution })
    }

    pub fn dim(&self) -> usize {
        self.center_x.len()
    }

    pub fn time_range(&self) -> (f64, f64) {
        (self.center_t - self.side / 2.0, self.center_t + self.side / 2.0)
    }

    /// Same centre, side multiplied by `k`.
    pub fn dilate(&self, k: f64) -> Self {
        Self { side: self.side * k, ..self.clone() }
    }

    /// Tiling neighbour offset by `k` sides along each of the `d + 1` axes.
    pub fn neighbour(&self, kx: &[i64], kt: i64) -> Self {
        let mut c = self.clone();
        for (x, k) in c.center_x.iter_mut().zip(kx) {
            *x += *k as f64 * self.side;
        }
        c.center_t += kt as f64 * self.side;
        c
    }
}

/// Cell-rule weights: the grid cell `[c − h/2, c + h/2]` of each sample
/// clipped to `[lo, hi]`. Samples need not be uniform.
pub(crate) fn clipped_cells(samples: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let n = samples.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { (samples[i - 1] + samples[i]) / 2.0 };
            let right = if i + 1 == n { f64::INFINITY } else { (samples[i] + samples[i + 1]) / 2.0 };
            (right.min(hi) - left.max(lo)).max(0.0)
        })
        .collect()
}

/// Per-grid-point spatial weight for the slab `|x − c|_∞ ≤ half` (periodic).
pub(crate) fn spatial_weights(grid: &SpatialGrid, center: &[f64], half: f64) -> Vec<f64> {
    let h = grid.spacing();
    let d = grid.dim();
    (0..grid.len())
        .map(|k| {
            let y = grid.position(k);
            let mut w = 1.0;
            for a in 0..d {
                let u = grid.wrap(y[a] - center[a]);
                w *= ((u + h / 2.0).min(half) - (u - h / 2.0).max(-half)).max(0.0);
                if w == 0.0 {
                    break;
                }
            }
            w
        })
        .collect()
}

fn check_coverage(traj: &FieldTrajectory, lo: f64, hi: f64, resolution: usize, side: f64) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (0..traj.times.len()).filter(|&k| traj.times[k] >= lo - 1e-12 && traj.times[k] <= hi + 1e-12).collect();
    idx.sort_by(|&a, &b| traj.times[a].total_cmp(&traj.times[b]));
    let gap = side / resolution as f64 * (1.0 + 1e-9);
    let ts: Vec<f64> = idx.iter().map(|&k| traj.times[k]).collect();
    let ok = !ts.is_empty()
        && ts[0] - lo <= gap
        && hi - ts[ts.len() - 1] <= gap
        && ts.windows(2).all(|w| w[1] - w[0] <= gap);
    if !ok {
        return Err(Error::Resolution(alloc::format!(
            "trajectory samples do not cover [{lo}, {hi}] at {resolution} points per side"
        )));
    }
    Ok(idx)
}

fn check_spatial(grid: &SpatialGrid, cube: &SpaceTimeCube) -> Result<()> {
    if cube.dim() != grid.dim() {
        return Err(param_err!("cube and grid dimensions differ"));
    }
    if grid.spacing() > cube.side / cube.resolution as f64 * (1.0 + 1e-9) {
        return Err(Error::Resolution(alloc::format!(
            "grid spacing {} is coarser than the cube resolution {}",
            grid.spacing(),
            cube.side / cube.resolution as f64
        )));
    }
    Ok(())
}

/// `(∫∫_Q |u|^p dx dt)^{1/p}` by the clipped cell rule.
pub fn lp_spacetime_norm(traj: &FieldTrajectory, p: f64, cube: &SpaceTimeCube) -> Result<f64> {
    lp_of(traj, p, cube, |i, n| traj.fields[i].values[n])
}

/// `‖u₁ u₂‖_{L^p(Q)}` for two trajectories sampled at the same times.
pub fn bilinear_norm(a: &FieldTrajectory, b: &FieldTrajectory, p: f64, cube: &SpaceTimeCube) -> Result<f64> {
    if a.times != b.times || a.grid() != b.grid() {
        return Err(Error::GridMismatch("bilinear factors must share times and grid".into()));
    }
    lp_of(a, p, cube, |i, n| a.fields[i].values[n] * b.fields[i].values[n])
}

fn lp_of(traj: &FieldTrajectory, p: f64, cube: &SpaceTimeCube, value: impl Fn(usize, usize) -> Complex64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(param_err!("exponent p must be at least 1, got {p}"));
    }
    let grid = traj.grid();
    check_spatial(&grid, cube)?;
    let (lo, hi) = cube.time_range();
    let idx = check_coverage(traj, lo, hi, cube.resolution, cube.side)?;
    let ts: Vec<f64> = idx.iter().map(|&k| traj.times[k]).collect();
    let wt = clipped_cells(&ts, lo, hi);
    let ws = spatial_weights(&grid, &cube.center_x, cube.side / 2.0);
    let support: Vec<usize> = (0..ws.len()).filter(|&n| ws[n] > 0.0).collect();
    let mut total = 0.0;
    for (i, &k) in idx.iter().enumerate() {
        if wt[i] == 0.0 {
            continue;
        }
        let s: f64 = support.iter().map(|&n| ws[n] * Float::powf(value(k, n).norm(), p)).sum();
        total += wt[i] * s;
    }
    Ok(Float::powf(total, 1.0 / p))
}

/// Raw tensor weight `Π b(|u_a|)` with `u = (z − z_q)/side` and
/// `b(u) = exp(1 − 1/(1 − u²))`. Spreading the profile over all of `2q`
/// keeps its Fourier tail small, which the cancellation in
/// [`quadrilinear_integral`] depends on.
fn raw_weight(cube: &SpaceTimeCube, x: &[f64], t: f64, wrap: impl Fn(f64) -> f64) -> f64 {
    let mut w = band_profile(Float::abs(t - cube.center_t) / cube.side);
    for a in 0..cube.dim() {
        if w == 0.0 {
            return 0.0;
        }
        w *= band_profile(Float::abs(wrap(x[a] - cube.center_x[a])) / cube.side);
    }
    w
}

/// `χ_q⁴` normalized so that the fourth powers sum to one over the tiling
/// by translates of `cube`. `χ_q ≥ 1/2` on `q` and vanishes outside `2q`.
pub fn cube_weight(cube: &SpaceTimeCube, x: &[f64], t: f64, wrap: impl Fn(f64) -> f64 + Copy) -> f64 {
    let own = raw_weight(cube, x, t, wrap);
    if own == 0.0 {
        return 0.0;
    }
    let d = cube.dim();
    let mut denom = 0.0;
    let offsets: Vec<[i64; 3]> = if d == 1 {
        (-1..=1).flat_map(|a| (-1..=1).map(move |b| [a, 0, b])).collect()
    } else {
        (-1..=1).flat_map(|a| (-1..=1).flat_map(move |c| (-1..=1).map(move |b| [a, c, b]))).collect()
    };
    for o in offsets {
        let nb = cube.neighbour(&o[..d], o[2]);
        denom += Float::powi(raw_weight(&nb, x, t, wrap), 4);
    }
    Float::powi(own, 4) / denom
}

/// `∫∫ χ_q⁴ φ₁ conj(φ₁′) φ₂ conj(φ₂′) dx dt` over `2q`, for factors ordered
/// `[T₁, T₁′, T₂, T₂′]`.
pub fn quadrilinear_integral(quad: [&FieldTrajectory; 4], cube: &SpaceTimeCube) -> Result<Complex64> {
    let grid = quad[0].grid();
    for tr in &quad[1..] {
        if tr.grid() != grid || tr.times != quad[0].times {
            return Err(Error::Resolution("quadrilinear factors must share grid and time samples".into()));
        }
    }
    check_spatial(&grid, cube)?;
    let (lo, hi) = (cube.center_t - cube.side, cube.center_t + cube.side);
    let idx = check_coverage(quad[0], lo, hi, 2 * cube.resolution, 2.0 * cube.side)?;
    let ts: Vec<f64> = idx.iter().map(|&k| quad[0].times[k]).collect();
    let wt = clipped_cells(&ts, lo, hi);
    let ws = spatial_weights(&grid, &cube.center_x, cube.side);
    let support: Vec<usize> = (0..ws.len()).filter(|&n| ws[n] > 0.0).collect();
    let wrap = |u: f64| grid.wrap(u);
    let mut total = Complex64::new(0.0, 0.0);
    for (i, &k) in idx.iter().enumerate() {
        if wt[i] == 0.0 {
            continue;
        }
        let t = ts[i];
        let mut s = Complex64::new(0.0, 0.0);
        for &n in &support {
            let y = grid.position(n);
            let chi = cube_weight(cube, &y[..grid.dim()], t, wrap);
            if chi == 0.0 {
                continue;
            }
            let v = quad[0].fields[k].values[n]
                * quad[1].fields[k].values[n].conj()
                * quad[2].fields[k].values[n]
                * quad[3].fields[k].values[n].conj();
            s += v * (chi * ws[n]);
        }
        total += s * wt[i];
    }
    Ok(total)
}
