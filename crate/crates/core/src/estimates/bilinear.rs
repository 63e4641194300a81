//! Bilinear `L^p` sweeps over cube size and frequency separation.

use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result, param_err};
use crate::fit::{LineFit, log_log};
use crate::grid::{SpatialField, SpatialGrid};
use crate::par::par_map;
use crate::phase_space::coherent_state;
use crate::propagate::{PropagateOptions, Propagator};
use crate::symbols::SymbolModel;

use super::norms::{clipped_cells, spatial_weights};

/// Two Gaussians of spatial width `width` at the origin with frequencies
/// `center ± ν/2` along the first axis.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BilinearOptions {
    pub width: f64,
    pub center: f64,
    /// Exponent; `None` selects `(d+3)/(d+1)`.
    pub p: Option<f64>,
    /// Largest time step of the quadrature.
    pub time_step: f64,
    /// Spatial grid spacing.
    pub spacing: f64,
    /// Ratio of the periodic box width to the cube side.
    pub box_factor: f64,
    pub propagate: PropagateOptions,
}

impl Default for BilinearOptions {
    fn default() -> Self {
        Self { width: 10.0, center: 0.0, p: None, time_step: 0.5, spacing: 0.5, box_factor: 2.0, propagate: PropagateOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BilinearRow {
    pub big_r: f64,
    pub nu: f64,
    pub norm: f64,
    /// `norm` divided by the `ν = 1` entry at the same `R`, when present.
    pub normalized: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilinearSweep {
    pub p: f64,
    pub rows: Vec<BilinearRow>,
    /// `(R, fit of log B against log ν)`.
    pub nu_fits: Vec<(f64, LineFit)>,
    /// `(ν, fit of log B against log R)`.
    pub r_fits: Vec<(f64, LineFit)>,
    /// `−2/(d+3)`.
    pub expected_nu_slope: f64,
}

/// `B(R, ν) = ‖u₁ u₂‖_{L^p(Q_R)}` on the cube of side `R` centred at the origin,
/// for every pair in `r_list × nu_list`, with log-log fits along both axes.
pub fn bilinear_sweep(
    sym1: &SymbolModel,
    sym2: &SymbolModel,
    r_list: &[f64],
    nu_list: &[f64],
    opts: &BilinearOptions,
) -> Result<BilinearSweep> {
    if r_list.len() < 3 || nu_list.len() < 3 {
        return Err(Error::Fit("bilinear sweep needs at least 3 values of R and of nu".into()));
    }
    let d = sym1.dim();
    if sym2.dim() != d {
        return Err(param_err!("symbols must share a dimension"));
    }
    let p = opts.p.unwrap_or((d as f64 + 3.0) / (d as f64 + 1.0));
    let cells: Vec<(f64, f64)> = r_list.iter().flat_map(|&r| nu_list.iter().map(move |&nu| (r, nu))).collect();
    let norms = par_map(&cells, |&(r, nu)| bilinear_cell(sym1, sym2, r, nu, p, opts));
    let mut rows = Vec::with_capacity(cells.len());
    for (&(big_r, nu), n) in cells.iter().zip(norms) {
        rows.push(BilinearRow { big_r, nu, norm: n?, normalized: None });
    }
    for i in 0..rows.len() {
        let anchor = rows.iter().find(|a| a.big_r == rows[i].big_r && a.nu == 1.0).map(|a| a.norm);
        rows[i].normalized = anchor.map(|a| rows[i].norm / a);
    }
    let fit_along = |fixed: &dyn Fn(&BilinearRow) -> bool, axis: &dyn Fn(&BilinearRow) -> f64| -> Result<LineFit> {
        let sel: Vec<&BilinearRow> = rows.iter().filter(|r| fixed(r)).collect();
        let xs: Vec<f64> = sel.iter().map(|r| axis(r)).collect();
        let ys: Vec<f64> = sel.iter().map(|r| r.norm).collect();
        log_log(&xs, &ys)
    };
    let mut nu_fits = Vec::new();
    for &r in r_list {
        nu_fits.push((r, fit_along(&|row| row.big_r == r, &|row| row.nu)?));
    }
    let mut r_fits = Vec::new();
    for &nu in nu_list {
        r_fits.push((nu, fit_along(&|row| row.nu == nu, &|row| row.big_r)?));
    }
    Ok(BilinearSweep { p, rows, nu_fits, r_fits, expected_nu_slope: -2.0 / (d as f64 + 3.0) })
}

fn packet(grid: &SpatialGrid, xi: f64, width: f64) -> Result<SpatialField> {
    let d = grid.dim();
    let x = alloc::vec![0.0; d];
    let mut k = alloc::vec![0.0; d];
    k[0] = xi;
    Ok(coherent_state(&x, &k, width * width, grid)?.0.normalized())
}

/// One sweep cell, accumulated chunk by chunk so long time ranges never
/// hold a full trajectory in memory.
pub fn bilinear_cell(sym1: &SymbolModel, sym2: &SymbolModel, big_r: f64, nu: f64, p: f64, opts: &BilinearOptions) -> Result<f64> {
    if !(big_r > 0.0 && nu > 0.0 && p >= 1.0) {
        return Err(param_err!("need R > 0, nu > 0 and p >= 1"));
    }
    let d = sym1.dim();
    let half = opts.box_factor * big_r / 2.0;
    let n = Float::ceil(2.0 * half / opts.spacing) as usize;
    let grid = SpatialGrid::new(d, half, n.next_power_of_two().max(64))?;
    let u1 = packet(&grid, opts.center + nu / 2.0, opts.width)?;
    let u2 = packet(&grid, opts.center - nu / 2.0, opts.width)?;
    let prop1 = Propagator::new(sym1, grid, opts.propagate)?;
    let prop2 = Propagator::new(sym2, grid, opts.propagate)?;

    let steps = Float::ceil(big_r / opts.time_step) as usize;
    let times: Vec<f64> = (0..=steps).map(|k| -big_r / 2.0 + big_r * k as f64 / steps as f64).collect();
    let wt = clipped_cells(&times, -big_r / 2.0, big_r / 2.0);
    let center = alloc::vec![0.0; d];
    let ws = spatial_weights(&grid, &center, big_r / 2.0);
    let support: Vec<usize> = (0..ws.len()).filter(|&k| ws[k] > 0.0).collect();

    const CHUNK: usize = 128;
    let mut total = 0.0;
    for forward in [true, false] {
        let mut idx: Vec<usize> = (0..times.len()).filter(|&k| if forward { times[k] >= 0.0 } else { times[k] < 0.0 }).collect();
        if !forward {
            idx.reverse();
        }
        let (mut a, mut b, mut t) = (u1.clone(), u2.clone(), 0.0);
        for chunk in idx.chunks(CHUNK) {
            let ts: Vec<f64> = chunk.iter().map(|&k| times[k]).collect();
            let ta = prop1.evolve(&a, t, &ts)?;
            let tb = prop2.evolve(&b, t, &ts)?;
            for (i, &k) in chunk.iter().enumerate() {
                let s: f64 = support
                    .iter()
                    .map(|&m| ws[m] * Float::powf((ta.fields[i].values[m] * tb.fields[i].values[m]).norm(), p))
                    .sum();
                total += wt[k] * s;
            }
            t = *ts.last().unwrap();
            a = ta.fields.last().unwrap().clone();
            b = tb.fields.last().unwrap().clone();
        }
    }
    Ok(Float::powf(total, 1.0 / p))
}

/// Whole-line value `E[1/(2|ξ₁ − ξ₂|)]^{1/2}` of `‖u₁u₂‖_{L²(ℝ²)}` for the
/// free 1-D Schrödinger flow, from the two frequency densities.
pub fn free_bilinear_l2(u1: &SpatialField, u2: &SpatialField) -> f64 {
    let g = u1.grid;
    let density = |f: &SpatialField| -> Vec<f64> {
        let s: Vec<Complex64> = f.spectrum();
        let tot: f64 = s.iter().map(|c| c.norm_sqr()).sum();
        s.iter().map(|c| c.norm_sqr() / tot).collect()
    };
    let (p1, p2) = (density(u1), density(u2));
    let mut acc = 0.0;
    for (i, a) in p1.iter().enumerate().filter(|(_, a)| **a > 1e-18) {
        for (j, b) in p2.iter().enumerate().filter(|(_, b)| **b > 1e-18) {
            let gap = Float::abs(g.wavenumber(i) - g.wavenumber(j));
            if gap > 0.0 {
                acc += a * b / (2.0 * gap);
            }
        }
    }
    Float::sqrt(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{MetricField, make_schrodinger};

    #[test]
    fn paraboloid_sweep() {
        let p = make_schrodinger(MetricField::scaled_identity(1, 1.0).unwrap()).unwrap();
        let opts = BilinearOptions::default();
        let nus = [0.5, core::f64::consts::FRAC_1_SQRT_2, 1.0];
        let rs = [64.0, 256.0, 1024.0];
        let s = bilinear_sweep(&p, &p, &rs, &nus, &opts).unwrap();
        assert_eq!(s.p, 2.0);
        assert_eq!(s.expected_nu_slope, -0.5);
        for (_, f) in &s.nu_fits {
            assert!((f.slope + 0.5).abs() < 0.15, "nu slope {}", f.slope);
        }
        for (_, f) in &s.r_fits {
            assert!(f.slope <= 0.1, "R slope {}", f.slope);
        }
        for row in s.rows.iter().filter(|r| r.nu == 1.0) {
            assert_eq!(row.normalized, Some(1.0));
        }
        // Largest cube against the whole-space value.
        let grid = SpatialGrid::new(1, 1024.0, 4096).unwrap();
        for row in s.rows.iter().filter(|r| r.big_r == 1024.0) {
            let u1 = packet(&grid, row.nu / 2.0, opts.width).unwrap();
            let u2 = packet(&grid, -row.nu / 2.0, opts.width).unwrap();
            let want = free_bilinear_l2(&u1, &u2);
            assert!((row.norm / want - 1.0).abs() < 0.02, "{} vs {}", row.norm, want);
        }
        assert!(matches!(bilinear_sweep(&p, &p, &rs[..2], &nus, &opts), Err(Error::Fit(_))));
    }
}
