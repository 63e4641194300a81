use num_complex::Complex64;
use rand::RngExt;
use wavepacket_core::fbi::{PhaseSpaceGrid, fbi_adjoint, fbi_forward};
use wavepacket_core::grid::Spectral;
use wavepacket_core::{SpatialField, SpatialGrid};

use super::rng;
use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::LabError;
use crate::report::{Bound, Report, Table};

pub const TOLERANCE: f64 = 1e-6;

/// Uniform random spectrum on `|ζ| ≤ kmax`.
pub fn band_limited(grid: SpatialGrid, kmax: f64, rng: &mut impl RngExt) -> Result<SpatialField, LabError> {
    let sp = Spectral::new(grid)?;
    let c: Vec<Complex64> = (0..grid.len())
        .map(|k| {
            let z = grid.frequency(k);
            let a = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            if z[0].hypot(z[1]) <= kmax { a } else { Complex64::new(0.0, 0.0) }
        })
        .collect();
    Ok(SpatialField::from_values(grid, sp.inverse(&c))?)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let samples = cfg.run.samples.unwrap_or(20);
    let mut report = Report::new(ExperimentName::Isometry);
    let mut table = Table::new("isometry", &["big_r", "sample"]);
    let mut frame = Table::new("frame", &["big_r"]);
    for (ri, &big_r) in cfg.r_list(&[16.0, 64.0, 256.0]).iter().enumerate() {
        // √R ≤ L/8 keeps the periodised window negligible at the box edge.
        let half = (8.0 * big_r.sqrt()).max(32.0);
        let grid = super::grid_or(cfg, 1, half, (4.0 * half).ceil().max(64.0) as usize)?;
        let grid = if grid.points().is_power_of_two() { grid } else { SpatialGrid::new(1, half, grid.points().next_power_of_two())? };
        let ps = PhaseSpaceGrid::new(grid, big_r)?;
        frame.push(vec![big_r.into()], "frame_deviation", ps.frame_deviation());
        let mut r = rng(cfg.seed, ri as u64);
        for s in 0..samples {
            let f = band_limited(grid, grid.nyquist() / 4.0, &mut r)?;
            let big_f = fbi_forward(&f, &ps)?;
            let back = fbi_adjoint(&big_f, &grid)?;
            let keys = || vec![big_r.into(), s.into()];
            table.push(keys(), "norm_deviation", (big_f.norm_l2() / f.norm_l2() - 1.0).abs());
            table.push(keys(), "reconstruction_error", back.rel_diff(&f)?);
        }
    }
    let (row, v) = table.argmax("norm_deviation").unwrap_or((0, f64::NAN));
    report.check("max_norm_deviation", v, Bound::AtMost { limit: TOLERANCE }, "isometry", Some(row));
    let (row, v) = table.argmax("reconstruction_error").unwrap_or((0, f64::NAN));
    report.check("max_reconstruction_error", v, Bound::AtMost { limit: TOLERANCE }, "isometry", Some(row));
    report.tables.push(table);
    report.tables.push(frame);
    Ok(report)
}
