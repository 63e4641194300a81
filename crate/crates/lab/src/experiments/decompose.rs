use num_complex::Complex64;
use rand::RngExt;
use wavepacket_core::fbi::localize;
use wavepacket_core::phase_space::{PhaseSpaceRegion, ScaleParams, coherent_state};
use wavepacket_core::propagate::{DecomposeOptions, wavepacket_decompose};
use wavepacket_core::SpatialField;

use super::rng;
use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::LabError;
use crate::report::{Bound, Cell, Report, Table};

pub const REMAINDER_TOLERANCE: f64 = 1e-3;

pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let mut pcfg = cfg.clone();
    pcfg.symbol.eps = Some(cfg.symbol.eps.unwrap_or(0.01));
    let grid = super::grid_or(cfg, 1, 512.0, 2048)?;
    let sym = pcfg.symbol_model(0, 1, grid.half_width())?;
    let nu = cfg.nu_list(&[0.5])[0];
    let mut report = Report::new(ExperimentName::Decompose);
    let mut table = Table::new("remainder", &["r", "t"]);
    let mut packets = Table::new("packets", &["r"]);
    let mut worst: Option<(usize, f64)> = None;
    for (ri, r) in cfg.r_list(&[256.0]).into_iter().enumerate() {
        let params = ScaleParams::new(r, nu, cfg.delta0(), cfg.delta())?;
        let s = r.sqrt();
        let region = PhaseSpaceRegion::ball(&[0.0], 2.0 * s, &[0.0], 0.5)?;
        // Random superposition of coherent states, then cut to the region.
        let mut g = rng(cfg.seed, ri as u64);
        let mut raw = SpatialField::zeros(grid);
        for _ in 0..cfg.run.samples.unwrap_or(6) {
            let x = g.random_range(-2.0 * s..2.0 * s);
            let xi = g.random_range(-0.4..0.4);
            let c = Complex64::from_polar(g.random_range(0.5..1.0), g.random_range(0.0..std::f64::consts::TAU));
            let (f, _) = coherent_state(&[x], &[xi], r, &grid)?;
            raw.axpy(c, &f)?;
        }
        let u0 = localize(&raw, &region, r)?.field;
        let times: Vec<f64> = match &cfg.run.times {
            Some(t) => t.iter().map(|v| v * r).collect(),
            None => (0..=8).map(|k| -r + k as f64 * r / 4.0).collect(),
        };
        let dec = wavepacket_decompose(&u0, &sym, r, &region, &params, &times, DecomposeOptions::default())?;
        let norm = u0.norm_l2();
        for (&t, l2) in times.iter().zip(&dec.remainder_l2) {
            let row = table.push(vec![Cell::from(r), t.into()], "relative_remainder", l2 / norm);
            if worst.is_none_or(|(_, w)| l2 / norm > w) {
                worst = Some((row, l2 / norm));
            }
        }
        let keys = || vec![Cell::from(r)];
        packets.push(keys(), "kept", dec.packets.len() as f64);
        packets.push(keys(), "dropped", dec.dropped as f64);
        packets.push(keys(), "alpha_sq_over_data", dec.alpha_sq_sum / dec.data_norm_sq);
    }
    let (row, v) = worst.unwrap_or((0, f64::NAN));
    report.check("max_relative_remainder", v, Bound::AtMost { limit: REMAINDER_TOLERANCE }, "remainder", Some(row));
    report.tables.extend([table, packets]);
    Ok(report)
}
