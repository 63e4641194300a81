use rand::RngExt;
use wavepacket_core::estimates::{SpaceTimeCube, conservation_flags, quadrilinear_integral};
use wavepacket_core::phase_space::PhasePoint;
use wavepacket_core::propagate::{FieldTrajectory, PropagateOptions, WavePacket, propagate_reference};
use wavepacket_core::symbols::{FrequencyCutoff, MetricField, SymbolModel, make_schrodinger};
use wavepacket_core::SpatialGrid;

use super::rng;
use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::LabError;
use crate::report::{Bound, Cell, Report, Table};

pub const MIN_MEDIAN_RATIO: f64 = 1e3;
/// Momentum offset of violating quadruples, in units of `1/√R`.
const VIOLATION_OFFSET: f64 = 32.0;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct Evolved {
    packet: WavePacket,
    traj: FieldTrajectory,
}

fn evolve(sym: &SymbolModel, grid: &SpatialGrid, x: f64, xi: f64, big_r: f64, times: &[f64]) -> Result<Evolved, LabError> {
    let side = big_r.sqrt();
    let packet = WavePacket::coherent(sym, PhasePoint::d1(x, xi), big_r, grid, (-side, side))?;
    let traj = propagate_reference(sym, &packet.initial, 0.0, times, PropagateOptions::default())?;
    Ok(Evolved { packet, traj })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let big_r = cfg.r_list(&[256.0])[0];
    let delta = cfg.delta();
    let side = big_r.sqrt();
    let grid = super::grid_or(cfg, 1, 256.0, 1024)?;
    let cutoff = cfg.symbol.cutoff.unwrap_or(3.0);
    let sym = make_schrodinger(MetricField::scaled_identity(1, 1.0)?)?.with_cutoff(FrequencyCutoff::Ball { radius: cutoff });
    let cube = SpaceTimeCube::new(&[0.0], 0.0, side, 8)?;
    let times: Vec<f64> = (0..=32).map(|k| -side + k as f64 * side / 16.0).collect();
    let n = cfg.run.samples.unwrap_or(50);
    let mut g = rng(cfg.seed, 0);
    let mut table = Table::new("quadruples", &["index", "kind"]);
    let mut conserving = Vec::new();
    let mut violating = Vec::new();
    let mut mismatches = 0usize;
    for i in 0..n {
        let keep = i % 2 == 0;
        let (x1, x2) = (g.random_range(-side / 4.0..side / 4.0), g.random_range(-side / 4.0..side / 4.0));
        let (xi1, xi2) = (g.random_range(-0.5..0.5), g.random_range(-0.5..0.5));
        let shift = (g.random_range(-side / 4.0..side / 4.0), g.random_range(-side / 4.0..side / 4.0));
        let sign = if g.random::<bool>() { 1.0 } else { -1.0 };
        let t1 = evolve(&sym, &grid, x1, xi1, big_r, &times)?;
        let t2 = evolve(&sym, &grid, x2, xi2, big_r, &times)?;
        let t2p = evolve(&sym, &grid, x2 + shift.1, xi2, big_r, &times)?;
        // Conserving: equal frequencies with displaced centres. Violating: T1' off by 32/√R.
        let xi1p = if keep { xi1 } else { xi1 + sign * VIOLATION_OFFSET / side };
        let t1p = evolve(&sym, &grid, x1 + shift.0, xi1p, big_r, &times)?;
        let value = quadrilinear_integral([&t1.traj, &t1p.traj, &t2.traj, &t2p.traj], &cube)?.norm();
        let flags = conservation_flags(&sym, &sym, [&t1.packet, &t1p.packet, &t2.packet, &t2p.packet], &cube, big_r, delta)?;
        if flags.all() != keep {
            mismatches += 1;
        }
        let kind = if keep { "conserving" } else { "violating" };
        let keys = || vec![Cell::from(i), kind.into()];
        table.push(keys(), "abs_integral", value);
        table.push(keys(), "momentum_defect", flags.momentum_defect);
        table.push(keys(), "energy_defect", flags.energy_defect);
        table.push(keys(), "position_spread", flags.position_spread);
        if keep {
            conserving.push(value);
        } else {
            violating.push(value);
        }
    }
    let mut report = Report::new(ExperimentName::Conservation);
    let mc = median(&mut conserving);
    let mv = median(&mut violating);
    let mut summary = Table::new("medians", &["kind"]);
    let rc = summary.push(vec!["conserving".into()], "median_abs_integral", mc);
    let rv = summary.push(vec!["violating".into()], "median_abs_integral", mv);
    report.record("median_conserving", mc, "medians", Some(rc));
    report.record("median_violating", mv, "medians", Some(rv));
    let rr = summary.push(vec!["ratio".into()], "median_ratio", mc / mv);
    report.check("median_ratio", mc / mv, Bound::AtLeast { limit: MIN_MEDIAN_RATIO }, "medians", Some(rr));
    let rm = summary.push(vec!["flags".into()], "classification_mismatches", mismatches as f64);
    report.check("flag_mismatches", mismatches as f64, Bound::AtMost { limit: 0.0 }, "medians", Some(rm));
    report.tables.extend([table, summary]);
    Ok(report)
}
