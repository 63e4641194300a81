use wavepacket_core::estimates::{localization_report, monotone_in_r};
use wavepacket_core::phase_space::PhasePoint;
use wavepacket_core::propagate::{PropagateOptions, WavePacket};

use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::LabError;
use crate::report::{Bound, Cell, Report, Table};

pub const TAIL_TOLERANCE: f64 = 1e-4;
const LABEL_XI: f64 = 0.25;

pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let delta = cfg.delta();
    let mut pcfg = cfg.clone();
    pcfg.symbol.eps = Some(cfg.symbol.eps.unwrap_or(0.01));
    let grid = super::grid_or(cfg, 1, 512.0, 2048)?;
    let sym = pcfg.symbol_model(0, 1, grid.half_width())?;
    let mut report = Report::new(ExperimentName::Localization);
    let mut tails = Table::new("tails", &["r", "t"]);
    let mut tf = Table::new("time_frequency", &["r", "t0"]);
    let mut reports = Vec::new();
    for r in cfg.r_list(&[64.0, 256.0]) {
        let times: Vec<f64> = match &cfg.run.times {
            Some(t) => t.iter().map(|s| s * r).collect(),
            None => (0..=8).map(|k| -r + k as f64 * r / 4.0).collect(),
        };
        let reach = r + 8.0 * r.sqrt();
        let packet = WavePacket::coherent(&sym, PhasePoint::d1(0.0, LABEL_XI), r, &grid, (-reach, reach))?;
        let rep = localization_report(&packet, &sym, r, delta, &times, &[-r / 2.0, 0.0, r / 2.0], PropagateOptions::default())?;
        for row in &rep.rows {
            let keys = || vec![Cell::from(r), row.t.into()];
            tails.push(keys(), "spatial_tail", row.spatial_tail);
            tails.push(keys(), "frequency_tail", row.frequency_tail);
        }
        for row in &rep.time_frequency {
            let keys = || vec![Cell::from(r), row.t0.into()];
            tf.push(keys(), "tail", row.tail);
            tf.push(keys(), "peak_tau", row.peak_tau);
            tf.push(keys(), "expected_tau", row.expected_tau);
            tf.push(keys(), "bin", row.bin);
            tf.push(keys(), "peak_offset_bins", (row.peak_tau - row.expected_tau).abs() / row.bin);
        }
        reports.push(rep);
    }
    let limit = Bound::AtMost { limit: TAIL_TOLERANCE };
    for (q, table, name) in [
        ("spatial_tail", &tails, "max_spatial_tail"),
        ("frequency_tail", &tails, "max_frequency_tail"),
        ("tail", &tf, "max_time_frequency_tail"),
    ] {
        let (row, v) = table.argmax(q).unwrap_or((0, f64::NAN));
        report.check(name, v, limit, &table.name, Some(row));
    }
    let (row, v) = tf.argmax("peak_offset_bins").unwrap_or((0, f64::NAN));
    report.check("max_peak_offset_bins", v, Bound::AtMost { limit: 1.0 }, "time_frequency", Some(row));
    report.notes.insert("tails_monotone_in_r".into(), monotone_in_r(&reports).into());
    report.tables.extend([tails, tf]);
    Ok(report)
}
