use wavepacket_core::estimates::energy_shell_sample;
use wavepacket_core::estimates::FrequencyGrid;
use wavepacket_core::flow::{FlowOptions, integrate_two_sided};
use wavepacket_core::phase_space::PhasePoint;
use wavepacket_core::symbols::{MetricField, make_schrodinger};
use wavepacket_core::tubes::{
    Buckets, CellId, CubeGrid, Family, Tube, double_end_count, focusing_relation, incidences, pigeonhole_buckets,
};

use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::LabError;
use crate::report::{Bound, Cell, Report, Table};

pub const MAX_SHELL_TUBES: f64 = 2.0;
pub const EXTENT_FACTOR: f64 = 2.0;
/// Frequency of the family-one packet at the base cube.
const XI1: f64 = 0.25;
/// Time after `t_q` at which `T₂` crosses the zero-shell tube, in units of `R/√2`.
const CROSSING: f64 = 0.7;

pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let big_r = cfg.r_list(&[256.0])[0];
    let delta = cfg.delta();
    let nus = cfg.nu_list(&[1.0, 0.5, 0.25]);
    let sym = make_schrodinger(MetricField::scaled_identity(1, 1.0)?)?;
    let grid = CubeGrid::new(1, big_r, delta, &[0.0], 0.0)?;
    let radius = big_r.powf(0.5 + delta);
    let half = big_r / 2.0;
    let q: CellId = [1, 0, 0];
    let c = grid.center(&q);
    let step = (big_r.sqrt() / 32.0).min(0.5);
    let shell_grid = FrequencyGrid::new(1, -1.0, 1.0, 33)?;
    let tol = big_r.powf(-0.5 + delta);

    let mut report = Report::new(ExperimentName::Tubes);
    let mut counts = Table::new("double_end", &["nu"]);
    let mut per_cell = Table::new("per_cell", &["nu", "x_cell", "t_cell"]);
    let mut buckets_t = Table::new("buckets", &["nu", "lambda1", "mu1", "mu2"]);
    let mut focusing = Table::new("focusing", &["nu"]);
    let transverse = nus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut extent_rows = Vec::new();
    for &nu in &nus {
        // Shell tubes through q for T₁ at frequency ξ₁ and T₂′ at ξ₁ − ν.
        let shell = energy_shell_sample(&sym, &sym, (&[c[0]], c[2]), &[XI1], &[XI1 - nu], tol, &shell_grid)?;
        let mut tubes = Vec::with_capacity(shell.len() + 1);
        for eta in &shell {
            let start = PhasePoint::new(&[c[0]], eta)?;
            let b = integrate_two_sided(&sym, &start, c[2], -half, half, step, &FlowOptions::unchecked())?;
            tubes.push(Tube::new(b, (-half, half), radius, Family::One)?);
        }
        let t_star = c[2] + CROSSING * half * std::f64::consts::SQRT_2;
        let x_star = c[0] + 2.0 * XI1 * (t_star - c[2]);
        let start = PhasePoint::d1(x_star, XI1 - nu);
        let b = integrate_two_sided(&sym, &start, t_star, -half, half, step, &FlowOptions::unchecked())?;
        tubes.push(Tube::new(b, (-half, half), radius, Family::Two)?);
        let inc = incidences(&tubes, &grid)?;
        let shell_idx: Vec<usize> = (0..shell.len()).collect();
        let d = double_end_count(&q, &shell_idx, shell.len(), &inc, &grid, nu)?;

        let keys = || vec![Cell::from(nu)];
        counts.push(keys(), "shell_tubes", shell.len() as f64);
        counts.push(keys(), "total_cells", d.total as f64);
        let max_row = counts.push(keys(), "max_per_cell", d.max_per_cell as f64);
        counts.push(keys(), "time_extent", d.time_extent);
        counts.push(keys(), "predicted_extent", d.predicted_extent);
        let ratio_row = counts.push(keys(), "extent_over_predicted", d.time_extent / d.predicted_extent);
        report.record(&format!("extent_over_predicted_nu{nu}"), d.time_extent / d.predicted_extent, "double_end", Some(ratio_row));
        for (cell, n) in &d.per_cell {
            per_cell.push(vec![Cell::from(nu), cell[0].into(), cell[2].into()], "shell_tubes", *n as f64);
        }
        if nu == transverse {
            report.check("max_shell_tubes_transverse", d.max_per_cell as f64, Bound::AtMost { limit: MAX_SHELL_TUBES }, "double_end", Some(max_row));
        } else {
            report.record(&format!("max_shell_tubes_nu{nu}"), d.max_per_cell as f64, "double_end", Some(max_row));
        }
        extent_rows.push((nu, ratio_row, d.time_extent));

        let b: Buckets = pigeonhole_buckets(&inc);
        for (l, a, m, k) in b.histogram() {
            buckets_t.push(vec![Cell::from(nu), (l as i64).into(), (a as i64).into(), (m as i64).into()], "tubes", k as f64);
        }
        let rel = focusing_relation(&b, &inc, &grid);
        focusing.push(keys(), "triples", b.triples() as f64);
        focusing.push(keys(), "triple_bound", Buckets::triple_bound(1, big_r));
        let fr = focusing.push(keys(), "max_related", rel.max_count() as f64);
        focusing.push(keys(), "bound", rel.bound(1) as f64);
        report.check(&format!("focusing_nu{nu}"), rel.max_count() as f64, Bound::AtMost { limit: rel.bound(1) as f64 }, "focusing", Some(fr));
    }
    // ν·extent relative to the transverse pair; ν^{-1} scaling keeps it at 1.
    let base = extent_rows.iter().find(|r| r.0 == transverse).map(|r| r.0 * r.2);
    for (nu, _, extent) in extent_rows {
        let scaled = base.map_or(f64::NAN, |b| nu * extent / b);
        let row = counts.push(vec![Cell::from(nu)], "scaled_extent", scaled);
        report.check(
            &format!("extent_scaling_nu{nu}"),
            scaled,
            Bound::Between { lo: 1.0 / EXTENT_FACTOR, hi: EXTENT_FACTOR },
            "double_end",
            Some(row),
        );
    }
    report.tables.extend([counts, per_cell, buckets_t, focusing]);
    Ok(report)
}
