use num_complex::Complex64;
use wavepacket_core::SpatialField;
use wavepacket_core::estimates::dispersive_fit;
use wavepacket_core::propagate::PropagateOptions;

use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::LabError;
use crate::report::{Bound, Cell, Report, Table};

pub const FREE_TOLERANCE: f64 = 0.05;
pub const PERTURBED_TOLERANCE: f64 = 0.1;

pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let grid = super::grid_or(cfg, 1, 2048.0, 8192)?;
    let sigma = cfg.run.width.unwrap_or(2.0);
    let u0 = SpatialField::from_fn(grid, |y| Complex64::new((-y[0] * y[0] / (2.0 * sigma * sigma)).exp(), 0.0));
    let times = cfg.run.times.clone().unwrap_or_else(|| (0..=8).map(|k| f64::powi(2.0, k)).collect());
    let mut base = cfg.clone();
    base.symbol.cutoff = Some(cfg.symbol.cutoff.unwrap_or(2.0));
    let eps = cfg.symbol.eps.unwrap_or(0.01);
    let mut cases = vec![("free", 0.0)];
    if eps != 0.0 {
        cases.push(("perturbed", eps));
    }
    let mut report = Report::new(ExperimentName::Dispersive);
    let mut decay = Table::new("decay", &["case", "t"]);
    let mut fits = Table::new("fit", &["case"]);
    for (label, e) in cases {
        let mut c = base.clone();
        c.symbol.eps = Some(e);
        c.symbol.metric = None;
        let sym = c.symbol_model(0, 1, grid.half_width())?;
        let fit = dispersive_fit(&sym, &u0, &times, PropagateOptions::default())?;
        for row in &fit.rows {
            let keys = || vec![Cell::from(label), row.t.into()];
            decay.push(keys(), "linf", row.linf);
            decay.push(keys(), "l2", row.l2);
            decay.push(keys(), "ratio", row.ratio);
        }
        let row = fits.push(vec![label.into()], "slope", fit.slope());
        fits.push(vec![label.into()], "slope_stderr", fit.fit.slope_stderr);
        fits.push(vec![label.into()], "norm_drift", fit.meta.norm_drift);
        let tolerance = if e == 0.0 { FREE_TOLERANCE } else { PERTURBED_TOLERANCE };
        match fit.expected {
            Some(target) => {
                report.check(&format!("{label}_slope"), fit.slope(), Bound::Within { target, tolerance }, "fit", Some(row));
            }
            None => report.record(&format!("{label}_slope"), fit.slope(), "fit", Some(row)),
        }
    }
    report.tables.extend([decay, fits]);
    Ok(report)
}
