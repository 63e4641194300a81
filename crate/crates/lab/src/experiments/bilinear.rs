use wavepacket_core::estimates::{BilinearOptions, bilinear_sweep};
use wavepacket_core::symbols::{MetricField, make_schrodinger};

use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::LabError;
use crate::report::{Bound, Cell, Report, Table};

pub const NU_SLOPE_TOLERANCE: f64 = 0.15;
pub const MAX_R_SLOPE: f64 = 0.1;

pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let sym1 = make_schrodinger(MetricField::scaled_identity(1, cfg.speed(0))?)?;
    let sym2 = make_schrodinger(MetricField::scaled_identity(1, cfg.speed(1))?)?;
    let mut opts = BilinearOptions { p: cfg.run.p, ..BilinearOptions::default() };
    if let Some(w) = cfg.run.width {
        opts.width = w;
    }
    let rs = cfg.r_list(&[64.0, 256.0, 1024.0]);
    let nus = cfg.nu_list(&[1.0, 0.5, 0.25]);
    let sweep = bilinear_sweep(&sym1, &sym2, &rs, &nus, &opts)?;
    let mut report = Report::new(ExperimentName::Bilinear);
    let mut cells = Table::new("cells", &["big_r", "nu"]);
    for row in &sweep.rows {
        let keys = || vec![Cell::from(row.big_r), row.nu.into()];
        cells.push(keys(), "norm", row.norm);
        if let Some(n) = row.normalized {
            cells.push(keys(), "normalized", n);
        }
    }
    let mut fits = Table::new("fits", &["axis", "fixed"]);
    let target = sweep.expected_nu_slope;
    for (r, f) in &sweep.nu_fits {
        let row = fits.push(vec!["nu".into(), (*r).into()], "slope", f.slope);
        fits.push(vec!["nu".into(), (*r).into()], "slope_stderr", f.slope_stderr);
        report.check(&format!("nu_slope_r{r}"), f.slope, Bound::Within { target, tolerance: NU_SLOPE_TOLERANCE }, "fits", Some(row));
    }
    for (nu, f) in &sweep.r_fits {
        let row = fits.push(vec!["big_r".into(), (*nu).into()], "slope", f.slope);
        fits.push(vec!["big_r".into(), (*nu).into()], "slope_stderr", f.slope_stderr);
        report.check(&format!("r_slope_nu{nu}"), f.slope, Bound::AtMost { limit: MAX_R_SLOPE }, "fits", Some(row));
    }
    report.notes.insert("p".into(), sweep.p.into());
    report.notes.insert("expected_nu_slope".into(), target.into());
    report.tables.extend([cells, fits]);
    Ok(report)
}
