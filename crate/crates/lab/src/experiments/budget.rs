use num_rational::Ratio;
use wavepacket_core::symbols::loss_budget;

use crate::config::{ExperimentConfig, ExperimentName, RationalValue};
use crate::error::LabError;
use crate::report::{Bound, Report, Table};

fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let s = cfg.symbol.s.as_ref().unwrap_or(&RationalValue::Int(1)).to_ratio().map_err(|m| LabError::field("symbol.s", m))?;
    let d = cfg.dim() as i64;
    // Default Lebesgue exponent 2(d+3)/(d+1).
    let q = match &cfg.run.q {
        Some(q) => q.to_ratio().map_err(|m| LabError::field("run.q", m))?,
        None => Ratio::new(2 * (d + 3), d + 1),
    };
    let b = loss_budget(s, d, q)?;
    let mut report = Report::new(ExperimentName::Budget);
    let mut table = Table::new("budget", &["s", "d", "q"]);
    let keys = || vec![s.to_string().into(), (d as usize).into(), q.to_string().into()];
    let sf = ratio_f64(s);
    let df = d as f64;
    let qf = ratio_f64(q);
    // Floating-point closed forms, compared against the exact rationals.
    let closed = [
        ("sigma", b.sigma, 2.0 / (3.0 + sf)),
        ("kappa0", b.kappa0, (df - 1.0) / 2.0 - df / qf),
        ("kappa1", b.kappa1, (1.0 - sf) / (2.0 * (3.0 + sf))),
        ("kappa", b.kappa, 2.0 / (3.0 + sf) - 0.5),
        ("interval_count_exponent", b.interval_count_exponent, 4.0 / (3.0 + sf) - 1.0),
        ("wave_bilinear_loss", b.wave_bilinear_loss, 4.0 / (3.0 + sf) * (df - 1.0) / (df + 3.0)),
    ];
    for (name, exact, float) in closed {
        let row = table.push(keys(), name, ratio_f64(exact));
        report.record(name, ratio_f64(exact), "budget", Some(row));
        report.notes.insert(format!("{name}_exact"), serde_json::Value::String(exact.to_string()));
        report.check(&format!("{name}_closed_form"), (ratio_f64(exact) - float).abs(), Bound::AtMost { limit: 1e-15 }, "budget", Some(row));
    }
    report.tables.push(table);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_one_gives_half_and_zero() {
        let mut cfg = ExperimentConfig::new(ExperimentName::Budget);
        cfg.symbol.s = Some(RationalValue::Int(1));
        let r = run(&cfg).unwrap();
        assert_eq!(r.metric("sigma"), Some(0.5));
        assert_eq!(r.metric("kappa1"), Some(0.0));
        assert_eq!(r.notes["kappa_exact"], "0");
        assert!(r.passed());
    }
}
