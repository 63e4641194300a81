//! In-memory reports and the on-disk bundle layout.
//!
//! A bundle directory holds one long-format CSV per table, `summary.json`,
//! `plot.gp` and `config.toml` (the manifest bytes exactly as read).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::LabError;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Long-format table: key columns, then `quantity,value`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub keys: Vec<String>,
    pub rows: Vec<(Vec<Cell>, String, f64)>,
}

impl Table {
    pub fn new(name: &str, keys: &[&str]) -> Self {
        Self { name: name.to_owned(), keys: keys.iter().map(|k| (*k).to_owned()).collect(), rows: Vec::new() }
    }

    /// Appends a row and returns its index among the data rows.
    pub fn push(&mut self, keys: Vec<Cell>, quantity: &str, value: f64) -> usize {
        debug_assert_eq!(keys.len(), self.keys.len());
        self.rows.push((keys, quantity.to_owned(), value));
        self.rows.len() - 1
    }

    /// Every value recorded under `quantity`, in row order.
    pub fn values(&self, quantity: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.1 == quantity).map(|r| r.2).collect()
    }

    /// Index and value of the row where `quantity` is largest.
    pub fn argmax(&self, quantity: &str) -> Option<(usize, f64)> {
        self.pick(quantity, |a, b| a > b)
    }

    pub fn argmin(&self, quantity: &str) -> Option<(usize, f64)> {
        self.pick(quantity, |a, b| a < b)
    }

    fn pick(&self, quantity: &str, better: impl Fn(f64, f64) -> bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in self.rows.iter().enumerate() {
            if r.1 == quantity && best.is_none_or(|(_, b)| better(r.2, b) || b.is_nan()) {
                best = Some((i, r.2));
            }
        }
        best
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), LabError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.keys.clone();
        header.push("quantity".into());
        header.push("value".into());
        w.write_record(&header)?;
        for (keys, q, v) in &self.rows {
            let mut rec: Vec<String> = keys.iter().map(|c| c.to_string()).collect();
            rec.push(q.clone());
            rec.push(format!("{v:e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    AtMost { limit: f64 },
    AtLeast { limit: f64 },
    Within { target: f64, tolerance: f64 },
    Between { lo: f64, hi: f64 },
}

impl Bound {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost { limit } => v <= limit,
            Bound::AtLeast { limit } => v >= limit,
            Bound::Within { target, tolerance } => (v - target).abs() <= tolerance,
            Bound::Between { lo, hi } => v >= lo && v <= hi,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtMost { limit } => write!(f, "<= {limit:e}"),
            Bound::AtLeast { limit } => write!(f, ">= {limit:e}"),
            Bound::Within { target, tolerance } => write!(f, "{target} +/- {tolerance}"),
            Bound::Between { lo, hi } => write!(f, "in [{lo}, {hi}]"),
        }
    }
}

/// A pass/fail judgement on one value that lives in a CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub pass: bool,
    pub table: String,
    pub row: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub value: f64,
    pub table: String,
    pub row: Option<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub experiment: Option<ExperimentName>,
    pub tables: Vec<Table>,
    pub metrics: BTreeMap<String, Metric>,
    pub checks: Vec<Check>,
    /// Extra summary entries that are not plain numbers, such as exact rationals.
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl Report {
    pub fn new(experiment: ExperimentName) -> Self {
        Self { experiment: Some(experiment), ..Self::default() }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).map(|m| m.value)
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn record(&mut self, name: &str, value: f64, table: &str, row: Option<usize>) {
        self.metrics.insert(name.to_owned(), Metric { value, table: table.to_owned(), row });
    }

    /// Records `value` as a metric and judges it.
    pub fn check(&mut self, name: &str, value: f64, bound: Bound, table: &str, row: Option<usize>) -> bool {
        self.record(name, value, table, row);
        let pass = bound.holds(value);
        self.checks.push(Check { name: name.to_owned(), value, bound, pass, table: table.to_owned(), row });
        pass
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary_json(&self, cfg: &ExperimentConfig, runtime_seconds: f64) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment,
            "seed": cfg.seed,
            "pass": self.passed(),
            "runtime_seconds": runtime_seconds,
            "metrics": self.metrics,
            "checks": self.checks,
            "notes": self.notes,
            "tables": self.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>(),
            "config_echo": cfg.source,
            "overrides": cfg.overrides,
        })
    }

    /// Gnuplot script plotting every quantity of every table against its first key.
    pub fn gnuplot_script(&self) -> String {
        let mut s = String::from("set datafile separator ','\nset key outside\nset terminal pngcairo size 900,600\n");
        for t in &self.tables {
            let ncol = t.keys.len() + 2;
            let mut quantities: Vec<&str> = Vec::new();
            for r in &t.rows {
                if !quantities.contains(&r.1.as_str()) {
                    quantities.push(&r.1);
                }
            }
            s.push_str(&format!("\nset output '{}.png'\nset xlabel '{}'\n", t.name, t.keys.first().map_or("row", String::as_str)));
            let plots: Vec<String> = quantities
                .iter()
                .map(|q| {
                    format!(
                        "'{}.csv' skip 1 using 1:(strcol({}) eq '{}' ? ${} : NaN) with linespoints title '{}'",
                        t.name,
                        ncol - 1,
                        q,
                        ncol,
                        q
                    )
                })
                .collect();
            if !plots.is_empty() {
                s.push_str("plot ");
                s.push_str(&plots.join(", \\\n     "));
                s.push('\n');
            }
        }
        s
    }
}

/// What to do when the bundle directory already exists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum OnExists {
    #[default]
    Overwrite,
    /// Write to `<name>.2`, `<name>.3`, ... instead.
    Version,
}

#[derive(Clone, Debug)]
pub struct ReportBundle {
    pub dir: PathBuf,
    pub report: Report,
    pub summary: serde_json::Value,
}

impl ReportBundle {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

fn bundle_dir(root: &Path, name: &str, on_exists: OnExists) -> PathBuf {
    let base = root.join(name);
    match on_exists {
        OnExists::Overwrite => base,
        OnExists::Version => {
            if !base.exists() {
                return base;
            }
            (2..).map(|k| root.join(format!("{name}.{k}"))).find(|p| !p.exists()).unwrap()
        }
    }
}

/// Writes the bundle under `<root>/<experiment>`.
pub fn write_bundle(
    root: &Path,
    cfg: &ExperimentConfig,
    report: Report,
    runtime_seconds: f64,
    on_exists: OnExists,
) -> Result<ReportBundle, LabError> {
    let dir = bundle_dir(root, cfg.experiment.as_str(), on_exists);
    if dir.exists() {
        for e in fs::read_dir(&dir)? {
            let p = e?.path();
            if p.is_file() {
                fs::remove_file(p)?;
            }
        }
    }
    fs::create_dir_all(&dir)?;
    for t in &report.tables {
        t.write_csv(&dir.join(format!("{}.csv", t.name)))?;
    }
    let summary = report.summary_json(cfg, runtime_seconds);
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    fs::write(dir.join("plot.gp"), report.gnuplot_script())?;
    if let Some(src) = &cfg.source {
        fs::write(dir.join("config.toml"), src)?;
    }
    Ok(ReportBundle { dir, report, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert!(Bound::AtMost { limit: 1.0 }.holds(1.0));
        assert!(!Bound::AtLeast { limit: 1.0 }.holds(0.5));
        assert!(Bound::Within { target: -0.5, tolerance: 0.1 }.holds(-0.45));
        assert!(!Bound::Between { lo: 12.0, hi: 20.0 }.holds(f64::NAN));
    }

    #[test]
    fn argmax_and_checks() {
        let mut t = Table::new("t", &["k"]);
        t.push(vec![1usize.into()], "a", 0.5);
        t.push(vec![2usize.into()], "b", 9.0);
        t.push(vec![3usize.into()], "a", 2.0);
        assert_eq!(t.argmax("a"), Some((2, 2.0)));
        assert_eq!(t.argmin("a"), Some((0, 0.5)));
        let mut r = Report::new(ExperimentName::Budget);
        assert!(!r.check("x", 2.0, Bound::AtMost { limit: 1.0 }, "t", Some(2)));
        assert!(!r.passed());
        r.tables.push(t);
        assert!(r.gnuplot_script().contains("'t.csv'"));
    }
}
