//! Experiment manifests: TOML with dotted-path `key=value` overrides.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize};
use wavepacket_core::symbols::{FrequencyCutoff, MetricField, SymbolModel, make_halfwave, make_schrodinger};

use crate::catalog;
use crate::error::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    Isometry,
    Flow,
    Localization,
    Decompose,
    Dispersive,
    Bilinear,
    Conservation,
    Tubes,
    Budget,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 9] = [
        ExperimentName::Isometry,
        ExperimentName::Flow,
        ExperimentName::Localization,
        ExperimentName::Decompose,
        ExperimentName::Dispersive,
        ExperimentName::Bilinear,
        ExperimentName::Conservation,
        ExperimentName::Tubes,
        ExperimentName::Budget,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Isometry => "isometry",
            ExperimentName::Flow => "flow",
            ExperimentName::Localization => "localization",
            ExperimentName::Decompose => "decompose",
            ExperimentName::Dispersive => "dispersive",
            ExperimentName::Bilinear => "bilinear",
            ExperimentName::Conservation => "conservation",
            ExperimentName::Tubes => "tubes",
            ExperimentName::Budget => "budget",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

/// Scalar or list in the manifest; always a list after parsing.
fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    }))
}

/// A number or a `"p/q"` string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl RationalValue {
    pub fn to_ratio(&self) -> Result<Ratio<i64>, String> {
        match self {
            RationalValue::Int(n) => Ok(Ratio::from_integer(*n)),
            RationalValue::Float(x) => Ratio::approximate_float(*x).ok_or_else(|| format!("{x} is not representable")),
            RationalValue::Text(s) => {
                let (n, d) = s.split_once('/').unwrap_or((s.as_str(), "1"));
                let n: i64 = n.trim().parse().map_err(|_| format!("{s:?} is not a rational p/q"))?;
                let d: i64 = d.trim().parse().map_err(|_| format!("{s:?} is not a rational p/q"))?;
                if d == 0 {
                    return Err(format!("{s:?} has a zero denominator"));
                }
                Ok(Ratio::new(n, d))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSpec {
    /// Scale `R` (or packet scale `r`); a list runs a sweep.
    #[serde(default, deserialize_with = "one_or_many")]
    pub big_r: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub nu: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub delta0: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    #[default]
    Schrodinger,
    Halfwave,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// `g = ν I`.
    Flat,
    /// `g = ν(1 + ε cos(x₁/λ)) I`, periodic on the grid box.
    Cosine,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    #[serde(default)]
    pub kind: SymbolKind,
    /// Defaults to `cosine` when `eps` is nonzero.
    pub metric: Option<MetricKind>,
    pub eps: Option<f64>,
    /// Cosine periods across the box `[-L, L)`.
    pub modes: Option<usize>,
    /// Metric speeds `ν_k`, one per flow.
    #[serde(default, deserialize_with = "one_or_many")]
    pub speeds: Option<Vec<f64>>,
    /// Hölder exponent.
    pub s: Option<RationalValue>,
    /// Ball cutoff radius used when quantising on a grid.
    pub cutoff: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: Option<usize>,
    pub half_width: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
}

/// Experiment-specific knobs; each experiment declares which it reads.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub samples: Option<usize>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub times: Option<Vec<f64>>,
    pub steps: Option<usize>,
    pub width: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<RationalValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scale: ScaleSpec,
    #[serde(default)]
    pub symbol: SymbolSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub run: RunSpec,
    /// Manifest text exactly as read.
    #[serde(skip)]
    pub source: Option<String>,
    #[serde(skip)]
    pub overrides: Vec<String>,
}

fn parse_override(s: &str) -> Result<(Vec<String>, toml::Value), String> {
    let (key, raw) = s.split_once('=').ok_or_else(|| format!("override {s:?} is not key=value"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(format!("override key {key:?} has an empty segment"));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_owned()),
    };
    Ok((path, value))
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), String> {
    let (last, parents) = path.split_last().unwrap();
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("{p} is not a table"))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentName) -> Self {
        Self {
            experiment,
            seed: 0,
            scale: ScaleSpec::default(),
            symbol: SymbolSpec::default(),
            grid: GridSpec::default(),
            output: OutputSpec::default(),
            run: RunSpec::default(),
            source: None,
            overrides: Vec::new(),
        }
    }

    /// Parses a manifest and applies `key=value` overrides in order.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, LabError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| LabError::Config(vec![e.message().to_owned()]))?;
        let mut errs = Vec::new();
        for o in overrides {
            match parse_override(o).and_then(|(p, v)| set_path(&mut table, &p, v)) {
                Ok(()) => {}
                Err(m) => errs.push(format!("--set {o}: {m}")),
            }
        }
        if !errs.is_empty() {
            return Err(LabError::Config(errs));
        }
        let mut cfg: Self = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| LabError::Config(vec![e.message().to_owned()]))?;
        cfg.source = Some(text.to_owned());
        cfg.overrides = overrides.to_vec();
        Ok(cfg)
    }

    /// Dotted keys that carry a value, for checking against the catalog.
    pub fn present_keys(&self) -> Vec<&'static str> {
        let mut k = Vec::new();
        let mut put = |cond: bool, key: &'static str| {
            if cond {
                k.push(key);
            }
        };
        put(self.scale.big_r.is_some(), "scale.big_r");
        put(self.scale.nu.is_some(), "scale.nu");
        put(self.scale.delta.is_some(), "scale.delta");
        put(self.scale.delta0.is_some(), "scale.delta0");
        put(self.symbol.kind != SymbolKind::Schrodinger, "symbol.kind");
        put(self.symbol.metric.is_some(), "symbol.metric");
        put(self.symbol.eps.is_some(), "symbol.eps");
        put(self.symbol.modes.is_some(), "symbol.modes");
        put(self.symbol.speeds.is_some(), "symbol.speeds");
        put(self.symbol.s.is_some(), "symbol.s");
        put(self.symbol.cutoff.is_some(), "symbol.cutoff");
        put(self.grid.dim.is_some(), "grid.dim");
        put(self.grid.half_width.is_some(), "grid.half_width");
        put(self.grid.points.is_some(), "grid.points");
        put(self.run.samples.is_some(), "run.samples");
        put(self.run.times.is_some(), "run.times");
        put(self.run.steps.is_some(), "run.steps");
        put(self.run.width.is_some(), "run.width");
        put(self.run.p.is_some(), "run.p");
        put(self.run.q.is_some(), "run.q");
        k
    }

    /// Collects every offending field rather than stopping at the first.
    pub fn validate(&self) -> Result<(), LabError> {
        let mut errs = Vec::new();
        let entry = catalog::entry(self.experiment);
        for key in self.present_keys() {
            if !entry.required.contains(&key) && !entry.optional.contains(&key) {
                errs.push(format!("{key}: not used by experiment {}", self.experiment));
            }
        }
        for key in entry.required {
            if !self.present_keys().contains(key) {
                errs.push(format!("{key}: required by experiment {}", self.experiment));
            }
        }
        fn check(errs: &mut Vec<String>, ok: bool, key: &str, msg: &str) {
            if !ok {
                errs.push(format!("{key}: {msg}"));
            }
        }
        if let Some(rs) = &self.scale.big_r {
            check(&mut errs, !rs.is_empty() && rs.iter().all(|r| r.is_finite() && *r >= 1.0), "scale.big_r", "values must be finite and at least 1");
        }
        if let Some(nus) = &self.scale.nu {
            check(&mut errs, !nus.is_empty() && nus.iter().all(|n| *n > 0.0 && *n <= 1.0), "scale.nu", "values must lie in (0, 1]");
        }
        if let Some(d) = self.scale.delta {
            check(&mut errs, d > 0.0 && d < 0.5, "scale.delta", "must lie in (0, 1/2)");
        }
        if let Some(d) = self.scale.delta0 {
            check(&mut errs, d > 0.0 && d < 1.0, "scale.delta0", "must lie in (0, 1)");
        }
        if let Some(e) = self.symbol.eps {
            check(&mut errs, e.is_finite() && e.abs() < 1.0, "symbol.eps", "must satisfy |eps| < 1");
        }
        if let Some(m) = self.symbol.modes {
            check(&mut errs, m >= 1, "symbol.modes", "must be at least 1");
        }
        if self.symbol.metric == Some(MetricKind::Flat) && self.symbol.eps.is_some_and(|e| e != 0.0) {
            errs.push("symbol.eps: a flat metric takes no perturbation".into());
        }
        if let Some(v) = &self.symbol.speeds {
            check(&mut errs, !v.is_empty() && v.iter().all(|s| *s > 0.0 && s.is_finite()), "symbol.speeds", "speeds must be positive");
        }
        if let Some(s) = &self.symbol.s {
            match s.to_ratio() {
                Ok(r) => check(&mut errs, r >= Ratio::from_integer(0) && r <= Ratio::from_integer(1), "symbol.s", "must lie in [0, 1]"),
                Err(m) => errs.push(format!("symbol.s: {m}")),
            }
        }
        if let Some(c) = self.symbol.cutoff {
            check(&mut errs, c > 0.0, "symbol.cutoff", "must be positive");
        }
        if let Some(d) = self.grid.dim {
            check(&mut errs, d == 1 || d == 2, "grid.dim", "must be 1 or 2");
        }
        if let Some(l) = self.grid.half_width {
            check(&mut errs, l > 0.0 && l.is_finite(), "grid.half_width", "must be positive");
        }
        if let Some(n) = self.grid.points {
            check(&mut errs, n >= 64 && n.is_power_of_two(), "grid.points", "must be a power of two, at least 64");
        }
        if let Some(n) = self.run.samples {
            check(&mut errs, n >= 1, "run.samples", "must be at least 1");
        }
        if let Some(t) = &self.run.times {
            check(&mut errs, !t.is_empty() && t.iter().all(|x| x.is_finite()), "run.times", "must be finite");
        }
        if let Some(s) = self.run.steps {
            check(&mut errs, s >= 4, "run.steps", "must be at least 4");
        }
        if let Some(w) = self.run.width {
            check(&mut errs, w > 0.0, "run.width", "must be positive");
        }
        if let Some(p) = self.run.p {
            check(&mut errs, p >= 1.0, "run.p", "must be at least 1");
        }
        if let Some(q) = &self.run.q {
            match q.to_ratio() {
                Ok(r) => check(&mut errs, r > Ratio::from_integer(2), "run.q", "must exceed 2"),
                Err(m) => errs.push(format!("run.q: {m}")),
            }
        }
        if errs.is_empty() { Ok(()) } else { Err(LabError::Config(errs)) }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim.unwrap_or(1)
    }

    pub fn r_list(&self, default: &[f64]) -> Vec<f64> {
        self.scale.big_r.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn nu_list(&self, default: &[f64]) -> Vec<f64> {
        self.scale.nu.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn delta(&self) -> f64 {
        self.scale.delta.unwrap_or(wavepacket_core::estimates::DEFAULT_DELTA)
    }

    pub fn delta0(&self) -> f64 {
        self.scale.delta0.unwrap_or(0.25)
    }

    pub fn eps(&self) -> f64 {
        self.symbol.eps.unwrap_or(0.0)
    }

    pub fn speed(&self, k: usize) -> f64 {
        self.symbol.speeds.as_ref().and_then(|v| v.get(k).or(v.last()).copied()).unwrap_or(1.0)
    }

    /// Symbol for flow `k`, with its metric periodic on `[-half_width, half_width)`.
    pub fn symbol_model(&self, k: usize, dim: usize, half_width: f64) -> Result<SymbolModel, LabError> {
        let nu = self.speed(k);
        let eps = self.eps();
        let metric_kind = self.symbol.metric.unwrap_or(if eps != 0.0 { MetricKind::Cosine } else { MetricKind::Flat });
        let metric = match metric_kind {
            MetricKind::Flat => MetricField::scaled_identity(dim, nu)?,
            MetricKind::Cosine => {
                let modes = self.symbol.modes.unwrap_or_else(|| default_modes(half_width));
                let wavelength = half_width / (std::f64::consts::PI * modes as f64);
                MetricField::cosine_perturbed(dim, nu, eps, wavelength, half_width)?
            }
        };
        let sym = match self.symbol.kind {
            SymbolKind::Schrodinger => make_schrodinger(metric)?,
            SymbolKind::Halfwave => make_halfwave(metric)?,
        };
        Ok(match self.symbol.cutoff {
            Some(radius) => sym.with_cutoff(FrequencyCutoff::Ball { radius }),
            None => sym,
        })
    }
}

/// About one cosine period per 20 length units.
fn default_modes(half_width: f64) -> usize {
    ((half_width / (10.0 * std::f64::consts::PI)).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_or_list_and_overrides() {
        let text = "experiment = \"bilinear\"\n[scale]\nbig_r = 64\nnu = [1.0, 0.5, 0.25]\n";
        let c = ExperimentConfig::from_toml(text, &["scale.big_r=[64, 256, 1024]".into(), "run.width=10".into()]).unwrap();
        assert_eq!(c.scale.big_r, Some(vec![64.0, 256.0, 1024.0]));
        assert_eq!(c.run.width, Some(10.0));
        assert_eq!(c.source.as_deref(), Some(text));
        c.validate().unwrap();
    }

    #[test]
    fn validation_lists_every_field() {
        let text = "experiment = \"isometry\"\n[scale]\ndelta = 0.7\n[grid]\npoints = 100\n[run]\nwidth = 3.0\n";
        let c = ExperimentConfig::from_toml(text, &[]).unwrap();
        let LabError::Config(fields) = c.validate().unwrap_err() else { panic!() };
        let joined = fields.join("\n");
        for key in ["scale.delta", "grid.points", "run.width", "scale.big_r"] {
            assert!(joined.contains(key), "{joined}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::from_toml("experiment = \"budget\"\n[scale]\nbogus = 1\n", &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("bogus"));
        assert!(ExperimentConfig::from_toml("experiment = \"nope\"", &[]).is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"budget\"", &["novalue".into()]).is_err());
    }

    #[test]
    fn rationals() {
        assert_eq!(RationalValue::Text("1/2".into()).to_ratio().unwrap(), Ratio::new(1, 2));
        assert_eq!(RationalValue::Float(0.5).to_ratio().unwrap(), Ratio::new(1, 2));
        assert_eq!(RationalValue::Int(1).to_ratio().unwrap(), Ratio::from_integer(1));
        assert!(RationalValue::Text("1/0".into()).to_ratio().is_err());
    }
}
