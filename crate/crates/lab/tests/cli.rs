use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_wavepacket-lab");

fn lab(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("WPLAB_OUT");
    if let Some(p) = env_out {
        c.env("WPLAB_OUT", p);
    }
    c.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn budget_s_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.toml", "experiment = \"budget\"\n[symbol]\ns = 1\n");
    let out = tmp.path().join("out");
    let o = lab(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out.join("budget"));
    assert_eq!(s["metrics"]["sigma"]["value"], 0.5);
    assert_eq!(s["metrics"]["kappa1"]["value"], 0.0);
    assert_eq!(s["notes"]["sigma_exact"], "1/2");
}

#[test]
fn isometry_at_r64_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "i.toml", "experiment = \"isometry\"\nseed = 4\n[scale]\nbig_r = 64\n");
    let o = lab(&["run", &cfg], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&tmp.path().join("isometry"));
    assert_eq!(s["pass"], true);
    assert!(s["metrics"]["max_norm_deviation"]["value"].as_f64().unwrap() <= 1e-6);
    assert!(s["metrics"]["max_reconstruction_error"]["value"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn same_seed_gives_identical_csv_and_config_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "# ensemble\nexperiment = \"conservation\"\nseed = 9\n\n[scale]\nbig_r = 256\n[run]\nsamples = 8\n";
    let cfg = write_config(tmp.path(), "c.toml", text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = lab(&["run", &cfg, "--out", d.to_str().unwrap(), "--threads", "1"], None);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["quadruples.csv", "medians.csv"] {
        let x = fs::read(a.join("conservation").join(name)).unwrap();
        let y = fs::read(b.join("conservation").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    assert_eq!(fs::read_to_string(a.join("conservation/config.toml")).unwrap(), text);
    assert_eq!(summary(&a.join("conservation"))["config_echo"], text);
    assert!(fs::read_to_string(a.join("conservation/plot.gp")).unwrap().contains("'quadruples.csv'"));
}

#[test]
fn version_flag_keeps_previous_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.toml", "experiment = \"budget\"\n[symbol]\ns = 0\n");
    let out = tmp.path().to_str().unwrap();
    assert_eq!(lab(&["run", &cfg, "--out", out], None).status.code(), Some(0));
    assert_eq!(lab(&["run", &cfg, "--out", out, "--set", "symbol.s=\"1/2\"", "--on-exists", "version"], None).status.code(), Some(0));
    assert_eq!(summary(&tmp.path().join("budget"))["metrics"]["sigma"]["value"], 2.0 / 3.0);
    assert_eq!(summary(&tmp.path().join("budget.2"))["metrics"]["sigma"]["value"], 4.0 / 7.0);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", "experiment = \"isometry\"\n[scale]\ndelta = 2.0\n[grid]\npoints = 100\n");
    let o = lab(&["run", &bad, "--out", out], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("scale.delta") && err.contains("grid.points") && err.contains("scale.big_r"), "{err}");
    let unresolved = write_config(tmp.path(), "c.toml", "experiment = \"conservation\"\n[scale]\nbig_r = 256\n[symbol]\ncutoff = 4.0\n");
    let o = lab(&["run", &unresolved, "--out", out], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("conservation"));
    let failing = write_config(tmp.path(), "t.toml", "experiment = \"tubes\"\n[scale]\nbig_r = 256\n");
    assert_eq!(lab(&["run", &failing, "--out", out], None).status.code(), Some(1));
    assert_eq!(lab(&["run", "/nonexistent.toml", "--out", out], None).status.code(), Some(2));
}

#[test]
fn catalog_json_matches_schema() {
    let o = lab(&["list", "--json"], None);
    assert!(o.status.success());
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    let schema: Value =
        serde_json::from_str(&fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/catalog.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    assert!(validator.is_valid(&doc));
    let names: Vec<&str> = doc["experiments"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["isometry", "flow", "localization", "decompose", "dispersive", "bilinear", "conservation", "tubes", "budget"]);
    let mut broken = doc.clone();
    broken["experiments"][0]["name"] = "unknown".into();
    assert!(!validator.is_valid(&broken));
    let text = lab(&["list"], None);
    assert!(String::from_utf8_lossy(&text.stdout).contains("required: [scale.big_r]"));
}

#[test]
fn shipped_configs_validate() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        let cfg = wavepacket_lab::ExperimentConfig::from_toml(&text, &[]).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert_eq!(n, 9);
}
