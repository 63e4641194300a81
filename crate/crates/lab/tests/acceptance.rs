//! Acceptance suite: one line per criterion.
//!
//! Failing criteria are reported, not hidden. The process exits non-zero on
//! a failure only when `WPLAB_ACCEPTANCE_STRICT` is set.

use std::time::{Duration, Instant};

use num_rational::Ratio;
use wavepacket_core::symbols::loss_budget;
use wavepacket_lab::config::{ExperimentConfig, ExperimentName, RationalValue};
use wavepacket_lab::{Report, run};

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(budget: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    o.detail.push_str(&format!("; {:.1} s of {} s", elapsed.as_secs_f64(), budget.as_secs()));
    if elapsed > budget {
        o.pass = false;
    }
    o
}

fn experiment(name: ExperimentName, edit: impl FnOnce(&mut ExperimentConfig)) -> Result<Report, String> {
    let mut cfg = ExperimentConfig::new(name);
    edit(&mut cfg);
    run(&cfg).map_err(|e| e.to_string())
}

fn metric(r: &Report, name: &str) -> f64 {
    r.metric(name).unwrap_or(f64::NAN)
}

fn error(e: String) -> Outcome {
    Outcome { pass: false, detail: format!("error: {e}") }
}

fn isometry() -> Outcome {
    const TOL: f64 = 1e-6;
    match experiment(ExperimentName::Isometry, |c| {
        c.scale.big_r = Some(vec![16.0, 64.0, 256.0]);
        c.run.samples = Some(20);
        c.seed = 1;
    }) {
        Ok(r) => {
            let (n, e) = (metric(&r, "max_norm_deviation"), metric(&r, "max_reconstruction_error"));
            Outcome { pass: n <= TOL && e <= TOL, detail: format!("max |ratio-1| {n:.2e}, max reconstruction {e:.2e} (<= {TOL:e})") }
        }
        Err(e) => error(e),
    }
}

fn flow_report() -> (Result<Report, String>, Duration) {
    let start = Instant::now();
    let r = experiment(ExperimentName::Flow, |c| {
        c.scale.big_r = Some(vec![256.0]);
        c.symbol.eps = Some(0.01);
        c.run.samples = Some(100);
        c.seed = 3;
    });
    (r, start.elapsed())
}

fn with_runtime(mut o: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    o.detail.push_str(&format!("; {:.1} s of {} s", elapsed.as_secs_f64(), budget.as_secs()));
    if elapsed > budget {
        o.pass = false;
    }
    o
}

fn flow_exactness(r: &Report) -> Outcome {
    const CLOSED: f64 = 1e-10;
    let closed = metric(r, "closed_form_max_error");
    let ratios: Vec<f64> = ["schrodinger_d1", "schrodinger_d2", "halfwave_d2"].iter().map(|c| metric(r, &format!("richardson_{c}"))).collect();
    let pass = closed <= CLOSED && ratios.iter().all(|v| (12.0..=20.0).contains(v));
    Outcome { pass, detail: format!("closed-form error {closed:.2e} (<= {CLOSED:e}), Richardson ratios {ratios:.2?} (in [12, 20])") }
}

fn bilipschitz(r: &Report) -> Outcome {
    let v = metric(r, "envelope_violations");
    Outcome { pass: v == 0.0, detail: format!("{v} envelope violations over 100 pairs, |t| <= R = 256, C2 = {:.3}", metric(r, "c2")) }
}

fn symplectic(r: &Report) -> Outcome {
    const TOL: f64 = 1e-6;
    let d = metric(r, "max_det_deviation");
    Outcome { pass: d <= TOL, detail: format!("max |det - 1| {d:.2e} (<= {TOL:e})") }
}

fn localization() -> Outcome {
    const TOL: f64 = 1e-4;
    match experiment(ExperimentName::Localization, |c| {
        c.scale.big_r = Some(vec![64.0, 256.0]);
        c.scale.delta = Some(0.1);
        c.symbol.eps = Some(0.01);
    }) {
        Ok(r) => {
            let tails = [metric(&r, "max_spatial_tail"), metric(&r, "max_frequency_tail"), metric(&r, "max_time_frequency_tail")];
            let peak = metric(&r, "max_peak_offset_bins");
            Outcome {
                pass: tails.iter().all(|t| *t <= TOL) && peak <= 1.0,
                detail: format!(
                    "worst tails (space, frequency, time-frequency) {:.2e} {:.2e} {:.2e} (<= {TOL:e}), peak offset {peak} bins (<= 1)",
                    tails[0], tails[1], tails[2]
                ),
            }
        }
        Err(e) => error(e),
    }
}

fn decomposition() -> Outcome {
    const TOL: f64 = 1e-3;
    match experiment(ExperimentName::Decompose, |c| {
        c.scale.big_r = Some(vec![256.0]);
        c.seed = 11;
    }) {
        Ok(r) => {
            let g = metric(&r, "max_relative_remainder");
            Outcome { pass: g <= TOL, detail: format!("max ||g(t)|| / ||u0|| over t in [-r, r] = {g:.2e} (<= {TOL:e})") }
        }
        Err(e) => error(e),
    }
}

fn dispersive() -> Outcome {
    match experiment(ExperimentName::Dispersive, |c| {
        c.symbol.eps = Some(0.01);
        c.run.times = Some((0..=8).map(|k| f64::powi(2.0, k)).collect());
    }) {
        Ok(r) => {
            let (f, p) = (metric(&r, "free_slope"), metric(&r, "perturbed_slope"));
            Outcome {
                pass: (f + 0.5).abs() <= 0.05 && (p + 0.5).abs() <= 0.1,
                detail: format!("free slope {f:.4} (-0.5 +/- 0.05), perturbed slope {p:.4} (-0.5 +/- 0.1)"),
            }
        }
        Err(e) => error(e),
    }
}

fn bilinear() -> Outcome {
    match experiment(ExperimentName::Bilinear, |c| {
        c.scale.big_r = Some(vec![64.0, 256.0, 1024.0]);
        c.scale.nu = Some(vec![1.0, 0.5, 0.25]);
        c.run.p = Some(2.0);
    }) {
        Ok(r) => {
            let nu: Vec<f64> = [64, 256, 1024].iter().map(|b| metric(&r, &format!("nu_slope_r{b}"))).collect();
            let rs: Vec<f64> = ["1", "0.5", "0.25"].iter().map(|n| metric(&r, &format!("r_slope_nu{n}"))).collect();
            Outcome {
                pass: nu.iter().all(|s| (s + 0.5).abs() <= 0.15) && rs.iter().all(|s| *s <= 0.1),
                detail: format!("nu-exponents per R {nu:.3?} (-0.5 +/- 0.15), R-exponents per nu {rs:.3?} (<= 0.1)"),
            }
        }
        Err(e) => error(e),
    }
}

fn conservation() -> Outcome {
    const MIN: f64 = 1e3;
    match experiment(ExperimentName::Conservation, |c| {
        c.scale.big_r = Some(vec![256.0]);
        c.run.samples = Some(50);
        c.seed = 5;
    }) {
        Ok(r) => {
            let ratio = metric(&r, "median_ratio");
            Outcome { pass: ratio >= MIN, detail: format!("median ratio {ratio:.3e} (>= {MIN:e}) over 50 quadruples") }
        }
        Err(e) => error(e),
    }
}

fn tubes() -> Outcome {
    match experiment(ExperimentName::Tubes, |c| {
        c.scale.big_r = Some(vec![256.0]);
        c.scale.nu = Some(vec![1.0, 0.5, 0.25]);
        c.scale.delta = Some(0.1);
    }) {
        Ok(r) => {
            let count = metric(&r, "max_shell_tubes_transverse");
            let scaled: Vec<f64> = ["1", "0.5", "0.25"].iter().map(|n| metric(&r, &format!("extent_scaling_nu{n}"))).collect();
            Outcome {
                pass: count <= 2.0 && scaled.iter().all(|s| (0.5..=2.0).contains(s)),
                detail: format!("shell tubes per (q, q') {count} (<= 2), nu * extent relative to nu = 1: {scaled:.2?} (in [0.5, 2])"),
            }
        }
        Err(e) => error(e),
    }
}

fn budget() -> Outcome {
    let mut mismatches = Vec::new();
    let half = Ratio::new(1, 2);
    for s in [Ratio::from_integer(0), half, Ratio::from_integer(1)] {
        // The lab path must agree too.
        let via_lab = experiment(ExperimentName::Budget, |c| c.symbol.s = Some(RationalValue::Text(s.to_string())));
        for d in [1i64, 2, 3] {
            for q in [Ratio::from_integer(4), Ratio::new(10, 3), Ratio::from_integer(6)] {
                let b = match loss_budget(s, d, q) {
                    Ok(b) => b,
                    Err(e) => return error(e.to_string()),
                };
                let sigma = Ratio::from_integer(2) / (Ratio::from_integer(3) + s);
                let kappa0 = Ratio::new(d - 1, 2) - Ratio::from_integer(d) / q;
                let kappa1 = (Ratio::from_integer(1) - s) / (Ratio::from_integer(2) * (Ratio::from_integer(3) + s));
                let kappa = sigma - half;
                if b.sigma != sigma || b.kappa0 != kappa0 || b.kappa1 != kappa1 || b.kappa != kappa {
                    mismatches.push(format!("s={s} d={d} q={q}"));
                }
            }
        }
        match via_lab {
            Ok(r) => {
                let sigma = 2.0 / (3.0 + *s.numer() as f64 / *s.denom() as f64);
                if r.notes.get("sigma_exact").and_then(|v| v.as_str()) != Some(&(Ratio::from_integer(2) / (Ratio::from_integer(3) + s)).to_string())
                    || metric(&r, "sigma") != sigma
                {
                    mismatches.push(format!("lab s={s}"));
                }
            }
            Err(e) => return error(e),
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: if mismatches.is_empty() { "sigma, kappa0, kappa1, kappa exact for s in {0, 1/2, 1}".into() } else { format!("mismatches: {mismatches:?}") },
    }
}

fn main() {
    let min = |m: u64| Duration::from_secs(60 * m);
    let mut lines: Vec<(usize, &str, Outcome)> = Vec::new();
    lines.push((1, "FBI isometry and inversion", timed(min(1), isometry)));
    let (flow, flow_time) = flow_report();
    match flow {
        Ok(r) => {
            lines.push((2, "flow exactness and order", with_runtime(flow_exactness(&r), flow_time, min(1))));
            lines.push((3, "bi-Lipschitz envelope", with_runtime(bilipschitz(&r), flow_time, min(2))));
            lines.push((4, "symplecticity", symplectic(&r)));
        }
        Err(e) => {
            lines.push((2, "flow exactness and order", error(e.clone())));
            lines.push((3, "bi-Lipschitz envelope", error(e.clone())));
            lines.push((4, "symplecticity", error(e)));
        }
    }
    lines.push((5, "localization tails", timed(min(5), localization)));
    lines.push((6, "decomposition remainder", timed(min(10), decomposition)));
    lines.push((7, "dispersive decay", timed(min(10), dispersive)));
    lines.push((8, "bilinear nu-scaling", timed(min(30), bilinear)));
    lines.push((9, "conservation discrimination", timed(min(10), conservation)));
    lines.push((10, "tube counting", timed(min(5), tubes)));
    lines.push((11, "budget arithmetic", budget()));

    let mut failed = 0;
    for (n, name, o) in &lines {
        if !o.pass {
            failed += 1;
        }
        println!("criterion {n:>2} {:<4} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 && std::env::var_os("WPLAB_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
