use rand::RngExt;
use wavepacket_core::flow::{
    Bicharacteristic, FlowOptions, bilipschitz_report, integrate_bicharacteristic, richardson_ratio, variational_flow,
};
use wavepacket_core::phase_space::PhasePoint;
use wavepacket_core::symbols::{MetricField, SampleBox, SymbolModel, make_halfwave, make_schrodinger, regularity_constants};

use super::rng;
use crate::config::{ExperimentConfig, ExperimentName};
use crate::error::LabError;
use crate::report::{Bound, Cell, Report, Table};

pub const CLOSED_FORM_TOLERANCE: f64 = 1e-10;
pub const RICHARDSON_RANGE: (f64, f64) = (12.0, 20.0);
pub const DET_TOLERANCE: f64 = 1e-6;

/// Box used for the periodic metric of the order and envelope tests.
const BOX_HALF_WIDTH: f64 = 32.0 * std::f64::consts::PI;

fn closed_form_error(b: &Bicharacteristic, nu: f64, halfwave: bool) -> f64 {
    let d = b.dim;
    let x0 = b.x[b.times.iter().position(|&t| t == b.t0).unwrap()];
    let xi = b.xi[0];
    let m = xi[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut err: f64 = 0.0;
    for k in 0..b.times.len() {
        let t = b.times[k] - b.t0;
        for a in 0..d {
            let v = if halfwave { nu.sqrt() * xi[a] / m } else { 2.0 * nu * xi[a] };
            err = err.max((b.x[k][a] - (x0[a] + v * t)).abs()).max((b.xi[k][a] - xi[a]).abs());
        }
        // ψ̇ = (h − 1) p with h the homogeneity degree.
        let psi = if halfwave { 0.0 } else { nu * m * m * t };
        err = err.max((b.psi[k] - psi).abs());
    }
    err
}

struct OrderCase {
    label: &'static str,
    sym: SymbolModel,
    start: PhasePoint,
}

fn order_cases() -> Result<Vec<OrderCase>, LabError> {
    let lambda = 2.0;
    let m1 = MetricField::cosine_perturbed(1, 1.0, 0.2, lambda, BOX_HALF_WIDTH)?;
    let m2 = MetricField::cosine_perturbed(2, 1.0, 0.2, lambda, BOX_HALF_WIDTH)?;
    Ok(vec![
        OrderCase { label: "schrodinger_d1", sym: make_schrodinger(m1)?, start: PhasePoint::d1(0.3, 0.7) },
        OrderCase { label: "schrodinger_d2", sym: make_schrodinger(m2.clone())?, start: PhasePoint::new(&[0.3, -0.2], &[0.6, 0.4])? },
        OrderCase { label: "halfwave_d2", sym: make_halfwave(m2)?, start: PhasePoint::new(&[0.1, 0.5], &[0.8, 0.6])? },
    ])
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let mut report = Report::new(ExperimentName::Flow);
    let mut det_dev: f64 = 0.0;
    let mut det_row = None;
    let mut symplectic = Table::new("symplectic", &["trajectory"]);

    // Constant coefficients: straight lines with linear phase.
    let mut closed = Table::new("closed_form", &["case", "dim", "speed"]);
    for (kind, dim, nu, x, xi) in [
        ("schrodinger", 1, 1.0, vec![0.0], vec![0.7]),
        ("schrodinger", 1, 0.5, vec![2.0], vec![-0.3]),
        ("schrodinger", 2, 1.0, vec![1.0, -2.0], vec![0.3, 0.4]),
        ("halfwave", 2, 1.0, vec![0.0, 0.0], vec![0.6, 0.8]),
        ("halfwave", 2, 0.25, vec![1.0, 1.0], vec![-1.0, 2.0]),
    ] {
        let metric = MetricField::scaled_identity(dim, nu)?;
        let halfwave = kind == "halfwave";
        let sym = if halfwave { make_halfwave(metric)? } else { make_schrodinger(metric)? };
        let b = integrate_bicharacteristic(&sym, &PhasePoint::new(&x, &xi)?, (0.0, 16.0), 256, &FlowOptions::unchecked())?;
        let row = closed.push(vec![kind.into(), dim.into(), nu.into()], "max_error", closed_form_error(&b, nu, halfwave));
        let v = variational_flow(&sym, &b)?;
        let r = symplectic.push(vec![format!("closed_{row}").into()], "det_deviation", v.max_det_deviation);
        if v.max_det_deviation >= det_dev {
            det_dev = v.max_det_deviation;
            det_row = Some(r);
        }
    }
    let (row, v) = closed.argmax("max_error").unwrap();
    report.check("closed_form_max_error", v, Bound::AtMost { limit: CLOSED_FORM_TOLERANCE }, "closed_form", Some(row));

    // Fourth-order convergence on variable metrics.
    let steps = cfg.run.steps.unwrap_or(64);
    let mut order = Table::new("richardson", &["case", "steps"]);
    let (lo, hi) = RICHARDSON_RANGE;
    for case in order_cases()? {
        let ratio = richardson_ratio(&case.sym, &case.start, (0.0, 8.0), steps)?;
        let row = order.push(vec![case.label.into(), steps.into()], "ratio", ratio);
        report.check(&format!("richardson_{}", case.label), ratio, Bound::Between { lo, hi }, "richardson", Some(row));
        let b = integrate_bicharacteristic(&case.sym, &case.start, (0.0, 8.0), 4 * steps, &FlowOptions::unchecked())?;
        let v = variational_flow(&case.sym, &b)?;
        let r = symplectic.push(vec![case.label.into()], "det_deviation", v.max_det_deviation);
        if v.max_det_deviation >= det_dev {
            det_dev = v.max_det_deviation;
            det_row = Some(r);
        }
    }

    // Grönwall envelope for random nearby pairs at scale R.
    let big_r = cfg.r_list(&[256.0])[0];
    let eps = cfg.symbol.eps.unwrap_or(0.01);
    let mut pcfg = cfg.clone();
    pcfg.symbol.eps = Some(eps);
    let sym = pcfg.symbol_model(0, 1, BOX_HALF_WIDTH)?;
    let sample = SampleBox {
        dim: 1,
        x_lo: -BOX_HALF_WIDTH,
        x_hi: BOX_HALF_WIDTH,
        t_lo: 0.0,
        t_hi: 0.0,
        xi_lo: -1.0,
        xi_hi: 1.0,
        annulus: None,
        per_axis: 65,
    };
    let c2 = regularity_constants(&sym, &sample.points(), big_r).c2;
    let pairs_n = cfg.run.samples.unwrap_or(100);
    let mut r = rng(cfg.seed, 0);
    let s = big_r.sqrt();
    let pairs: Vec<(PhasePoint, PhasePoint)> = (0..pairs_n)
        .map(|_| {
            let x = r.random_range(-BOX_HALF_WIDTH..BOX_HALF_WIDTH);
            let xi = r.random_range(-0.8..0.8);
            let dx = r.random_range(-4.0..4.0) * s;
            let dxi = r.random_range(-4.0..4.0) / s;
            (PhasePoint::d1(x, xi), PhasePoint::d1(x + dx, xi + dxi))
        })
        .collect();
    let flow_steps = wavepacket_core::flow::default_steps(big_r, big_r);
    let mut env = Table::new("bilipschitz", &["direction", "pair"]);
    let mut violations = 0usize;
    for (dir, horizon) in [("forward", big_r), ("backward", -big_r)] {
        let rep = bilipschitz_report(&sym, &pairs, big_r, horizon, c2, flow_steps)?;
        violations += rep.violations;
        for row in &rep.rows {
            let keys = || vec![Cell::from(dir), row.pair.into()];
            env.push(keys(), "max_ratio", row.max_ratio);
            env.push(keys(), "min_slack", row.min_slack);
            env.push(keys(), "violations", row.violations as f64);
        }
    }
    for (k, (p, _)) in pairs.iter().enumerate().take(8) {
        let b = integrate_bicharacteristic(&sym, p, (0.0, big_r), flow_steps, &FlowOptions::unchecked())?;
        let v = variational_flow(&sym, &b)?;
        let r = symplectic.push(vec![format!("pair_{k}").into()], "det_deviation", v.max_det_deviation);
        if v.max_det_deviation >= det_dev {
            det_dev = v.max_det_deviation;
            det_row = Some(r);
        }
    }
    let row = env.push(vec!["all".into(), pairs_n.into()], "c2", c2);
    report.record("c2", c2, "bilipschitz", Some(row));
    let row = env.push(vec!["all".into(), pairs_n.into()], "total_violations", violations as f64);
    report.check("envelope_violations", violations as f64, Bound::AtMost { limit: 0.0 }, "bilipschitz", Some(row));
    report.check("max_det_deviation", det_dev, Bound::AtMost { limit: DET_TOLERANCE }, "symplectic", det_row);
    report.tables.extend([closed, order, env, symplectic]);
    Ok(report)
}
