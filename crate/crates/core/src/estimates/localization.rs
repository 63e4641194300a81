//! Tail masses of an evolved packet outside its position, frequency and
//! time-frequency neighbourhoods.

use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Result, param_err};
use crate::math::PI;
use crate::phase_space::pad;
use crate::propagate::{PropagateOptions, WavePacket, propagate_reference};
use crate::symbols::SymbolModel;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalizationRow {
    pub t: f64,
    /// Mass fraction outside `|y − x^t| ≤ r^{1/2+δ}`.
    pub spatial_tail: f64,
    /// Mass fraction outside `|ζ − ξ^t| ≤ r^{−1/2+δ}`.
    pub frequency_tail: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeFrequencyRow {
    pub t0: f64,
    /// Mass fraction of the windowed time transform outside `|τ − τ₀| ≤ r^{−1/2+δ}`.
    pub tail: f64,
    pub peak_tau: f64,
    /// `τ₀ = −p(x^{t₀}, t₀, ξ^{t₀})`.
    pub expected_tau: f64,
    pub bin: f64,
    pub peak_ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationReport {
    pub r: f64,
    pub delta: f64,
    pub rows: Vec<LocalizationRow>,
    pub time_frequency: Vec<TimeFrequencyRow>,
}

impl LocalizationReport {
    /// Largest `(spatial, frequency, time-frequency)` tails.
    pub fn worst(&self) -> (f64, f64, f64) {
        let s = self.rows.iter().map(|r| r.spatial_tail).fold(0.0, f64::max);
        let f = self.rows.iter().map(|r| r.frequency_tail).fold(0.0, f64::max);
        let tf = self.time_frequency.iter().map(|r| r.tail).fold(0.0, f64::max);
        (s, f, tf)
    }
}

/// True when each worst tail is non-increasing along a sweep ordered by `r`.
pub fn monotone_in_r(reports: &[LocalizationReport]) -> bool {
    reports.windows(2).all(|w| {
        let (a, b) = (w[0].worst(), w[1].worst());
        let tol = 1e-12;
        b.0 <= a.0 + tol && b.1 <= a.1 + tol && b.2 <= a.2 + tol
    })
}

/// Window half-length in units of `√r` and time step of the time transform.
const WINDOW_SIGMAS: f64 = 6.0;
const WINDOW_DT: f64 = 0.25;

/// Evolves `packet.initial` with the reference solver and measures the three
/// tails at each of `times` and, for each `t0` in `t0s`, in a Gaussian time
/// window of width `√r` centred at `t0`.
pub fn localization_report(
    packet: &WavePacket,
    symbol: &SymbolModel,
    r: f64,
    delta: f64,
    times: &[f64],
    t0s: &[f64],
    opts: PropagateOptions,
) -> Result<LocalizationReport> {
    if !(r > 0.0 && delta > 0.0 && delta < 0.5) {
        return Err(param_err!("need r > 0 and 0 < delta < 1/2"));
    }
    let grid = packet.initial.grid;
    let d = grid.dim();
    let x_rad = Float::powf(r, 0.5 + delta);
    let xi_rad = Float::powf(r, -0.5 + delta);

    let mut rows = Vec::with_capacity(times.len());
    if !times.is_empty() {
        let traj = propagate_reference(symbol, &packet.initial, 0.0, times, opts)?;
        for (&t, f) in times.iter().zip(&traj.fields) {
            let (x, xi, _) = packet.bichar.state_at(t)?;
            let total = f.norm_sq();
            let inside: f64 = (0..grid.len())
                .filter(|&k| {
                    let y = grid.position(k);
                    (0..d).map(|a| Float::powi(grid.wrap(y[a] - x[a]), 2)).sum::<f64>() <= x_rad * x_rad
                })
                .map(|k| f.values[k].norm_sqr() * grid.cell())
                .sum();
            let spec = f.spectrum();
            let stot: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
            let sin: f64 = (0..grid.len())
                .filter(|&k| {
                    let z = grid.frequency(k);
                    (0..d).map(|a| Float::powi(z[a] - xi[a], 2)).sum::<f64>() <= xi_rad * xi_rad
                })
                .map(|k| spec[k].norm_sqr())
                .sum();
            rows.push(LocalizationRow { t, spatial_tail: tail(inside, total), frequency_tail: tail(sin, stot) });
        }
    }

    let mut time_frequency = Vec::with_capacity(t0s.len());
    for &t0 in t0s {
        time_frequency.push(time_frequency_row(packet, symbol, r, xi_rad, t0, opts)?);
    }
    Ok(LocalizationReport { r, delta, rows, time_frequency })
}

fn tail(inside: f64, total: f64) -> f64 {
    if total > 0.0 { (1.0 - inside / total).max(0.0) } else { 0.0 }
}

fn time_frequency_row(
    packet: &WavePacket,
    symbol: &SymbolModel,
    r: f64,
    band: f64,
    t0: f64,
    opts: PropagateOptions,
) -> Result<TimeFrequencyRow> {
    let grid = packet.initial.grid;
    let sr = Float::sqrt(r);
    let half = WINDOW_SIGMAS * sr;
    let n = Float::ceil(half / WINDOW_DT) as i64;
    let ts: Vec<f64> = (-n..=n).map(|k| t0 + k as f64 * WINDOW_DT).collect();
    let w: Vec<f64> = ts.iter().map(|t| Float::exp(-(t - t0) * (t - t0) / (2.0 * r))).collect();
    let traj = propagate_reference(symbol, &packet.initial, 0.0, &ts, opts)?;

    let (x, xi, _) = packet.bichar.state_at(t0)?;
    let expected_tau = -symbol.eval(pad(&x), t0, pad(&xi));
    let bin = 1.0 / (4.0 * sr);

    // Plancherel in t: ∫|F|² dτ = 2π ∫ |w φ|² dt.
    let total: f64 = 2.0 * PI * ts.iter().enumerate().map(|(i, _)| w[i] * w[i] * traj.fields[i].norm_sq() * WINDOW_DT).sum::<f64>();

    let mass_at = |tau: f64| -> f64 {
        let mut acc = alloc::vec![Complex64::new(0.0, 0.0); grid.len()];
        for (i, &t) in ts.iter().enumerate() {
            let c = Complex64::from_polar(w[i] * WINDOW_DT, -tau * t);
            for (a, v) in acc.iter_mut().zip(&traj.fields[i].values) {
                *a += c * v;
            }
        }
        acc.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.cell()
    };

    let k_in = Float::floor(band / bin) as i64;
    let inside: f64 = (-k_in..=k_in).map(|k| mass_at(expected_tau + k as f64 * bin) * bin).sum();
    let scan = (4 * k_in).max(Float::ceil(1.0 / bin) as i64);
    let mut peak = (expected_tau, f64::NEG_INFINITY);
    for k in -scan..=scan {
        let tau = expected_tau + k as f64 * bin;
        let m = mass_at(tau);
        if m > peak.1 {
            peak = (tau, m);
        }
    }
    Ok(TimeFrequencyRow {
        t0,
        tail: tail(inside, total),
        peak_tau: peak.0,
        expected_tau,
        bin,
        peak_ok: Float::abs(peak.0 - expected_tau) <= bin * (1.0 + 1e-9),
    })
}
