//! Wave packets: frozen-Gaussian and exactly evolved profiles, the packet
//! decomposition of localized data, and the parametrix defect.

use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use super::reference::{FieldTrajectory, PropagateOptions, Propagator};
use super::weyl::WeylOperator;
use crate::error::{Error, Result, param_err};
use crate::fbi::{PhaseSpaceGrid, fbi_adjoint, fbi_forward};
use crate::flow::{Bicharacteristic, FlowOptions, integrate_two_sided};
use crate::grid::{SpatialField, SpatialGrid};
use crate::phase_space::{
    LatticeIndex, PhasePoint, PhaseSpaceRegion, ScaleParams, coherent_state, lattice_points, partition_weights,
};
use crate::symbols::SymbolModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PacketProfile {
    /// Initial datum is the normalized coherent state at the label.
    Coherent,
    /// Initial datum is `T_r*(ψ_T T_r u₀)/α_T`, the packet's share of the data.
    Localized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PacketMode {
    Frozen,
    Exact,
}

#[derive(Clone, Debug)]
pub struct WavePacket {
    pub label: PhasePoint,
    pub index: Option<LatticeIndex>,
    pub alpha: f64,
    pub r: f64,
    pub profile: PacketProfile,
    pub bichar: Bicharacteristic,
    /// Unit-normalized `φ_T(0)`.
    pub initial: SpatialField,
}

/// Flow step used for packet bicharacteristics, relative to `√r`.
const FLOW_STEP_FRACTION: f64 = 1.0 / 16.0;

fn packet_flow(symbol: &SymbolModel, label: &PhasePoint, r: f64, span: (f64, f64)) -> Result<Bicharacteristic> {
    let lo = span.0.min(0.0);
    let hi = span.1.max(0.0);
    let (lo, hi) = if lo == hi { (lo, lo + 1.0) } else { (lo, hi) };
    let step = (FLOW_STEP_FRACTION * Float::sqrt(r)).min(0.25);
    integrate_two_sided(symbol, label, 0.0, lo, hi, step, &FlowOptions::unchecked())
}

impl WavePacket {
    /// Coherent packet at `label` with bicharacteristic covering `span`.
    pub fn coherent(symbol: &SymbolModel, label: PhasePoint, r: f64, grid: &SpatialGrid, span: (f64, f64)) -> Result<Self> {
        let (c, _) = coherent_state(&label.x, &label.xi, r, grid)?;
        let bichar = packet_flow(symbol, &label, r, span)?;
        Ok(Self { label, index: None, alpha: 1.0, r, profile: PacketProfile::Coherent, bichar, initial: c.normalized() })
    }

    pub fn rho(&self) -> f64 {
        1.0 / self.r
    }

    /// `e^{iψ} e^{iξ^t·(y−x^t)} e^{−ρ|y−x^t|²/2}`, normalized on the grid.
    pub fn frozen(&self, t: f64) -> Result<SpatialField> {
        let (x, xi, psi) = self.bichar.state_at(t)?;
        let g = self.initial.grid;
        let d = g.dim();
        let rho = self.rho();
        let f = SpatialField::from_fn(g, |y| {
            let mut q = 0.0;
            let mut ph = psi;
            for a in 0..d {
                let dy = g.wrap(y[a] - x[a]);
                q += dy * dy;
                ph += xi[a] * dy;
            }
            Complex64::from_polar(Float::exp(-rho * q / 2.0), ph)
        });
        Ok(f.normalized())
    }
}

/// `φ_T(t)` in the requested mode, unit-normalized.
pub fn packet_evolve(packet: &WavePacket, symbol: &SymbolModel, t: f64, mode: PacketMode) -> Result<SpatialField> {
    Ok(packet_evolve_many(packet, symbol, &[t], mode)?.remove(0))
}

/// `φ_T` at several times with a single reference solve in exact mode.
pub fn packet_evolve_many(packet: &WavePacket, symbol: &SymbolModel, times: &[f64], mode: PacketMode) -> Result<Vec<SpatialField>> {
    let (a, b) = packet.bichar.span();
    if let Some(&t) = times.iter().find(|&&t| !packet.bichar.covers(t)) {
        return Err(Error::Range { time: t, start: a, end: b });
    }
    match mode {
        PacketMode::Frozen => times.iter().map(|&t| packet.frozen(t)).collect(),
        PacketMode::Exact => {
            let tr = Propagator::new(symbol, packet.initial.grid, PropagateOptions::default())?.evolve(&packet.initial, 0.0, times)?;
            Ok(tr.fields.into_iter().map(|f| f.normalized()).collect())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecomposeOptions {
    /// Packets with `α < threshold · max α` are dropped.
    pub threshold: f64,
    /// Lattice padding around the region, in `d_r` units.
    pub lattice_pad: f64,
    pub propagate: PropagateOptions,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { threshold: 1e-8, lattice_pad: 8.0, propagate: PropagateOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub packets: Vec<WavePacket>,
    pub dropped: usize,
    /// `Σ α_T²` over all lattice cells (kept or not).
    pub alpha_sq_sum: f64,
    pub data_norm_sq: f64,
    /// `g(t) = S(t, 0)(u₀ − Σ α_T φ_T(0))`.
    pub remainder: FieldTrajectory,
    pub remainder_l2: Vec<f64>,
    pub remainder_linf: Vec<f64>,
}

/// Decompose `u0` into localized packets at scale `r` and report the remainder
/// `g(t) = u(t) − Σ α_T φ_T(t)` on `times`.
///
/// Exact-mode packets evolve linearly, so `Σ α_T φ_T(t) = S(t, 0) Σ α_T φ_T(0)`
/// and the remainder is one reference solve of the initial residual.
pub fn wavepacket_decompose(
    u0: &SpatialField,
    symbol: &SymbolModel,
    r: f64,
    region: &PhaseSpaceRegion,
    params: &ScaleParams,
    times: &[f64],
    opts: DecomposeOptions,
) -> Result<Decomposition> {
    let (lo, hi) = params.scale_range();
    if !(r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12)) {
        return Err(param_err!("scale r = {r} outside [nu^(-2-delta0), R] = [{lo}, {hi}]"));
    }
    if region.dim() != u0.grid.dim() || symbol.dim() != u0.grid.dim() {
        return Err(param_err!("region, symbol and data dimensions must agree"));
    }
    let s = Float::sqrt(r);
    let padded = region.clone().with_margins(region.margin_x + opts.lattice_pad * s, region.margin_xi + opts.lattice_pad / s)?;
    let lattice = lattice_points(r, &padded)?;
    let ps = PhaseSpaceGrid::new(u0.grid, r)?;
    let big_f = fbi_forward(u0, &ps)?;
    let pw = partition_weights(&lattice)?.periodic(u0.grid.half_width());
    let n = u0.grid.len();
    let d = lattice.dim;

    // Per-cell ψ_T F and α_T.
    let cells = crate::par::par_map_range(lattice.len(), |k| -> Result<(f64, Option<SpatialField>)> {
        let mut part = crate::fbi::PhaseSpaceField::zeros(ps);
        let mut mass = 0.0;
        for j in 0..ps.centers() {
            let xc = ps.x_center(j);
            let wx: f64 = (0..d).map(|a| pw.axis_x(lattice.indices[k].x[a], xc[a])).product();
            if wx == 0.0 {
                continue;
            }
            for q in 0..n {
                let xi = u0.grid.frequency(q);
                let w = wx * (0..d).map(|a| pw.axis_xi(lattice.indices[k].xi[a], xi[a])).product::<f64>();
                if w > 0.0 {
                    let v = big_f.values[j * n + q] * w;
                    mass += v.norm_sqr();
                    part.values[j * n + q] = v;
                }
            }
        }
        let alpha = Float::sqrt(mass * ps.cell());
        if alpha == 0.0 {
            return Ok((0.0, None));
        }
        Ok((alpha, Some(fbi_adjoint(&part, &u0.grid)?)))
    });
    let cells: Vec<(f64, Option<SpatialField>)> = cells.into_iter().collect::<Result<_>>()?;
    let alpha_sq_sum: f64 = cells.iter().map(|c| c.0 * c.0).sum();
    let amax = cells.iter().map(|c| c.0).fold(0.0, f64::max);
    let span = (
        times.iter().copied().fold(0.0, f64::min),
        times.iter().copied().fold(0.0, f64::max),
    );
    let mut residual = u0.clone();
    let mut packets = Vec::new();
    let mut dropped = 0;
    for (k, (alpha, piece)) in cells.into_iter().enumerate() {
        let Some(piece) = piece else { continue };
        if alpha < opts.threshold * amax {
            dropped += 1;
            continue;
        }
        residual = residual.sub(&piece)?;
        let label = lattice.points[k].clone();
        let bichar = packet_flow(symbol, &label, r, span)?;
        packets.push(WavePacket {
            label,
            index: Some(lattice.indices[k]),
            alpha,
            r,
            profile: super::PacketProfile::Localized,
            bichar,
            initial: piece.scaled(1.0 / alpha),
        });
    }
    let remainder = Propagator::new(symbol, u0.grid, opts.propagate)?.evolve(&residual, 0.0, times)?;
    let remainder_l2 = remainder.l2_norms();
    let remainder_linf = remainder.linf_norms();
    Ok(Decomposition { packets, dropped, alpha_sq_sum, data_norm_sq: u0.norm_sq(), remainder, remainder_l2, remainder_linf })
}

impl Decomposition {
    /// `Σ α_T φ_T(t)` evolved packet by packet (for cross-checking the linearity shortcut).
    pub fn superposition(&self, symbol: &SymbolModel, t: f64) -> Result<SpatialField> {
        let grid = self.remainder.grid();
        let mut acc = SpatialField::zeros(grid);
        let prop = Propagator::new(symbol, grid, PropagateOptions::default())?;
        for p in &self.packets {
            let f = prop.evolve(&p.initial, 0.0, &[t])?.fields.remove(0);
            acc.axpy(Complex64::new(p.alpha, 0.0), &f)?;
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DefectReport {
    pub times: Vec<f64>,
    /// `‖(i∂_t − a^w) φ_frozen(t)‖₂`.
    pub defect: Vec<f64>,
    pub max: f64,
}

/// Residual of the frozen Gaussian in the evolution equation, with `∂_t φ`
/// taken analytically from the bicharacteristic.
pub fn parametrix_defect(symbol: &SymbolModel, packet: &WavePacket, times: &[f64]) -> Result<DefectReport> {
    let grid = packet.initial.grid;
    let op = WeylOperator::new(symbol, grid)?;
    let d = grid.dim();
    let b = &packet.bichar;
    let rho = packet.rho();
    let mut defect = Vec::with_capacity(times.len());
    for &t in times {
        let phi = packet.frozen(t)?;
        let (x, xi, _) = b.state_at(t)?;
        let h = 1e-6 * (1.0 + Float::abs(t));
        let dstate = |s: f64| b.state_at(s);
        // Time derivatives of (x, ξ, ψ) by central differences of the Hermite interpolant,
        // which reproduces the stored flow derivatives at the nodes.
        let (lo, hi) = b.span();
        let (t1, t2) = ((t - h).max(lo), (t + h).min(hi));
        let (x1, k1, p1) = dstate(t1)?;
        let (x2, k2, p2) = dstate(t2)?;
        let dt = t2 - t1;
        let dx = [(x2[0] - x1[0]) / dt, (x2[1] - x1[1]) / dt];
        let dxi = [(k2[0] - k1[0]) / dt, (k2[1] - k1[1]) / dt];
        let dpsi = (p2 - p1) / dt;
        let mut residual = op.apply(&phi, t)?;
        for (k, v) in residual.values.iter_mut().enumerate() {
            let y = grid.position(k);
            let mut w = Complex64::new(0.0, dpsi);
            for a in 0..d {
                let dy = grid.wrap(y[a] - x[a]);
                w += Complex64::new(rho * dy * dx[a], dxi[a] * dy - xi[a] * dx[a]);
            }
            // i ∂_t φ − a^w φ
            *v = Complex64::new(0.0, 1.0) * w * phi.values[k] - *v;
        }
        defect.push(residual.norm_l2());
    }
    let max = defect.iter().copied().fold(0.0, f64::max);
    Ok(DefectReport { times: times.to_vec(), defect, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{Homogeneity, MetricField, make_custom, make_schrodinger};

    fn free() -> SymbolModel {
        make_schrodinger(MetricField::scaled_identity(1, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn initial_profiles_agree() {
        let g = SpatialGrid::new(1, 64.0, 512).unwrap();
        let p = WavePacket::coherent(&free(), PhasePoint::d1(4.0, 0.5), 16.0, &g, (-4.0, 4.0)).unwrap();
        let a = packet_evolve(&p, &free(), 0.0, PacketMode::Frozen).unwrap();
        let b = packet_evolve(&p, &free(), 0.0, PacketMode::Exact).unwrap();
        assert!(a.rel_diff(&b).unwrap() < 1e-12);
        assert!(matches!(packet_evolve(&p, &free(), 9.0, PacketMode::Frozen), Err(Error::Range { .. })));
    }

    #[test]
    fn frozen_tracks_exact_on_short_times() {
        let g = SpatialGrid::new(1, 128.0, 1024).unwrap();
        let r = 64.0;
        let s = free();
        let p = WavePacket::coherent(&s, PhasePoint::d1(0.0, 0.5), r, &g, (-8.0, 8.0)).unwrap();
        for t in [-8.0, 4.0, 8.0] {
            let a = packet_evolve(&p, &s, t, PacketMode::Frozen).unwrap();
            let b = packet_evolve(&p, &s, t, PacketMode::Exact).unwrap();
            assert!(a.sub(&b).unwrap().norm_l2() <= 0.2, "t {t}");
        }
    }

    #[test]
    fn linear_symbol_has_no_defect() {
        let g = SpatialGrid::new(1, 64.0, 512).unwrap();
        let s = make_custom(1, |_, _, xi| 0.7 * xi[0], Homogeneity::One, false, 1.0).unwrap().mark_constant_coefficient();
        let p = WavePacket::coherent(&s, PhasePoint::d1(0.0, 0.3), 16.0, &g, (0.0, 10.0)).unwrap();
        let rep = parametrix_defect(&s, &p, &[0.0, 3.0, 10.0]).unwrap();
        assert!(rep.max <= 1e-8, "{rep:?}");
    }

    #[test]
    fn schrodinger_defect_decays_with_scale() {
        let s = free();
        let mut pts = Vec::new();
        for r in [64.0f64, 256.0, 1024.0] {
            let g = SpatialGrid::new(1, 8.0 * r.sqrt(), 1024).unwrap();
            let p = WavePacket::coherent(&s, PhasePoint::d1(0.0, 0.4), r, &g, (0.0, r.sqrt())).unwrap();
            let rep = parametrix_defect(&s, &p, &[0.0, r.sqrt()]).unwrap();
            assert!(rep.defect[0].is_finite() && rep.defect[0] > 0.0);
            pts.push((r.ln(), rep.max.ln()));
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let fit = crate::fit::least_squares(&xs, &ys).unwrap();
        assert!(fit.slope <= -0.4, "slope {}", fit.slope);
    }

    #[test]
    fn decomposition_of_single_coherent_state() {
        let g = SpatialGrid::new(1, 128.0, 1024).unwrap();
        let r = 64.0;
        let s = free();
        let params = ScaleParams::new(r, 0.5, 0.1, 0.05).unwrap();
        let region = PhaseSpaceRegion::ball(&[0.0], 16.0, &[0.0], 0.5).unwrap();
        let (u0, _) = coherent_state(&[8.0], &[0.25], r, &g).unwrap();
        let times = [-r, -8.0, 0.0, 8.0, r];
        let dec = wavepacket_decompose(&u0, &s, r, &region, &params, &times, DecomposeOptions::default()).unwrap();
        let top = dec.packets.iter().max_by(|a, b| a.alpha.total_cmp(&b.alpha)).unwrap();
        assert_eq!(top.label, PhasePoint::d1(8.0, 0.25));
        for l2 in &dec.remainder_l2 {
            assert!(*l2 <= 1e-3 * u0.norm_l2(), "{l2}");
        }
        assert!(dec.alpha_sq_sum <= dec.data_norm_sq * (1.0 + 1e-6));
        let sup = dec.superposition(&s, 8.0).unwrap();
        let full = Propagator::new(&s, g, PropagateOptions::default()).unwrap().evolve(&u0, 0.0, &[8.0]).unwrap();
        let g8 = full.fields[0].sub(&sup).unwrap();
        assert!((g8.norm_l2() - dec.remainder_l2[3]).abs() < 1e-8);
        let zero = wavepacket_decompose(&SpatialField::zeros(g), &s, r, &region, &params, &times, DecomposeOptions::default()).unwrap();
        assert!(zero.packets.is_empty() && zero.remainder_l2.iter().all(|v| *v == 0.0));
    }
}
