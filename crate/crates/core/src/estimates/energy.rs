//! Energy-difference function, energy shells, and conservation tests for
//! packet quadruples.

use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Result, param_err};
use crate::math::{dist, norm};
use crate::phase_space::pad;
use crate::propagate::WavePacket;
use crate::symbols::SymbolModel;

use super::norms::SpaceTimeCube;

/// `F(η) = p₁(z, ξ₁) + p₂(z, η + ξ₂′ − ξ₁) − p₁(z, η) − p₂(z, ξ₂′)` with `z = (x, t)`.
pub fn energy_difference(sym1: &SymbolModel, sym2: &SymbolModel, z: (&[f64], f64), xi1: &[f64], xi2p: &[f64], eta: &[f64]) -> f64 {
    let (x, t) = (pad(z.0), z.1);
    let (a, b, e) = (pad(xi1), pad(xi2p), pad(eta));
    let shifted = [e[0] + b[0] - a[0], e[1] + b[1] - a[1]];
    sym1.eval(x, t, a) + sym2.eval(x, t, shifted) - sym1.eval(x, t, e) - sym2.eval(x, t, b)
}

/// `∇_η F = ∂_ξ p₂(z, η + ξ₂′ − ξ₁) − ∂_ξ p₁(z, η)`.
pub fn energy_gradient(sym1: &SymbolModel, sym2: &SymbolModel, z: (&[f64], f64), xi1: &[f64], xi2p: &[f64], eta: &[f64]) -> Vec<f64> {
    let d = sym1.dim();
    let (x, t) = (pad(z.0), z.1);
    let (a, b, e) = (pad(xi1), pad(xi2p), pad(eta));
    let shifted = [e[0] + b[0] - a[0], e[1] + b[1] - a[1]];
    let g2 = sym2.jet(x, t, shifted).dxi;
    let g1 = sym1.jet(x, t, e).dxi;
    (0..d).map(|i| g2[i] - g1[i]).collect()
}

/// Uniform tensor grid of frequencies, `per_axis` points on `[lo, hi]` per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrequencyGrid {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
    pub per_axis: usize,
}

impl FrequencyGrid {
    pub fn new(dim: usize, lo: f64, hi: f64, per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) || !(hi > lo) || per_axis < 2 {
            return Err(param_err!("frequency grid needs d in {{1, 2}}, hi > lo and at least 2 points"));
        }
        Ok(Self { dim, lo, hi, per_axis })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.per_axis - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        let h = self.spacing();
        let n = self.per_axis;
        (0..self.dim).map(|a| self.lo + h * ((k / n.pow(a as u32)) % n) as f64).collect()
    }
}

/// Every grid frequency with `|F(η)| ≤ tol`, in grid order.
pub fn energy_shell_sample(
    sym1: &SymbolModel,
    sym2: &SymbolModel,
    z: (&[f64], f64),
    xi1: &[f64],
    xi2p: &[f64],
    tol: f64,
    grid: &FrequencyGrid,
) -> Result<Vec<Vec<f64>>> {
    if !(tol > 0.0) {
        return Err(param_err!("shell tolerance must be positive"));
    }
    if grid.dim != sym1.dim() {
        return Err(param_err!("frequency grid dimension differs from the symbol"));
    }
    Ok((0..grid.len())
        .map(|k| grid.point(k))
        .filter(|eta| Float::abs(energy_difference(sym1, sym2, z, xi1, xi2p, eta)) <= tol)
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConservationFlags {
    pub position_ok: bool,
    pub momentum_ok: bool,
    pub energy_ok: bool,
    /// Largest pairwise distance of the four centres at `t_q`.
    pub position_spread: f64,
    pub momentum_defect: f64,
    pub energy_defect: f64,
    pub position_threshold: f64,
    pub frequency_threshold: f64,
}

impl ConservationFlags {
    pub fn all(&self) -> bool {
        self.position_ok && self.momentum_ok && self.energy_ok
    }
}

/// Position, momentum and energy tests at the cube's centre for a quadruple
/// ordered `[T₁, T₁′, T₂, T₂′]`; `T₁, T₁′` follow `sym1` and `T₂, T₂′` follow `sym2`.
pub fn conservation_flags(
    sym1: &SymbolModel,
    sym2: &SymbolModel,
    quad: [&WavePacket; 4],
    q: &SpaceTimeCube,
    big_r: f64,
    delta: f64,
) -> Result<ConservationFlags> {
    let d = sym1.dim();
    let tq = q.center_t;
    let mut xs = Vec::with_capacity(4);
    let mut xis = Vec::with_capacity(4);
    for p in quad {
        let (x, xi, _) = p.bichar.state_at(tq)?;
        xs.push(x);
        xis.push(xi);
    }
    let mut spread: f64 = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            spread = spread.max(dist(&xs[i][..d], &xs[j][..d]));
        }
    }
    let m: Vec<f64> = (0..d).map(|a| xis[0][a] + xis[2][a] - xis[1][a] - xis[3][a]).collect();
    let zx = pad(&q.center_x);
    let e = sym1.eval(zx, tq, xis[0]) + sym2.eval(zx, tq, xis[2]) - sym1.eval(zx, tq, xis[1]) - sym2.eval(zx, tq, xis[3]);
    let pos_thr = Float::powf(big_r, 0.5 + delta);
    let freq_thr = Float::powf(big_r, -0.5 + delta);
    let momentum_defect = norm(&m);
    let energy_defect = Float::abs(e);
    Ok(ConservationFlags {
        position_ok: spread <= pos_thr,
        momentum_ok: momentum_defect <= freq_thr,
        energy_ok: energy_defect <= freq_thr,
        position_spread: spread,
        momentum_defect,
        energy_defect,
        position_threshold: pos_thr,
        frequency_threshold: freq_thr,
    })
}
