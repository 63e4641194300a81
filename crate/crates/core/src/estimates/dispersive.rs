//! Empirical decay exponent of `‖u(t)‖_∞` under a reference evolution.

use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fit::{LineFit, least_squares};
use crate::grid::SpatialField;
use crate::propagate::{PropagateOptions, SolverMeta, propagate_reference};
use crate::symbols::{Homogeneity, SymbolModel};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DispersiveRow {
    pub t: f64,
    pub linf: f64,
    pub l2: f64,
    /// `‖u(t)‖_∞ / ‖u(0)‖_∞`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersiveFit {
    /// Starts with the `t = 0` normalisation row.
    pub rows: Vec<DispersiveRow>,
    pub fit: LineFit,
    /// `−d/2` for homogeneity 2, `−(d−1)/2` for homogeneity 1.
    pub expected: Option<f64>,
    pub meta: SolverMeta,
}

impl DispersiveFit {
    pub fn slope(&self) -> f64 {
        self.fit.slope
    }
}

/// Fits `log ‖u(t)‖_∞` against `log(1 + t)` over the positive `times`.
pub fn dispersive_fit(symbol: &SymbolModel, u0: &SpatialField, times: &[f64], opts: PropagateOptions) -> Result<DispersiveFit> {
    let mut ts: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 4 {
        return Err(Error::Fit(alloc::format!("need at least 4 positive times, got {}", ts.len())));
    }
    let mut all = alloc::vec![0.0];
    all.extend(&ts);
    let traj = propagate_reference(symbol, u0, 0.0, &all, opts)?;
    let base = traj.fields[0].norm_inf();
    let rows: Vec<DispersiveRow> = traj
        .times
        .iter()
        .zip(&traj.fields)
        .map(|(&t, f)| {
            let linf = f.norm_inf();
            DispersiveRow { t, linf, l2: f.norm_l2(), ratio: linf / base }
        })
        .collect();
    let xs: Vec<f64> = rows[1..].iter().map(|r| Float::ln(1.0 + r.t)).collect();
    let ys: Vec<f64> = rows[1..].iter().map(|r| Float::ln(r.linf)).collect();
    let fit = least_squares(&xs, &ys)?;
    let d = symbol.dim() as f64;
    let expected = match symbol.homogeneity() {
        Homogeneity::Two => Some(-d / 2.0),
        Homogeneity::One => Some(-(d - 1.0) / 2.0),
        Homogeneity::None => None,
    };
    Ok(DispersiveFit { rows, fit, expected, meta: traj.meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use crate::symbols::{FrequencyCutoff, MetricField, make_schrodinger};
    use num_complex::Complex64;

    #[test]
    fn free_schrodinger_gaussian() {
        let g = SpatialGrid::new(1, 2048.0, 8192).unwrap();
        let sigma = 2.0;
        let u0 = SpatialField::from_fn(g, |y| Complex64::new(Float::exp(-y[0] * y[0] / (2.0 * sigma * sigma)), 0.0));
        let sym = make_schrodinger(MetricField::scaled_identity(1, 1.0).unwrap())
            .unwrap()
            .with_cutoff(FrequencyCutoff::Ball { radius: 2.0 });
        let times = [16.0, 32.0, 64.0, 128.0, 256.0];
        let r = dispersive_fit(&sym, &u0, &times, PropagateOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert_eq!(r.rows[0].t, 0.0);
        assert!((r.rows[0].ratio - 1.0).abs() < 1e-15);
        assert!((r.slope() + 0.5).abs() < 0.05, "slope {}", r.slope());
        // Closed-form amplitude (1 + 4t²/σ⁴)^{-1/4}.
        for row in &r.rows[1..] {
            let exact = Float::powf(1.0 + 4.0 * row.t * row.t / Float::powi(sigma, 4), -0.25);
            assert!((row.ratio / exact - 1.0).abs() < 1e-3);
        }
        assert!(matches!(dispersive_fit(&sym, &u0, &times[..3], PropagateOptions::default()), Err(Error::Fit(_))));
    }
}
