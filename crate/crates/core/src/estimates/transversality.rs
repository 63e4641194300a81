//! Relative-velocity functionals for a pair of bicharacteristics.

use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Result, param_err};
use crate::flow::{Bicharacteristic, SINGULAR_CONDITION, averaged_hessian};
use crate::linalg::{inverse2, quad_form, sym_condition};
use crate::math::norm;
use crate::symbols::SymbolModel;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransversalityReport {
    pub time: f64,
    /// `∂_ξp₁ − ∂_ξp₂` along the two rays.
    pub delta_v: Vec<f64>,
    pub delta_v_norm: f64,
    /// `⟨Δ_v, (∂²_ξ p_j)^{-1} Δ_v⟩`; `None` when the Hessian is singular.
    pub quad_forms: [Option<f64>; 2],
    /// `⟨ξ_j/|ξ_j|, Δ_v⟩`; `None` at `ξ_j = 0`.
    pub projections: [Option<f64>; 2],
    /// `⟨Δ_v, A^{-1} Δ_v⟩` with `A` the time-averaged Hessian of `p₁`.
    pub averaged: Option<f64>,
}

impl TransversalityReport {
    /// Ratios `|Δ_v|/ν` and `|quad form|/ν²` for checks against a separation scale.
    pub fn ratios(&self, nu: f64) -> (f64, [Option<f64>; 2]) {
        let q = self.quad_forms.map(|o| o.map(|v| Float::abs(v) / (nu * nu)));
        (self.delta_v_norm / nu, q)
    }
}

/// Evaluates all transversality functionals at time `t`. When
/// `average_from` is set the averaged-Hessian entry integrates `∂²_ξ p₁`
/// along `b1` from that time to `t`.
pub fn transversality_check(
    sym1: &SymbolModel,
    sym2: &SymbolModel,
    b1: &Bicharacteristic,
    b2: &Bicharacteristic,
    t: f64,
    average_from: Option<f64>,
) -> Result<TransversalityReport> {
    let d = sym1.dim();
    if sym2.dim() != d || b1.dim != d || b2.dim != d {
        return Err(param_err!("symbols and bicharacteristics must share a dimension"));
    }
    let (x1, xi1, _) = b1.state_at(t)?;
    let (x2, xi2, _) = b2.state_at(t)?;
    let j1 = sym1.jet(x1, t, xi1);
    let j2 = sym2.jet(x2, t, xi2);
    let dv: Vec<f64> = (0..d).map(|i| j1.dxi[i] - j2.dxi[i]).collect();
    let qf = |h: &crate::linalg::Mat2| {
        if sym_condition(h, d) > SINGULAR_CONDITION {
            return None;
        }
        inverse2(h, d).map(|inv| quad_form(&inv, &dv, d))
    };
    let proj = |xi: [f64; 2]| {
        let n = norm(&xi[..d]);
        (n > 0.0).then(|| (0..d).map(|i| xi[i] / n * dv[i]).sum())
    };
    let averaged = match average_from {
        Some(tq) => {
            let a = averaged_hessian(sym1, b1, tq, t)?;
            if a.invertible { inverse2(&a.matrix, d).map(|inv| quad_form(&inv, &dv, d)) } else { None }
        }
        None => None,
    };
    Ok(TransversalityReport {
        time: t,
        delta_v_norm: norm(&dv),
        quad_forms: [qf(&j1.dxixi), qf(&j2.dxixi)],
        projections: [proj(xi1), proj(xi2)],
        averaged,
        delta_v: dv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{FlowOptions, integrate_bicharacteristic};
    use crate::phase_space::PhasePoint;
    use crate::symbols::{MetricField, make_halfwave, make_schrodinger};

    fn ray(sym: &SymbolModel, x: &[f64], xi: &[f64]) -> Bicharacteristic {
        let start = PhasePoint { x: x.to_vec(), xi: xi.to_vec() };
        integrate_bicharacteristic(sym, &start, (0.0, 2.0), 64, &FlowOptions::unchecked()).unwrap()
    }

    #[test]
    fn paraboloid_pair() {
        let p = make_schrodinger(MetricField::scaled_identity(2, 1.0).unwrap()).unwrap();
        let b1 = ray(&p, &[0.0, 0.0], &[0.6, 0.1]);
        let b2 = ray(&p, &[1.0, 0.0], &[0.2, 0.4]);
        let r = transversality_check(&p, &p, &b1, &b2, 1.0, Some(0.0)).unwrap();
        let dxi = [0.4, -0.3];
        assert!((r.delta_v[0] - 0.8).abs() < 1e-12 && (r.delta_v[1] + 0.6).abs() < 1e-12);
        let expect = 2.0 * (dxi[0] * dxi[0] + dxi[1] * dxi[1]);
        for q in r.quad_forms {
            assert!((q.unwrap() - expect).abs() < 1e-12);
        }
        assert!((r.averaged.unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn halfwave_projection_and_singular_hessian() {
        let (n1, n2) = (1.0, 0.49);
        let h1 = make_halfwave(MetricField::scaled_identity(2, n1).unwrap()).unwrap();
        let h2 = make_halfwave(MetricField::scaled_identity(2, n2).unwrap()).unwrap();
        let dir = [0.6, 0.8];
        let b1 = ray(&h1, &[0.0, 0.0], &dir);
        let b2 = ray(&h2, &[0.0, 0.0], &[2.0 * dir[0], 2.0 * dir[1]]);
        let r = transversality_check(&h1, &h2, &b1, &b2, 0.5, None).unwrap();
        let want = Float::sqrt(n1) - Float::sqrt(n2);
        assert!((r.projections[0].unwrap() - want).abs() < 1e-10);
        assert!((r.projections[1].unwrap() - want).abs() < 1e-10);
        assert_eq!(r.quad_forms, [None, None]);
    }

    #[test]
    fn identical_rays_have_zero_velocity_gap() {
        let p = make_schrodinger(MetricField::cosine_perturbed(1, 1.0, 0.1, 1.0, 8.0 * core::f64::consts::PI).unwrap()).unwrap();
        let b = ray(&p, &[0.3], &[0.7]);
        let r = transversality_check(&p, &p, &b, &b, 1.5, None).unwrap();
        assert_eq!(r.delta_v_norm, 0.0);
    }
}
