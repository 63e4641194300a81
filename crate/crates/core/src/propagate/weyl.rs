//! Weyl quantization `a^w u(x) = (2π)^{−d} ∫∫ e^{i(x−y)ξ} a((x+y)/2, t, ξ) u(y) dy dξ`
//! of the cut-off symbol on the periodic grid.
//!
//! Three backends: an exact Fourier multiplier for ξ-only symbols, a
//! spectral form for symbols that are sums of `m(x, t) b(ξ)` (metric-based
//! symbols with isotropic half-wave metrics), and a dense midpoint kernel in
//! d = 1 for anything else.

use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::{Spectral, SpatialField, SpatialGrid};
use crate::math::Vec2;
use crate::symbols::{FrequencyCutoff, MetricField, SymbolModel};

/// Largest grid size the dense midpoint kernel accepts.
pub const DENSE_MAX_POINTS: usize = 1024;

/// Relative size below which metric Fourier modes are dropped.
const MODE_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Backend {
    Multiplier,
    Separable,
    Dense,
}

/// ξ factor of one separable term.
#[derive(Clone, Copy, Debug)]
enum XiFactor {
    /// `w ξ_i ξ_j`.
    Quadratic(usize, usize, f64),
    /// `|ξ|`.
    Abs,
}

#[derive(Clone, Copy, Debug)]
enum XFactor {
    /// `g^{ij}(x, t)`.
    Entry(usize, usize),
    /// `(g^{11}(x, t))^{1/2}`.
    SqrtEntry,
}

#[derive(Clone, Debug)]
struct Term {
    x: XFactor,
    xi: XiFactor,
}

/// Per-term retained modes `(dft index, M_j / N^d)` with their kernel tables
/// `b((ζ_k + ζ_{k−j})/2)` over output index `k`.
#[derive(Clone, Debug)]
struct SeparableData {
    modes: Vec<Vec<RetainedMode>>,
}

type RetainedMode = ([usize; 2], Complex64, Vec<f64>);

#[derive(Clone, Debug)]
enum Cache {
    Multiplier(Vec<f64>),
    Separable(SeparableData),
    Dense(Vec<Complex64>),
}

#[derive(Clone, Debug)]
pub struct WeylOperator {
    symbol: SymbolModel,
    grid: SpatialGrid,
    spectral: Spectral,
    backend: Backend,
    terms: Vec<Term>,
    cache: Option<Cache>,
}

fn isotropic(metric: &MetricField, grid: &SpatialGrid) -> bool {
    if metric.dim() == 1 {
        return true;
    }
    let times: &[f64] = if metric.is_time_dependent() { &[0.0, 0.5, 1.0] } else { &[0.0] };
    let stride = (grid.len() / 4096).max(1);
    times.iter().all(|&t| {
        (0..grid.len()).step_by(stride).all(|k| {
            let g = metric.eval(grid.position(k), t);
            let s = Float::abs(g[0][0]) + Float::abs(g[1][1]);
            Float::abs(g[0][1]) <= 1e-14 * s && Float::abs(g[0][0] - g[1][1]) <= 1e-14 * s
        })
    })
}

fn separable_terms(symbol: &SymbolModel, grid: &SpatialGrid) -> Option<Vec<Term>> {
    let metric = symbol.metric()?;
    let d = symbol.dim();
    if symbol.is_schrodinger() {
        let mut t = alloc::vec![Term { x: XFactor::Entry(0, 0), xi: XiFactor::Quadratic(0, 0, 1.0) }];
        if d == 2 {
            t.push(Term { x: XFactor::Entry(1, 1), xi: XiFactor::Quadratic(1, 1, 1.0) });
            t.push(Term { x: XFactor::Entry(0, 1), xi: XiFactor::Quadratic(0, 1, 2.0) });
        }
        Some(t)
    } else if symbol.is_halfwave() && isotropic(metric, grid) {
        Some(alloc::vec![Term { x: XFactor::SqrtEntry, xi: XiFactor::Abs }])
    } else {
        None
    }
}

fn xi_factor(f: XiFactor, cutoff: FrequencyCutoff, xi: Vec2) -> f64 {
    let n = Float::hypot(xi[0], xi[1]);
    let c = cutoff.factor(n);
    if c == 0.0 {
        return 0.0;
    }
    c * match f {
        XiFactor::Quadratic(i, j, w) => w * xi[i] * xi[j],
        XiFactor::Abs => n,
    }
}

impl WeylOperator {
    /// Picks the cheapest exact backend for `symbol`.
    pub fn new(symbol: &SymbolModel, grid: SpatialGrid) -> Result<Self> {
        let backend = if symbol.is_constant_coefficient() {
            Backend::Multiplier
        } else if separable_terms(symbol, &grid).is_some() {
            Backend::Separable
        } else {
            Backend::Dense
        };
        Self::with_backend(symbol, grid, backend)
    }

    pub fn with_backend(symbol: &SymbolModel, grid: SpatialGrid, backend: Backend) -> Result<Self> {
        if symbol.dim() != grid.dim() {
            return Err(Error::GridMismatch("symbol and grid dimensions differ".into()));
        }
        if let Some(r) = symbol.cutoff().support_radius() {
            if r > grid.nyquist() {
                return Err(Error::Resolution(alloc::format!(
                    "symbol support radius {r} exceeds the grid Nyquist frequency {}",
                    grid.nyquist()
                )));
            }
        }
        let terms = match backend {
            Backend::Multiplier => {
                if !symbol.is_constant_coefficient() {
                    return Err(Error::Unsupported("multiplier backend needs a constant-coefficient symbol".into()));
                }
                Vec::new()
            }
            Backend::Separable => separable_terms(symbol, &grid)
                .ok_or_else(|| Error::Unsupported("symbol is not a sum of separable terms".into()))?,
            Backend::Dense => {
                if grid.dim() != 1 || grid.points() > DENSE_MAX_POINTS {
                    return Err(Error::Unsupported(alloc::format!(
                        "dense Weyl kernel needs d = 1 and at most {DENSE_MAX_POINTS} points"
                    )));
                }
                Vec::new()
            }
        };
        let mut op = Self { symbol: symbol.clone(), grid, spectral: Spectral::new(grid)?, backend, terms, cache: None };
        if !symbol.is_time_dependent() {
            op.cache = Some(op.build(0.0));
        }
        Ok(op)
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn symbol(&self) -> &SymbolModel {
        &self.symbol
    }

    fn build(&self, t: f64) -> Cache {
        match self.backend {
            Backend::Multiplier => Cache::Multiplier(
                (0..self.grid.len()).map(|k| self.symbol.eval_cut([0.0; 2], t, self.grid.frequency(k))).collect(),
            ),
            Backend::Separable => Cache::Separable(self.build_separable(t)),
            Backend::Dense => Cache::Dense(self.build_dense(t)),
        }
    }

    fn build_separable(&self, t: f64) -> SeparableData {
        let g = self.grid;
        let n = g.points();
        let len = g.len();
        let metric = self.symbol.metric().expect("separable symbols carry a metric");
        let cutoff = self.symbol.cutoff();
        let mut modes = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let samples: Vec<Complex64> = (0..len)
                .map(|k| {
                    let m = metric.eval(g.position(k), t);
                    Complex64::new(
                        match term.x {
                            XFactor::Entry(i, j) => m[i][j],
                            XFactor::SqrtEntry => Float::sqrt(m[0][0]),
                        },
                        0.0,
                    )
                })
                .collect();
            let coeffs = self.spectral.forward(&samples);
            let top = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let mut kept = Vec::new();
            for (j, c) in coeffs.iter().enumerate() {
                if c.norm() <= MODE_TOL * top {
                    continue;
                }
                let jj = if g.dim() == 1 { [j, 0] } else { [j / n, j % n] };
                let table: Vec<f64> = (0..len)
                    .map(|k| {
                        let src = self.shift(k, jj);
                        let (a, b) = (g.frequency(k), g.frequency(src));
                        xi_factor(term.xi, cutoff, [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0])
                    })
                    .collect();
                kept.push((jj, *c / len as f64, table));
            }
            modes.push(kept);
        }
        SeparableData { modes }
    }

    /// Flat index of `k − j` (componentwise, cyclic).
    fn shift(&self, k: usize, j: [usize; 2]) -> usize {
        let n = self.grid.points();
        if self.grid.dim() == 1 {
            (k + n - j[0]) % n
        } else {
            let (k1, k2) = (k / n, k % n);
            ((k1 + n - j[0]) % n) * n + (k2 + n - j[1]) % n
        }
    }

    /// Rows indexed by midpoint half-index `μ = n + m` (the unwrapped average
    /// `(x_n + x_m)/2`, so symbols linear in x quantize to `(XD + DX)/2`),
    /// columns by cyclic offset.
    fn build_dense(&self, t: f64) -> Vec<Complex64> {
        let g = self.grid;
        let n = g.points();
        let h = g.spacing();
        let rows = crate::par::par_map_range(2 * n, |mu| {
            let x = -g.half_width() + mu as f64 * h / 2.0;
            let a: Vec<Complex64> =
                (0..n).map(|k| Complex64::new(self.symbol.eval_cut([x, 0.0], t, g.frequency(k)), 0.0)).collect();
            self.spectral.inverse(&a)
        });
        rows.concat()
    }

    fn cache_at(&self, t: f64) -> alloc::borrow::Cow<'_, Cache> {
        match &self.cache {
            Some(c) => alloc::borrow::Cow::Borrowed(c),
            None => alloc::borrow::Cow::Owned(self.build(t)),
        }
    }

    /// `a^w(t) u`.
    pub fn apply(&self, u: &SpatialField, t: f64) -> Result<SpatialField> {
        if u.grid != self.grid {
            return Err(Error::GridMismatch("field grid differs from the operator grid".into()));
        }
        let cache = self.cache_at(t);
        let values = match cache.as_ref() {
            Cache::Dense(table) => self.dense_apply(table, &u.values),
            other => {
                let mut v = self.spectral.forward(&u.values);
                v = self.hat_apply(other, &v);
                self.spectral.inverse_in_place(&mut v);
                v
            }
        };
        SpatialField::from_values(self.grid, values)
    }

    /// Action on raw DFT coefficients: returns the coefficients of `a^w(t) u`.
    pub fn apply_hat(&self, uhat: &[Complex64], t: f64) -> Vec<Complex64> {
        let cache = self.cache_at(t);
        match cache.as_ref() {
            Cache::Dense(table) => {
                let u = self.spectral.inverse(uhat);
                let mut v = self.dense_apply(table, &u);
                self.spectral.forward_in_place(&mut v);
                v
            }
            other => self.hat_apply(other, uhat),
        }
    }

    fn hat_apply(&self, cache: &Cache, uh: &[Complex64]) -> Vec<Complex64> {
        match cache {
            Cache::Multiplier(m) => uh.iter().zip(m).map(|(c, a)| c * *a).collect(),
            Cache::Separable(data) => {
                let mut out = alloc::vec![Complex64::new(0.0, 0.0); uh.len()];
                for term in &data.modes {
                    for (j, c, table) in term {
                        for (k, o) in out.iter_mut().enumerate() {
                            let b = table[k];
                            if b != 0.0 {
                                *o += c * b * uh[self.shift(k, *j)];
                            }
                        }
                    }
                }
                out
            }
            Cache::Dense(_) => unreachable!("dense kernels act in physical space"),
        }
    }

    fn dense_apply(&self, table: &[Complex64], u: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.points();
        crate::par::par_map_range(n, |i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..n {
                let delta = (i + n - m) % n;
                acc += table[(i + m) * n + delta] * u[m];
            }
            acc
        })
    }

    /// x-averaged symbol `ā(ξ)` at `t = 0` on the DFT frequencies: the
    /// constant-coefficient part split off by integrating-factor schemes.
    pub fn mean_multiplier(&self) -> Vec<f64> {
        let g = self.grid;
        match self.cache_at(0.0).as_ref() {
            Cache::Multiplier(m) => m.clone(),
            Cache::Separable(data) => {
                let mut out = alloc::vec![0.0; g.len()];
                for term in &data.modes {
                    for (j, c, table) in term {
                        if *j == [0, 0] {
                            for (o, b) in out.iter_mut().zip(table) {
                                *o += c.re * b;
                            }
                        }
                    }
                }
                out
            }
            Cache::Dense(_) => (0..g.len())
                .map(|k| {
                    let z = g.frequency(k);
                    (0..g.len()).map(|n| self.symbol.eval_cut(g.position(n), 0.0, z)).sum::<f64>() / g.len() as f64
                })
                .collect(),
        }
    }

    /// Power-iteration estimate of `‖a^w(t)‖` (exact for the multiplier backend).
    pub fn norm_estimate(&self, t: f64) -> Result<f64> {
        if let Some(Cache::Multiplier(m)) = &self.cache {
            return Ok(m.iter().fold(0.0f64, |a, v| a.max(Float::abs(*v))));
        }
        let mut s: u64 = 0x9E37_79B9_7F4A_7C15;
        let start = (0..self.grid.len())
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                Complex64::new((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5, 0.0)
            })
            .collect();
        let mut v = SpatialField::from_values(self.grid, start)?;
        let mut lambda = 0.0;
        for _ in 0..60 {
            let n0 = v.norm_l2();
            if n0 == 0.0 {
                return Ok(0.0);
            }
            v = v.scaled(1.0 / n0);
            let w = self.apply(&v, t)?;
            lambda = w.norm_l2();
            v = w;
        }
        Ok(lambda)
    }
}

/// One-shot `a^w(t) u` with the automatically chosen backend.
pub fn weyl_apply(symbol: &SymbolModel, u: &SpatialField, t: f64) -> Result<SpatialField> {
    WeylOperator::new(symbol, u.grid)?.apply(u, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{Homogeneity, make_custom, make_halfwave, make_schrodinger};

    fn grid() -> SpatialGrid {
        SpatialGrid::new(1, 16.0, 256).unwrap()
    }

    fn gaussian(g: SpatialGrid, x0: f64, k0: f64) -> SpatialField {
        SpatialField::from_fn(g, |y| Complex64::from_polar(Float::exp(-(y[0] - x0).powi(2) / 4.0), k0 * y[0]))
    }

    #[test]
    fn xi_symbol_is_multiplier() {
        let g = grid();
        let a = make_custom(1, |_, _, xi| xi[0], Homogeneity::One, false, 1.0).unwrap();
        let k = g.wavenumber(5);
        let u = SpatialField::from_fn(g, |y| Complex64::from_polar(1.0, k * y[0]));
        let out = weyl_apply(&a, &u, 0.0).unwrap();
        let mut expect = u.clone();
        expect.scale(Complex64::new(k, 0.0));
        assert!(out.sub(&expect).unwrap().norm_inf() < 1e-8);
        let m = WeylOperator::with_backend(&a.clone().mark_constant_coefficient(), g, Backend::Multiplier).unwrap();
        assert!(m.apply(&u, 0.0).unwrap().sub(&expect).unwrap().norm_inf() < 1e-10);
    }

    #[test]
    fn x_symbol_is_multiplication() {
        let g = grid();
        let a = make_custom(1, |x, _, _| x[0], Homogeneity::None, false, 1.0).unwrap();
        let u = gaussian(g, 1.0, 0.5);
        let out = weyl_apply(&a, &u, 0.0).unwrap();
        let expect = SpatialField::from_fn(g, |y| y[0] * u.values[g.nearest_index(y[0])]);
        assert!(out.sub(&expect).unwrap().norm_inf() < 1e-12);
    }

    #[test]
    fn x_xi_symbol_is_symmetrized_derivative() {
        let g = grid();
        let a = make_custom(1, |x, _, xi| x[0] * xi[0], Homogeneity::None, false, 1.0).unwrap();
        let u = gaussian(g, 0.5, 1.0);
        let out = weyl_apply(&a, &u, 0.0).unwrap();
        // Oracle: −i(x u' + (x u)')/2 = −i(x u' + u/2) with the closed-form derivative.
        let expect = SpatialField::from_fn(g, |y| {
            let x = y[0];
            let v = u.values[g.nearest_index(x)];
            let du = v * Complex64::new(-(x - 0.5) / 2.0, 1.0);
            Complex64::new(0.0, -1.0) * (x * du + v * 0.5)
        });
        let diff = out.sub(&expect).unwrap();
        let worst = (0..g.len()).max_by(|&i, &j| diff.values[i].norm().total_cmp(&diff.values[j].norm())).unwrap();
        assert!(diff.norm_l2() < 1e-8 * expect.norm_l2(), "{} at {}", diff.norm_l2() / expect.norm_l2(), g.coord(worst));
    }

    #[test]
    fn separable_matches_dense() {
        let g = SpatialGrid::new(1, 8.0 * core::f64::consts::PI, 256).unwrap();
        let m = MetricField::cosine_perturbed(1, 1.0, 0.3, 2.0, g.half_width()).unwrap();
        for sym in [make_schrodinger(m.clone()).unwrap(), make_halfwave(m).unwrap()] {
            let sep = WeylOperator::new(&sym, g).unwrap();
            assert_eq!(sep.backend(), Backend::Separable);
            let dense = WeylOperator::with_backend(&sym, g, Backend::Dense).unwrap();
            let u = gaussian(g, 1.0, 0.8);
            let a = sep.apply(&u, 0.0).unwrap();
            let b = dense.apply(&u, 0.0).unwrap();
            assert!(a.rel_diff(&b).unwrap() < 1e-10, "{}", a.rel_diff(&b).unwrap());
        }
    }

    #[test]
    fn self_adjoint() {
        let g = SpatialGrid::new(2, 4.0 * core::f64::consts::PI, 64).unwrap();
        let m = MetricField::cosine_perturbed(2, 1.0, 0.2, 2.0, g.half_width()).unwrap();
        let op = WeylOperator::new(&make_schrodinger(m).unwrap(), g).unwrap();
        let u = SpatialField::from_fn(g, |y| Complex64::from_polar(Float::exp(-(y[0] * y[0] + y[1] * y[1]) / 8.0), 0.7 * y[0]));
        let v = SpatialField::from_fn(g, |y| Complex64::from_polar(Float::exp(-((y[0] - 1.0).powi(2) + y[1] * y[1]) / 6.0), -0.3 * y[1]));
        let lhs = op.apply(&u, 0.0).unwrap().inner(&v).unwrap();
        let rhs = u.inner(&op.apply(&v, 0.0).unwrap()).unwrap();
        assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(1e-300));
    }

    #[test]
    fn support_beyond_nyquist_rejected() {
        let g = SpatialGrid::new(1, 64.0, 64).unwrap();
        let s = make_schrodinger(MetricField::scaled_identity(1, 1.0).unwrap()).unwrap();
        assert!(matches!(WeylOperator::new(&s, g), Err(Error::Resolution(_))));
    }

    #[test]
    fn norm_estimate_close_to_symbol_sup() {
        let g = grid();
        let s = make_schrodinger(MetricField::scaled_identity(1, 1.0).unwrap()).unwrap();
        let op = WeylOperator::new(&s, g).unwrap();
        let n = op.norm_estimate(0.0).unwrap();
        let sup = (0..g.len()).map(|k| s.eval_cut([0.0; 2], 0.0, g.frequency(k))).fold(0.0, f64::max);
        assert_eq!(n, sup);
        let d = WeylOperator::with_backend(&s, g, Backend::Dense).unwrap();
        let nd = d.norm_estimate(0.0).unwrap();
        assert!(nd <= sup * (1.0 + 1e-9) && nd > 0.8 * sup);
    }
}
