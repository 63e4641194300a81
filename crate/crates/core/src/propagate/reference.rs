//! Reference solver for `i∂_t u = a^w(t) u` (equivalently `(D_t + a^w) u = 0`
//! with `D_t = −i∂_t`; see the crate docs for the sign dictionary).

use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use super::weyl::{Backend, WeylOperator};
use crate::error::{Error, Result, param_err};
use crate::grid::{Spectral, SpatialField, SpatialGrid};
use crate::symbols::SymbolModel;

/// Safety factor applied to the power-iteration norm estimate.
pub const NORM_SAFETY: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    /// Exact multiplier for time-independent constant-coefficient symbols, RK4 otherwise.
    #[default]
    Auto,
    Rk4,
    Exact,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropagateOptions {
    pub method: Method,
    /// Fixed RK4 step; must satisfy `‖a^w‖ h ≤ 1/4`.
    pub step: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverMeta {
    pub method: Method,
    pub backend: Backend,
    pub steps: usize,
    pub step: f64,
    pub operator_norm: f64,
    /// `max_k |‖u(t_k)‖/‖u(t₀)‖ − 1|`.
    pub norm_drift: f64,
}

#[derive(Clone, Debug)]
pub struct FieldTrajectory {
    pub t0: f64,
    pub times: Vec<f64>,
    pub fields: Vec<SpatialField>,
    pub meta: SolverMeta,
}

impl FieldTrajectory {
    pub fn grid(&self) -> SpatialGrid {
        self.fields[0].grid
    }

    /// Sample at a stored time (within 1e-12 relative).
    pub fn at(&self, t: f64) -> Result<&SpatialField> {
        let (a, b) = (self.times[0], *self.times.last().unwrap());
        self.times
            .iter()
            .position(|&s| Float::abs(s - t) <= 1e-12 * (1.0 + Float::abs(t)))
            .map(|k| &self.fields[k])
            .ok_or(Error::Range { time: t, start: a, end: b })
    }

    pub fn l2_norms(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.norm_l2()).collect()
    }

    pub fn linf_norms(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.norm_inf()).collect()
    }
}

/// Reusable propagator for one symbol on one grid.
///
/// The RK4 path is an integrating-factor (Lawson) scheme in Fourier space:
/// the x-averaged multiplier `ā(D)` is integrated exactly and classical RK4
/// handles `a^w − ā(D)`. The step still obeys `‖a^w‖ h ≤ 1/4`.
#[derive(Clone, Debug)]
pub struct Propagator {
    op: WeylOperator,
    spectral: Spectral,
    mean: Vec<f64>,
    method: Method,
    operator_norm: f64,
    step: f64,
}

impl Propagator {
    pub fn new(symbol: &SymbolModel, grid: SpatialGrid, opts: PropagateOptions) -> Result<Self> {
        let op = WeylOperator::new(symbol, grid)?;
        let exact_ok = op.backend() == Backend::Multiplier && !symbol.is_time_dependent();
        let method = match opts.method {
            Method::Auto if exact_ok => Method::Exact,
            Method::Auto => Method::Rk4,
            Method::Exact if !exact_ok => {
                return Err(Error::Unsupported("exact evolution needs a time-independent constant-coefficient symbol".into()));
            }
            m => m,
        };
        let mut operator_norm = op.norm_estimate(0.0)?;
        if symbol.is_time_dependent() {
            for t in [-1.0, 1.0] {
                operator_norm = operator_norm.max(op.norm_estimate(t)?);
            }
        }
        if op.backend() != Backend::Multiplier {
            operator_norm *= NORM_SAFETY;
        }
        let bound = if operator_norm > 0.0 { 0.25 / operator_norm } else { f64::INFINITY };
        let step = match opts.step {
            Some(h) if !(h > 0.0) => return Err(param_err!("step must be positive")),
            Some(h) if h > bound => return Err(Error::Stability { requested: h, suggested: bound }),
            Some(h) => h,
            None => bound.min(1.0),
        };
        let mean = op.mean_multiplier();
        Ok(Self { spectral: Spectral::new(grid)?, op, mean, method, operator_norm, step })
    }

    pub fn operator(&self) -> &WeylOperator {
        &self.op
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn operator_norm(&self) -> f64 {
        self.operator_norm
    }

    /// `−i (a^w(t) − ā(D))` on DFT coefficients.
    fn perturbation(&self, v: &[Complex64], t: f64) -> Vec<Complex64> {
        let mut w = self.op.apply_hat(v, t);
        for ((o, a), m) in w.iter_mut().zip(v).zip(&self.mean) {
            *o = Complex64::new(0.0, -1.0) * (*o - a * *m);
        }
        w
    }

    fn lawson_step(&self, v: &[Complex64], t: f64, h: f64, e_half: &[Complex64]) -> Vec<Complex64> {
        let mul = |a: &[Complex64]| -> Vec<Complex64> { a.iter().zip(e_half).map(|(x, e)| x * e).collect() };
        let lin = |a: &[Complex64], b: &[Complex64], c: f64| -> Vec<Complex64> { a.iter().zip(b).map(|(x, y)| x + y * c).collect() };
        let k1 = self.perturbation(v, t);
        let vh = mul(v);
        let k2 = self.perturbation(&mul(&lin(v, &k1, h / 2.0)), t + h / 2.0);
        let k3 = self.perturbation(&lin(&vh, &k2, h / 2.0), t + h / 2.0);
        let k4 = self.perturbation(&mul(&lin(&vh, &k3, h)), t + h);
        // u⁺ = E(h)(v + h/6 k1) + E(h/2) h/3 (k2 + k3) + h/6 k4
        let inner: Vec<Complex64> = (0..v.len())
            .map(|i| {
                let a = (v[i] + k1[i] * (h / 6.0)) * e_half[i];
                a + (k2[i] + k3[i]) * (h / 3.0)
            })
            .collect();
        mul(&inner).iter().zip(&k4).map(|(a, b)| a + b * (h / 6.0)).collect()
    }

    fn half_step_factors(&self, h: f64) -> Vec<Complex64> {
        self.mean.iter().map(|a| Complex64::from_polar(1.0, -0.5 * h * a)).collect()
    }

    fn exact(&self, u0: &SpatialField, dt: f64) -> SpatialField {
        let sym = self.op.symbol();
        self.spectral.multiply(u0, |z| Complex64::from_polar(1.0, -dt * sym.eval_cut([0.0; 2], 0.0, z)))
    }

    /// Evolve `u0` given at `t0` to every time in `times` (any order).
    pub fn evolve(&self, u0: &SpatialField, t0: f64, times: &[f64]) -> Result<FieldTrajectory> {
        if u0.grid != self.op.grid() {
            return Err(Error::GridMismatch("initial data grid differs from the propagator grid".into()));
        }
        if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
            return Err(param_err!("need a nonempty list of finite times"));
        }
        let mut fields: Vec<Option<SpatialField>> = alloc::vec![None; times.len()];
        let mut steps = 0usize;
        let mut used = 0.0f64;
        if self.method == Method::Exact {
            for (k, &t) in times.iter().enumerate() {
                fields[k] = Some(if t == t0 { u0.clone() } else { self.exact(u0, t - t0) });
            }
        } else {
            let start = self.spectral.forward(&u0.values);
            for dir in [1.0, -1.0] {
                let mut order: Vec<usize> =
                    (0..times.len()).filter(|&k| if dir > 0.0 { times[k] >= t0 } else { times[k] < t0 }).collect();
                order.sort_by(|&a, &b| (dir * times[a]).total_cmp(&(dir * times[b])));
                let mut v = start.clone();
                let mut t = t0;
                let mut cached: Option<(f64, Vec<Complex64>)> = None;
                for k in order {
                    let span = times[k] - t;
                    if span != 0.0 {
                        let n = Float::ceil(Float::abs(span) / self.step - 1e-9).max(1.0) as usize;
                        let h = span / n as f64;
                        if cached.as_ref().is_none_or(|c| c.0 != h) {
                            cached = Some((h, self.half_step_factors(h)));
                        }
                        let e = &cached.as_ref().unwrap().1;
                        used = used.max(Float::abs(h));
                        for i in 0..n {
                            v = self.lawson_step(&v, t + i as f64 * h, h, e);
                        }
                        steps += n;
                        t = times[k];
                    }
                    fields[k] = Some(if t == t0 {
                        u0.clone()
                    } else {
                        SpatialField::from_values(u0.grid, self.spectral.inverse(&v))?
                    });
                }
            }
        }
        let fields: Vec<SpatialField> = fields.into_iter().map(|f| f.expect("every time visited")).collect();
        let n0 = u0.norm_l2();
        let norm_drift = if n0 > 0.0 {
            fields.iter().map(|f| Float::abs(f.norm_l2() / n0 - 1.0)).fold(0.0, f64::max)
        } else {
            0.0
        };
        Ok(FieldTrajectory {
            t0,
            times: times.to_vec(),
            fields,
            meta: SolverMeta {
                method: self.method,
                backend: self.op.backend(),
                steps,
                step: used,
                operator_norm: self.operator_norm,
                norm_drift,
            },
        })
    }
}

/// Solve from `u0` at `t0` and sample at `times`.
pub fn propagate_reference(
    symbol: &SymbolModel,
    u0: &SpatialField,
    t0: f64,
    times: &[f64],
    opts: PropagateOptions,
) -> Result<FieldTrajectory> {
    Propagator::new(symbol, u0.grid, opts)?.evolve(u0, t0, times)
}
