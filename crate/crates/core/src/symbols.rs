//! Hamiltonian symbols `p(x, t, ξ)`: metric-based Schrödinger and half-wave
//! models, user closures, paradifferential low-pass truncation of metric
//! coefficients, sampled regularity constants and loss-exponent arithmetic.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::Float;

use crate::error::{Error, Result, param_err};
use crate::linalg::{Mat2, det, sym_eigenvalues};
use crate::math::{PI, Vec2, bump, lowpass_multiplier};
use crate::phase_space::{PhasePoint, pad};

/// Variables of a symbol in a fixed order: `x₁, x₂, t, ξ₁, ξ₂`.
pub const VAR_T: usize = 2;

type MetricFn = dyn Fn(Vec2, f64) -> Mat2 + Send + Sync;
type SymbolFn = dyn Fn(Vec2, f64, Vec2) -> f64 + Send + Sync;

/// Fourier data for the independent entries of `g^{ij}` on `[-L, L)^d`:
/// `g(x) = Re Σ_n c_n e^{iπ n·x / L}` with `n ∈ [-M, M]^d`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FourierMetric {
    pub dim: usize,
    pub half_width: f64,
    /// `M` per axis; each axis carries `2M + 1` modes.
    pub modes: [usize; 2],
    /// Entry-major: `[g11]` in d = 1, `[g11, g12, g22]` in d = 2; each block row-major over modes.
    pub coeffs: Vec<Complex64>,
}

impl FourierMetric {
    pub fn entries(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    pub fn modes_per_entry(&self) -> usize {
        (2 * self.modes[0] + 1) * if self.dim == 2 { 2 * self.modes[1] + 1 } else { 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) || !(self.half_width > 0.0) {
            return Err(param_err!("Fourier metric needs d in {{1, 2}} and L > 0"));
        }
        if self.coeffs.len() != Self::entries(self.dim) * self.modes_per_entry() {
            return Err(Error::Construction(alloc::format!(
                "expected {} coefficients, got {}",
                Self::entries(self.dim) * self.modes_per_entry(),
                self.coeffs.len()
            )));
        }
        if self.coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Construction("non-finite Fourier coefficient".into()));
        }
        Ok(())
    }

    /// Signed mode vector of flat index `m` within an entry block.
    pub fn mode(&self, m: usize) -> [i64; 2] {
        let w1 = if self.dim == 2 { 2 * self.modes[1] + 1 } else { 1 };
        let a = (m / w1) as i64 - self.modes[0] as i64;
        let b = if self.dim == 2 { (m % w1) as i64 - self.modes[1] as i64 } else { 0 };
        [a, b]
    }

    /// Angular wave vector of flat mode index `m`.
    pub fn wave_vector(&self, m: usize) -> Vec2 {
        let n = self.mode(m);
        let s = PI / self.half_width;
        [n[0] as f64 * s, n[1] as f64 * s]
    }

    fn block(&self, e: usize) -> &[Complex64] {
        let k = self.modes_per_entry();
        &self.coeffs[e * k..(e + 1) * k]
    }

    /// `∂_x^a` of entry `e` at `x`.
    fn entry_derivative(&self, e: usize, x: Vec2, a: [u8; 2]) -> f64 {
        let mut s = 0.0;
        for (m, c) in self.block(e).iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let k = self.wave_vector(m);
            let phase = k[0] * x[0] + k[1] * x[1];
            let mut factor = Complex64::new(1.0, 0.0);
            for (ax, &o) in a.iter().enumerate() {
                for _ in 0..o {
                    factor *= Complex64::new(0.0, k[ax]);
                }
            }
            s += (c * factor * Complex64::from_polar(1.0, phase)).re;
        }
        s
    }
}

#[derive(Clone)]
enum MetricRepr {
    Constant(Mat2),
    Fourier(FourierMetric),
    Analytic { f: Arc<MetricFn>, time_dependent: bool },
}

/// Coefficients `g^{ij}(x, t)` with sampled eigenvalue bounds.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    repr: MetricRepr,
    bounds: (f64, f64),
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            MetricRepr::Constant(m) => alloc::format!("Constant({m:?})"),
            MetricRepr::Fourier(fm) => alloc::format!("Fourier(modes={:?}, L={})", fm.modes, fm.half_width),
            MetricRepr::Analytic { .. } => "Analytic".into(),
        };
        f.debug_struct("MetricField").field("dim", &self.dim).field("repr", &kind).field("bounds", &self.bounds).finish()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=2).contains(&dim) { Ok(()) } else { Err(param_err!("dimension must be 1 or 2, got {dim}")) }
}

fn eig_range(g: &Mat2, dim: usize) -> (f64, f64) {
    let e = sym_eigenvalues(g, dim);
    (e[0], if dim == 1 { e[0] } else { e[1] })
}

impl MetricField {
    pub fn constant(dim: usize, g: Mat2) -> Result<Self> {
        check_dim(dim)?;
        if dim == 2 && Float::abs(g[0][1] - g[1][0]) > 1e-14 * (1.0 + Float::abs(g[0][1])) {
            return Err(Error::Construction("metric is not symmetric".into()));
        }
        let mut m = g;
        if dim == 1 {
            m = [[g[0][0], 0.0], [0.0, 0.0]];
        }
        let bounds = eig_range(&m, dim);
        Ok(Self { dim, repr: MetricRepr::Constant(m), bounds })
    }

    /// `ν · I`.
    pub fn scaled_identity(dim: usize, nu: f64) -> Result<Self> {
        Self::constant(dim, [[nu, 0.0], [0.0, nu]])
    }

    pub fn fourier(data: FourierMetric) -> Result<Self> {
        data.validate()?;
        let dim = data.dim;
        let mut m = Self { dim, repr: MetricRepr::Fourier(data), bounds: (0.0, 0.0) };
        m.bounds = m.sample_bounds();
        Ok(m)
    }

    /// `g = ν(1 + ε cos(x₁/λ)) I` on a box whose side is a multiple of `2πλ`.
    pub fn cosine_perturbed(dim: usize, nu: f64, eps: f64, wavelength: f64, half_width: f64) -> Result<Self> {
        check_dim(dim)?;
        let ratio = half_width / (PI * wavelength);
        let m = Float::round(ratio);
        if m < 1.0 || Float::abs(ratio - m) > 1e-9 * ratio {
            return Err(param_err!(
                "box half-width {half_width} is not a multiple of pi * {wavelength}; the cosine would not be periodic"
            ));
        }
        let m = m as usize;
        let modes = [m, 0];
        let per = 2 * m + 1;
        let entries = FourierMetric::entries(dim);
        let mut coeffs = alloc::vec![Complex64::new(0.0, 0.0); entries * per];
        let diagonal: &[usize] = if dim == 1 { &[0] } else { &[0, 2] };
        for &e in diagonal {
            coeffs[e * per + m] = Complex64::new(nu, 0.0);
            coeffs[e * per] = Complex64::new(nu * eps / 2.0, 0.0);
            coeffs[e * per + 2 * m] = Complex64::new(nu * eps / 2.0, 0.0);
        }
        Self::fourier(FourierMetric { dim, half_width, modes, coeffs })
    }

    /// Closure-backed metric, validated on `samples`.
    pub fn analytic(
        dim: usize,
        f: impl Fn(Vec2, f64) -> Mat2 + Send + Sync + 'static,
        time_dependent: bool,
        samples: &[(Vec2, f64)],
    ) -> Result<Self> {
        check_dim(dim)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(x, t) in samples {
            let g = f(x, t);
            if dim == 2 && Float::abs(g[0][1] - g[1][0]) > 1e-12 * (1.0 + Float::abs(g[0][1])) {
                return Err(Error::Construction("metric is not symmetric at a sample point".into()));
            }
            let (a, b) = eig_range(&g, dim);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        if samples.is_empty() {
            return Err(param_err!("analytic metric needs validation samples"));
        }
        Ok(Self { dim, repr: MetricRepr::Analytic { f: Arc::new(f), time_dependent }, bounds: (lo, hi) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sampled `(min, max)` eigenvalues.
    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn fourier_data(&self) -> Option<&FourierMetric> {
        match &self.repr {
            MetricRepr::Fourier(f) => Some(f),
            _ => None,
        }
    }

    pub fn constant_value(&self) -> Option<Mat2> {
        match &self.repr {
            MetricRepr::Constant(m) => Some(*m),
            MetricRepr::Fourier(f) if f.coeffs.iter().enumerate().all(|(i, c)| {
                let m = i % f.modes_per_entry();
                f.mode(m) == [0, 0] || (c.re == 0.0 && c.im == 0.0)
            }) => Some(self.eval([0.0, 0.0], 0.0)),
            _ => None,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self.repr, MetricRepr::Analytic { time_dependent: true, .. })
    }

    pub fn eval(&self, x: Vec2, t: f64) -> Mat2 {
        self.derivative(x, t, [0, 0, 0])
    }

    /// `∂^a g` with `a` counting derivatives in `(x₁, x₂, t)`.
    pub fn derivative(&self, x: Vec2, t: f64, a: [u8; 3]) -> Mat2 {
        let order = a.iter().sum::<u8>();
        match &self.repr {
            MetricRepr::Constant(m) => {
                if order == 0 { *m } else { [[0.0; 2]; 2] }
            }
            MetricRepr::Fourier(fm) => {
                if a[2] > 0 || (self.dim == 1 && a[1] > 0) {
                    return [[0.0; 2]; 2];
                }
                let aa = [a[0], a[1]];
                if self.dim == 1 {
                    [[fm.entry_derivative(0, x, aa), 0.0], [0.0, 0.0]]
                } else {
                    let g11 = fm.entry_derivative(0, x, aa);
                    let g12 = fm.entry_derivative(1, x, aa);
                    let g22 = fm.entry_derivative(2, x, aa);
                    [[g11, g12], [g12, g22]]
                }
            }
            MetricRepr::Analytic { f, time_dependent } => {
                if (self.dim == 1 && a[1] > 0) || (!time_dependent && a[2] > 0) {
                    return [[0.0; 2]; 2];
                }
                let mut out = [[0.0; 2]; 2];
                for i in 0..self.dim {
                    for j in i..self.dim {
                        let g = |v: &[f64; 5]| f([v[0], v[1]], v[2])[i][j];
                        let orders = [a[0], a[1], a[2], 0, 0];
                        let val = fd_partial(&g, [x[0], x[1], t, 0.0, 0.0], orders, [1.0; 5]);
                        out[i][j] = val;
                        out[j][i] = val;
                    }
                }
                out
            }
        }
    }

    fn sample_bounds(&self) -> (f64, f64) {
        let l = match &self.repr {
            MetricRepr::Fourier(f) => f.half_width,
            _ => 1.0,
        };
        let n = 64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let ny = if self.dim == 2 { n } else { 1 };
        for i in 0..n {
            for j in 0..ny {
                let x = [-l + 2.0 * l * i as f64 / n as f64, -l + 2.0 * l * j as f64 / n as f64];
                let (a, b) = eig_range(&self.eval(x, 0.0), self.dim);
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        (lo, hi)
    }
}

/// Paradifferential low-pass: Fourier coefficients times a smooth radial
/// multiplier equal to 1 for `|k| ≤ λ` and 0 for `|k| ≥ 2λ`.
pub fn lowpass_metric(metric: &MetricField, lambda_cut: f64) -> Result<MetricField> {
    if !(lambda_cut > 0.0) {
        return Err(param_err!("cutoff frequency must be positive, got {lambda_cut}"));
    }
    match &metric.repr {
        MetricRepr::Constant(_) => Ok(metric.clone()),
        MetricRepr::Fourier(fm) => {
            let mut out = fm.clone();
            let per = fm.modes_per_entry();
            for (i, c) in out.coeffs.iter_mut().enumerate() {
                let k = fm.wave_vector(i % per);
                *c *= lowpass_multiplier(Float::hypot(k[0], k[1]), lambda_cut);
            }
            MetricField::fourier(out)
        }
        MetricRepr::Analytic { .. } => Err(Error::Unsupported(
            "low-pass truncation needs Fourier data; this metric is closure-only".into(),
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Homogeneity {
    One,
    Two,
    None,
}

impl Homogeneity {
    pub fn degree(&self) -> Option<f64> {
        match self {
            Homogeneity::One => Some(1.0),
            Homogeneity::Two => Some(2.0),
            Homogeneity::None => None,
        }
    }
}

/// Frequency localisation used when a symbol is quantised on a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FrequencyCutoff {
    /// 1 on `|ξ| ≤ radius`, 0 for `|ξ| ≥ 2 radius`.
    Ball { radius: f64 },
    /// 1 on `inner ≤ |ξ| ≤ outer`, 0 below `inner/2` and above `2 outer`.
    Annulus { inner: f64, outer: f64 },
    None,
}

impl FrequencyCutoff {
    pub fn factor(&self, xi_norm: f64) -> f64 {
        match *self {
            FrequencyCutoff::Ball { radius } => bump(xi_norm / radius),
            FrequencyCutoff::Annulus { inner, outer } => {
                if xi_norm < inner {
                    if xi_norm == 0.0 { 0.0 } else { bump(inner / xi_norm) }
                } else {
                    bump(xi_norm / outer)
                }
            }
            FrequencyCutoff::None => 1.0,
        }
    }

    /// Largest |ξ| where the factor is nonzero.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            FrequencyCutoff::Ball { radius } => Some(2.0 * radius),
            FrequencyCutoff::Annulus { outer, .. } => Some(2.0 * outer),
            FrequencyCutoff::None => None,
        }
    }

    /// Largest |ξ| where the factor equals 1.
    pub fn plateau_radius(&self) -> Option<f64> {
        match *self {
            FrequencyCutoff::Ball { radius } => Some(radius),
            FrequencyCutoff::Annulus { outer, .. } => Some(outer),
            FrequencyCutoff::None => None,
        }
    }
}

/// Estimated regularity constants `(ε, C₂, d₁, d₂)`. `eps_reg` is the
/// coefficient smallness, distinct from the estimate loss exponent `eps_loss`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularityConstants {
    pub eps_reg: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Clone)]
enum SymbolKind {
    Schrodinger(MetricField),
    HalfWave(MetricField),
    Custom { f: Arc<SymbolFn>, time_dependent: bool, scale_z: f64 },
}

/// First and second derivatives of a symbol at one phase-space point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub dx: Vec2,
    pub dt: f64,
    pub dxi: Vec2,
    pub dxixi: Mat2,
    /// `dxxi[i][j] = ∂²p / ∂x_i ∂ξ_j`.
    pub dxxi: Mat2,
    pub dxx: Mat2,
}

/// A Hamiltonian `p(x, t, ξ)` with derivative evaluators and metadata.
#[derive(Clone)]
pub struct SymbolModel {
    dim: usize,
    kind: SymbolKind,
    homogeneity: Homogeneity,
    cutoff: FrequencyCutoff,
    regularity: Option<RegularityConstants>,
    xi_only: bool,
}

impl fmt::Debug for SymbolModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            SymbolKind::Schrodinger(m) => alloc::format!("Schrodinger({m:?})"),
            SymbolKind::HalfWave(m) => alloc::format!("HalfWave({m:?})"),
            SymbolKind::Custom { .. } => "Custom".into(),
        };
        f.debug_struct("SymbolModel")
            .field("dim", &self.dim)
            .field("kind", &kind)
            .field("homogeneity", &self.homogeneity)
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

/// `p = g^{ij} ξ_i ξ_j`, homogeneity 2, unit-ball cutoff.
pub fn make_schrodinger(metric: MetricField) -> Result<SymbolModel> {
    let (lo, hi) = metric.bounds();
    if !(lo.is_finite() && hi.is_finite()) || (lo == 0.0 && hi == 0.0) {
        return Err(Error::Construction("metric is degenerate".into()));
    }
    Ok(SymbolModel {
        dim: metric.dim(),
        kind: SymbolKind::Schrodinger(metric),
        homogeneity: Homogeneity::Two,
        cutoff: FrequencyCutoff::Ball { radius: 1.0 },
        regularity: None,
        xi_only: false,
    })
}

/// `p = (g^{ij} ξ_i ξ_j)^{1/2}`, homogeneity 1, annulus cutoff `[1/2, 2]`.
pub fn make_halfwave(metric: MetricField) -> Result<SymbolModel> {
    if !(metric.bounds().0 > 0.0) {
        return Err(Error::Construction(alloc::format!(
            "half-wave symbol needs an elliptic metric; smallest sampled eigenvalue is {}",
            metric.bounds().0
        )));
    }
    Ok(SymbolModel {
        dim: metric.dim(),
        kind: SymbolKind::HalfWave(metric),
        homogeneity: Homogeneity::One,
        cutoff: FrequencyCutoff::Annulus { inner: 0.5, outer: 2.0 },
        regularity: None,
        xi_only: false,
    })
}

/// Closure-backed symbol; derivatives by 4th-order central differences with
/// step `ε_mach^{1/5}` times `scale_z` (for x, t) or 1 (for ξ).
pub fn make_custom(
    dim: usize,
    f: impl Fn(Vec2, f64, Vec2) -> f64 + Send + Sync + 'static,
    homogeneity: Homogeneity,
    time_dependent: bool,
    scale_z: f64,
) -> Result<SymbolModel> {
    check_dim(dim)?;
    if !(scale_z > 0.0) {
        return Err(param_err!("characteristic scale must be positive"));
    }
    Ok(SymbolModel {
        dim,
        kind: SymbolKind::Custom { f: Arc::new(f), time_dependent, scale_z },
        homogeneity,
        cutoff: FrequencyCutoff::None,
        regularity: None,
        xi_only: false,
    })
}

impl SymbolModel {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn homogeneity(&self) -> Homogeneity {
        self.homogeneity
    }
    pub fn cutoff(&self) -> FrequencyCutoff {
        self.cutoff
    }
    pub fn with_cutoff(mut self, cutoff: FrequencyCutoff) -> Self {
        self.cutoff = cutoff;
        self
    }
    pub fn regularity(&self) -> Option<RegularityConstants> {
        self.regularity
    }
    pub fn with_regularity(mut self, r: RegularityConstants) -> Self {
        self.regularity = Some(r);
        self
    }
    pub fn metric(&self) -> Option<&MetricField> {
        match &self.kind {
            SymbolKind::Schrodinger(m) | SymbolKind::HalfWave(m) => Some(m),
            SymbolKind::Custom { .. } => None,
        }
    }
    pub fn is_schrodinger(&self) -> bool {
        matches!(self.kind, SymbolKind::Schrodinger(_))
    }
    pub fn is_halfwave(&self) -> bool {
        matches!(self.kind, SymbolKind::HalfWave(_))
    }
    pub fn is_time_dependent(&self) -> bool {
        match &self.kind {
            SymbolKind::Schrodinger(m) | SymbolKind::HalfWave(m) => m.is_time_dependent(),
            SymbolKind::Custom { time_dependent, .. } => *time_dependent,
        }
    }
    /// Declare a closure symbol to depend on ξ only (enables exact multiplier evolution).
    pub fn mark_constant_coefficient(mut self) -> Self {
        self.xi_only = true;
        self
    }

    /// True when `p` depends on ξ only.
    pub fn is_constant_coefficient(&self) -> bool {
        self.xi_only || self.metric().and_then(|m| m.constant_value()).is_some()
    }

    /// `p(x, t, ξ)` for slices of length `d`.
    pub fn value(&self, x: &[f64], t: f64, xi: &[f64]) -> f64 {
        self.eval(pad(x), t, pad(xi))
    }

    pub fn eval(&self, x: Vec2, t: f64, xi: Vec2) -> f64 {
        match &self.kind {
            SymbolKind::Schrodinger(m) => quad(&m.eval(x, t), xi, self.dim),
            SymbolKind::HalfWave(m) => Float::sqrt(quad(&m.eval(x, t), xi, self.dim)),
            SymbolKind::Custom { f, .. } => f(x, t, xi),
        }
    }

    /// Symbol multiplied by its frequency cutoff, as used by quantisation.
    pub fn eval_cut(&self, x: Vec2, t: f64, xi: Vec2) -> f64 {
        let c = self.cutoff.factor(Float::hypot(xi[0], xi[1]));
        if c == 0.0 { 0.0 } else { c * self.eval(x, t, xi) }
    }

    pub fn jet(&self, x: Vec2, t: f64, xi: Vec2) -> Jet {
        match &self.kind {
            SymbolKind::Schrodinger(m) | SymbolKind::HalfWave(m) => {
                let qj = quad_jet(m, x, t, xi, self.dim);
                if self.is_schrodinger() { qj } else { sqrt_jet(&qj, self.dim) }
            }
            SymbolKind::Custom { f, scale_z, .. } => {
                let g = |v: &[f64; 5]| f([v[0], v[1]], v[2], [v[3], v[4]]);
                let p = [x[0], x[1], t, xi[0], xi[1]];
                let sc = [*scale_z, *scale_z, *scale_z, 1.0, 1.0];
                let d = self.dim;
                let mut j = Jet { value: g(&p), ..Jet::default() };
                let e = |a: usize, b: Option<usize>| {
                    let mut o = [0u8; 5];
                    o[a] += 1;
                    if let Some(b) = b {
                        o[b] += 1;
                    }
                    fd_partial(&g, p, o, sc)
                };
                j.dt = e(VAR_T, None);
                for i in 0..d {
                    j.dx[i] = e(i, None);
                    j.dxi[i] = e(3 + i, None);
                    for k in 0..d {
                        j.dxixi[i][k] = e(3 + i, Some(3 + k));
                        j.dxx[i][k] = e(i, Some(k));
                        j.dxxi[i][k] = e(i, Some(3 + k));
                    }
                }
                j
            }
        }
    }

    /// `∂_z^α ∂_ξ^β p` with `α` over `(x₁, x₂, t)` and `β` over `(ξ₁, ξ₂)`,
    /// each of order at most 3.
    pub fn partial(&self, x: Vec2, t: f64, xi: Vec2, alpha: [u8; 3], beta: [u8; 2]) -> f64 {
        let d = self.dim;
        if (d == 1 && (alpha[1] > 0 || beta[1] > 0)) || alpha.iter().sum::<u8>() > 3 || beta.iter().sum::<u8>() > 3 {
            return 0.0;
        }
        let mut vars: Vec<usize> = Vec::new();
        for (v, &o) in alpha.iter().enumerate() {
            vars.extend(core::iter::repeat_n(v, o as usize));
        }
        for (v, &o) in beta.iter().enumerate() {
            vars.extend(core::iter::repeat_n(3 + v, o as usize));
        }
        match &self.kind {
            SymbolKind::Schrodinger(m) => quad_partial(m, x, t, xi, d, &vars),
            SymbolKind::HalfWave(m) => {
                let q = quad(&m.eval(x, t), xi, d);
                let mut total = 0.0;
                for_each_partition(vars.len(), &mut |blocks: &[Vec<usize>]| {
                    let k = blocks.len();
                    let mut fk = Float::powf(q, 0.5 - k as f64);
                    for i in 0..k {
                        fk *= 0.5 - i as f64;
                    }
                    let mut prod = fk;
                    for b in blocks {
                        let sub: Vec<usize> = b.iter().map(|&i| vars[i]).collect();
                        prod *= quad_partial(m, x, t, xi, d, &sub);
                        if prod == 0.0 {
                            break;
                        }
                    }
                    total += prod;
                });
                total
            }
            SymbolKind::Custom { f, scale_z, .. } => {
                let g = |v: &[f64; 5]| f([v[0], v[1]], v[2], [v[3], v[4]]);
                let orders = [alpha[0], alpha[1], alpha[2], beta[0], beta[1]];
                let sc = [*scale_z, *scale_z, *scale_z, 1.0, 1.0];
                fd_partial(&g, [x[0], x[1], t, xi[0], xi[1]], orders, sc)
            }
        }
    }
}

#[inline]
fn quad(g: &Mat2, xi: Vec2, d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += g[i][j] * xi[i] * xi[j];
        }
    }
    s
}

fn mat_vec(g: &Mat2, v: Vec2, d: usize) -> Vec2 {
    let mut o = [0.0; 2];
    for i in 0..d {
        for j in 0..d {
            o[i] += g[i][j] * v[j];
        }
    }
    o
}

/// Jet of `q = g^{ij} ξ_i ξ_j`.
fn quad_jet(m: &MetricField, x: Vec2, t: f64, xi: Vec2, d: usize) -> Jet {
    let g = m.eval(x, t);
    let gx = [m.derivative(x, t, [1, 0, 0]), m.derivative(x, t, [0, 1, 0])];
    let mut j = Jet { value: quad(&g, xi, d), ..Jet::default() };
    let gxi = mat_vec(&g, xi, d);
    j.dt = if m.is_time_dependent() { quad(&m.derivative(x, t, [0, 0, 1]), xi, d) } else { 0.0 };
    for i in 0..d {
        j.dxi[i] = 2.0 * gxi[i];
        j.dx[i] = quad(&gx[i], xi, d);
        let gxv = mat_vec(&gx[i], xi, d);
        for k in 0..d {
            j.dxixi[i][k] = 2.0 * g[i][k];
            j.dxxi[i][k] = 2.0 * gxv[k];
            let mut a = [0u8; 3];
            a[i] += 1;
            a[k] += 1;
            j.dxx[i][k] = quad(&m.derivative(x, t, a), xi, d);
        }
    }
    j
}

/// Chain rule for `p = √q`.
fn sqrt_jet(q: &Jet, d: usize) -> Jet {
    let p = Float::sqrt(q.value);
    let a = 0.5 / p;
    let b = -0.25 / (p * p * p);
    let mut j = Jet { value: p, dt: a * q.dt, ..Jet::default() };
    for i in 0..d {
        j.dx[i] = a * q.dx[i];
        j.dxi[i] = a * q.dxi[i];
        for k in 0..d {
            j.dxixi[i][k] = a * q.dxixi[i][k] + b * q.dxi[i] * q.dxi[k];
            j.dxxi[i][k] = a * q.dxxi[i][k] + b * q.dx[i] * q.dxi[k];
            j.dxx[i][k] = a * q.dxx[i][k] + b * q.dx[i] * q.dx[k];
        }
    }
    j
}

/// Partial of `q` with respect to the listed variables (indices per [`VAR_T`] layout).
fn quad_partial(m: &MetricField, x: Vec2, t: f64, xi: Vec2, d: usize, vars: &[usize]) -> f64 {
    let mut a = [0u8; 3];
    let mut b: Vec<usize> = Vec::new();
    for &v in vars {
        if v < 3 {
            a[v] += 1;
        } else {
            b.push(v - 3);
        }
    }
    if b.iter().any(|&i| i >= d) {
        return 0.0;
    }
    let g = m.derivative(x, t, a);
    match b.len() {
        0 => quad(&g, xi, d),
        1 => 2.0 * mat_vec(&g, xi, d)[b[0]],
        2 => 2.0 * g[b[0]][b[1]],
        _ => 0.0,
    }
}

/// Enumerate set partitions of `{0..n}` (restricted growth strings).
fn for_each_partition(n: usize, f: &mut dyn FnMut(&[Vec<usize>])) {
    fn rec(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, f: &mut dyn FnMut(&[Vec<usize>])) {
        if i == n {
            f(blocks);
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(i + 1, n, blocks, f);
            blocks[b].pop();
        }
        blocks.push(alloc::vec![i]);
        rec(i + 1, n, blocks, f);
        blocks.pop();
    }
    let mut blocks = Vec::new();
    rec(0, n, &mut blocks, f);
}

/// Nested 4th-order central differences. Step for a variable differentiated
/// `k` times is `ε^{1/(4+k)}·scale`, which reduces to `ε^{1/5}·scale` for first derivatives.
pub(crate) fn fd_partial(f: &dyn Fn(&[f64; 5]) -> f64, p: [f64; 5], orders: [u8; 5], scale: [f64; 5]) -> f64 {
    let Some(v) = orders.iter().position(|&o| o > 0) else {
        return f(&p);
    };
    let k = orders[v] as f64;
    let h = Float::powf(f64::EPSILON, 1.0 / (4.0 + k)) * scale[v];
    let mut rest = orders;
    rest[v] -= 1;
    let at = |s: f64| {
        let mut q = p;
        q[v] += s;
        fd_partial(f, q, rest, scale)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

/// Deterministic sample set for [`regularity_constants`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleBox {
    pub dim: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub xi_lo: f64,
    pub xi_hi: f64,
    /// Keep only samples with `annulus.0 ≤ |ξ| ≤ annulus.1`.
    pub annulus: Option<(f64, f64)>,
    pub per_axis: usize,
}

impl SampleBox {
    pub fn points(&self) -> Vec<(PhasePoint, f64)> {
        let n = self.per_axis.max(2);
        let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let mut out = Vec::new();
        let nd = if self.dim == 2 { n } else { 1 };
        let nt = if self.t_hi > self.t_lo { n } else { 1 };
        for ix in 0..n {
            for jx in 0..nd {
                for it in 0..nt {
                    for ik in 0..n {
                        for jk in 0..nd {
                            let x = [lin(self.x_lo, self.x_hi, ix), lin(self.x_lo, self.x_hi, jx)];
                            let xi = [lin(self.xi_lo, self.xi_hi, ik), lin(self.xi_lo, self.xi_hi, jk)];
                            let t = if nt == 1 { self.t_lo } else { lin(self.t_lo, self.t_hi, it) };
                            if let Some((a, b)) = self.annulus {
                                let m = if self.dim == 2 { Float::hypot(xi[0], xi[1]) } else { Float::abs(xi[0]) };
                                if m < a || m > b {
                                    continue;
                                }
                            }
                            let d = self.dim;
                            out.push((PhasePoint { x: x[..d].to_vec(), xi: xi[..d].to_vec() }, t));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Multi-indices `(α, β)` in `d` dimensions with given bounds on `|α|`, `|β|` and `|α|+|β|`.
fn multi_indices(d: usize, alpha_range: (u8, u8), beta_max: u8, total_max: u8) -> Vec<([u8; 3], [u8; 2])> {
    let mut out = Vec::new();
    let mut alphas = Vec::new();
    for a0 in 0..=3u8 {
        for a1 in 0..=3u8 {
            for a2 in 0..=3u8 {
                if d == 1 && a1 > 0 {
                    continue;
                }
                let a = [a0, a1, a2];
                let s = a.iter().sum::<u8>();
                if s >= alpha_range.0 && s <= alpha_range.1 && !alphas.contains(&a) {
                    alphas.push(a);
                }
            }
        }
    }
    for a in alphas {
        for b0 in 0..=3u8 {
            for b1 in 0..=3u8 {
                if d == 1 && b1 > 0 {
                    continue;
                }
                let sb = b0 + b1;
                if sb <= beta_max && a.iter().sum::<u8>() + sb <= total_max {
                    out.push((a, [b0, b1]));
                }
            }
        }
    }
    out
}

/// Sampled regularity constants at scale `R`.
pub fn regularity_constants(symbol: &SymbolModel, samples: &[(PhasePoint, f64)], big_r: f64) -> RegularityConstants {
    let d = symbol.dim();
    let mixed = multi_indices(d, (1, 2), 2, 2);
    let pure = multi_indices(d, (0, 0), 3, 3);
    let mut eps = 0.0f64;
    let mut c2 = 0.0f64;
    let mut d1 = f64::INFINITY;
    let mut d2 = 0.0f64;
    for (p, t) in samples {
        let x = p.x2();
        let xi = p.xi2();
        for (a, b) in &mixed {
            let order = a.iter().sum::<u8>() as i32;
            eps = eps.max(Float::powi(big_r, order) * Float::abs(symbol.partial(x, *t, xi, *a, *b)));
        }
        for (a, b) in &pure {
            c2 = c2.max(Float::abs(symbol.partial(x, *t, xi, *a, *b)));
        }
        let h = symbol.jet(x, *t, xi).dxixi;
        let m4 = [[h[0][0], h[0][1], 0.0, 0.0], [h[1][0], h[1][1], 0.0, 0.0], [0.0; 4], [0.0; 4]];
        let dd = Float::abs(det(&m4, d));
        d1 = d1.min(dd);
        d2 = d2.max(dd);
    }
    if samples.is_empty() {
        d1 = 0.0;
    }
    RegularityConstants { eps_reg: eps, c2, d1, d2 }
}

/// Exact loss exponents for Hölder regularity `s`, dimension `d`, Lebesgue exponent `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossBudget {
    pub sigma: Ratio<i64>,
    pub kappa0: Ratio<i64>,
    pub kappa1: Ratio<i64>,
    pub kappa: Ratio<i64>,
    /// `N^{2σ-1}` intervals of length `N^{1-2σ}` cover the rescaled unit time.
    pub interval_count_exponent: Ratio<i64>,
    pub wave_bilinear_loss: Ratio<i64>,
}

pub fn loss_budget(s: Ratio<i64>, d: i64, q: Ratio<i64>) -> Result<LossBudget> {
    let zero = Ratio::from_integer(0);
    let one = Ratio::from_integer(1);
    if s < zero || s > one {
        return Err(param_err!("Hölder exponent s = {s} outside [0, 1]"));
    }
    if q <= Ratio::from_integer(2) {
        return Err(param_err!("Lebesgue exponent q = {q} must exceed 2"));
    }
    if d < 1 {
        return Err(param_err!("dimension must be positive"));
    }
    let two = Ratio::from_integer(2);
    let three = Ratio::from_integer(3);
    let dr = Ratio::from_integer(d);
    let sigma = two / (three + s);
    let kappa1 = (one - s) / (two * (three + s));
    let kappa0 = (dr - one) / two - dr / q;
    let kappa = sigma - one / two;
    let interval_count_exponent = two * sigma - one;
    let wave_bilinear_loss = Ratio::from_integer(4) / (three + s) * (dr - one) / (dr + three);
    Ok(LossBudget { sigma, kappa0, kappa1, kappa, interval_count_exponent, wave_bilinear_loss })
}
