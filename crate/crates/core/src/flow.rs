//! Bicharacteristics `ẋ = ∂_ξ p`, `ξ̇ = −∂_x p` with the phase shift `ψ`,
//! the variational flow, and the bi-Lipschitz / separation / averaged-Hessian
//! diagnostics.

use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result, param_err};
use crate::linalg::{Mat2, Mat4, det, identity4, sym_condition};
use crate::math::Vec2;
use crate::phase_space::{PhasePoint, PhaseSpaceRegion, d_r_metric};
use crate::symbols::{FrequencyCutoff, Homogeneity, SymbolModel};

/// Condition number above which an averaged Hessian is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// `max(256, ⌈8T/√R⌉)`.
pub fn default_steps(horizon: f64, big_r: f64) -> usize {
    let s = Float::ceil(8.0 * Float::abs(horizon) / Float::sqrt(big_r)) as usize;
    s.max(256)
}

#[derive(Clone, Debug)]
pub struct FlowOptions {
    /// Declared flow-out region; leaving it is an error.
    pub region: Option<PhaseSpaceRegion>,
    /// Attach a half-step Richardson error estimate (costs two extra solves).
    pub richardson: bool,
    /// For 1-homogeneous symbols, treat leaving the cutoff annulus as an escape.
    pub check_annulus: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { region: None, richardson: false, check_annulus: true }
    }
}

impl FlowOptions {
    pub fn checked() -> Self {
        Self { richardson: true, ..Self::default() }
    }

    pub fn unchecked() -> Self {
        Self { check_annulus: false, ..Self::default() }
    }
}

/// Sampled trajectory. Samples are stored in increasing time; `psi` vanishes at `t0`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bicharacteristic {
    pub dim: usize,
    pub t0: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vec2>,
    pub xi: Vec<Vec2>,
    pub psi: Vec<f64>,
    /// Time derivatives `(ẋ, ξ̇, ψ̇)` at each sample, used for Hermite interpolation.
    pub dx: Vec<Vec2>,
    pub dxi: Vec<Vec2>,
    pub dpsi: Vec<f64>,
    /// Largest gap between the closed-form and ODE phase shifts.
    pub psi_ode_gap: f64,
    pub richardson_error: Option<f64>,
}

/// Integrator state `(x₁, x₂, ξ₁, ξ₂, ψ_closed, ψ_ode)`.
type State = [f64; 6];

fn rhs(symbol: &SymbolModel, t: f64, y: &State) -> State {
    let x = [y[0], y[1]];
    let xi = [y[2], y[3]];
    let j = symbol.jet(x, t, xi);
    let ode = -j.value + xi[0] * j.dxi[0] + xi[1] * j.dxi[1];
    let closed = match symbol.homogeneity().degree() {
        Some(h) => (h - 1.0) * j.value,
        None => ode,
    };
    [j.dxi[0], j.dxi[1], -j.dx[0], -j.dx[1], closed, ode]
}

fn rk4_step(symbol: &SymbolModel, t: f64, y: &State, h: f64) -> State {
    let add = |a: &State, b: &State, s: f64| -> State {
        let mut o = *a;
        for i in 0..6 {
            o[i] += s * b[i];
        }
        o
    };
    let k1 = rhs(symbol, t, y);
    let k2 = rhs(symbol, t + h / 2.0, &add(y, &k1, h / 2.0));
    let k3 = rhs(symbol, t + h / 2.0, &add(y, &k2, h / 2.0));
    let k4 = rhs(symbol, t + h, &add(y, &k3, h));
    let mut o = *y;
    for i in 0..6 {
        o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

fn check_state(symbol: &SymbolModel, opts: &FlowOptions, t: f64, y: &State) -> Result<()> {
    let d = symbol.dim();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::FlowEscape { time: t });
    }
    if opts.check_annulus && symbol.homogeneity() == Homogeneity::One {
        if let FrequencyCutoff::Annulus { inner, outer } = symbol.cutoff() {
            let m = Float::hypot(y[2], y[3]);
            if m < inner * (1.0 - 1e-12) || m > outer * (1.0 + 1e-12) {
                return Err(Error::FlowEscape { time: t });
            }
        }
    }
    if let Some(region) = &opts.region {
        let p = PhasePoint { x: y[..d].to_vec(), xi: y[2..2 + d].to_vec() };
        if !region.contains(&p) {
            return Err(Error::FlowEscape { time: t });
        }
    }
    Ok(())
}

/// Raw RK4 run from `t0` to `t1` (either direction) returning every step.
fn run(symbol: &SymbolModel, start: &PhasePoint, t0: f64, t1: f64, steps: usize, opts: &FlowOptions) -> Result<Vec<(f64, State)>> {
    let x = start.x2();
    let xi = start.xi2();
    let mut y: State = [x[0], x[1], xi[0], xi[1], 0.0, 0.0];
    let h = (t1 - t0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    check_state(symbol, opts, t0, &y)?;
    out.push((t0, y));
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        y = rk4_step(symbol, t, &y, h);
        let tn = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h };
        check_state(symbol, opts, tn, &y)?;
        out.push((tn, y));
    }
    Ok(out)
}

fn state_distance(a: &State, b: &State) -> f64 {
    (0..5).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum::<f64>().sqrt()
}

/// Integrate from `start` at time `t_span.0` to `t_span.1` with `steps` RK4 steps.
pub fn integrate_bicharacteristic(
    symbol: &SymbolModel,
    start: &PhasePoint,
    t_span: (f64, f64),
    steps: usize,
    opts: &FlowOptions,
) -> Result<Bicharacteristic> {
    if steps < 16 {
        return Err(param_err!("need at least 16 steps, got {steps}"));
    }
    if start.dim() != symbol.dim() {
        return Err(param_err!("start point dimension does not match the symbol"));
    }
    if !(t_span.0.is_finite() && t_span.1.is_finite()) || t_span.0 == t_span.1 {
        return Err(param_err!("time span must be a nonempty finite interval"));
    }
    let samples = run(symbol, start, t_span.0, t_span.1, steps, opts)?;
    let richardson_error = if opts.richardson {
        let plain = FlowOptions { richardson: false, ..opts.clone() };
        let fine = run(symbol, start, t_span.0, t_span.1, 2 * steps, &plain)?;
        Some(state_distance(&samples.last().unwrap().1, &fine.last().unwrap().1) / 15.0)
    } else {
        None
    };
    Ok(assemble(symbol, start.dim(), t_span.0, samples, richardson_error))
}

/// Integrate from `t0` backward to `lo` and forward to `hi` (`lo ≤ t0 ≤ hi`),
/// using at most `max_step` per step.
pub fn integrate_two_sided(
    symbol: &SymbolModel,
    start: &PhasePoint,
    t0: f64,
    lo: f64,
    hi: f64,
    max_step: f64,
    opts: &FlowOptions,
) -> Result<Bicharacteristic> {
    if !(lo <= t0 && t0 <= hi && lo < hi) || !(max_step > 0.0) {
        return Err(param_err!("need lo <= t0 <= hi with lo < hi and a positive step"));
    }
    let steps_for = |len: f64| (Float::ceil(len / max_step) as usize).max(16);
    let mut samples: Vec<(f64, State)> = Vec::new();
    let mut rich = 0.0f64;
    let mut have_rich = false;
    if lo < t0 {
        let b = integrate_bicharacteristic(symbol, start, (t0, lo), steps_for(t0 - lo), opts)?;
        have_rich |= b.richardson_error.is_some();
        rich = rich.max(b.richardson_error.unwrap_or(0.0));
        samples = to_states(&b);
        samples.pop();
    }
    if hi > t0 {
        let f = integrate_bicharacteristic(symbol, start, (t0, hi), steps_for(hi - t0), opts)?;
        have_rich |= f.richardson_error.is_some();
        rich = rich.max(f.richardson_error.unwrap_or(0.0));
        samples.extend(to_states(&f));
    } else {
        let x = start.x2();
        let xi = start.xi2();
        samples.push((t0, [x[0], x[1], xi[0], xi[1], 0.0, 0.0]));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(assemble(symbol, start.dim(), t0, samples, have_rich.then_some(rich)))
}

fn to_states(b: &Bicharacteristic) -> Vec<(f64, State)> {
    (0..b.times.len())
        .map(|k| (b.times[k], [b.x[k][0], b.x[k][1], b.xi[k][0], b.xi[k][1], b.psi[k], b.psi[k]]))
        .collect()
}

fn assemble(symbol: &SymbolModel, dim: usize, t0: f64, mut samples: Vec<(f64, State)>, richardson_error: Option<f64>) -> Bicharacteristic {
    if samples.len() > 1 && samples[0].0 > samples[1].0 {
        samples.reverse();
    }
    let n = samples.len();
    let mut b = Bicharacteristic {
        dim,
        t0,
        times: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        xi: Vec::with_capacity(n),
        psi: Vec::with_capacity(n),
        dx: Vec::with_capacity(n),
        dxi: Vec::with_capacity(n),
        dpsi: Vec::with_capacity(n),
        psi_ode_gap: 0.0,
        richardson_error,
    };
    let closed_form = symbol.homogeneity().degree().is_some();
    for (t, y) in samples {
        let f = rhs(symbol, t, &y);
        b.times.push(t);
        b.x.push([y[0], y[1]]);
        b.xi.push([y[2], y[3]]);
        b.psi.push(if closed_form { y[4] } else { y[5] });
        b.dx.push([f[0], f[1]]);
        b.dxi.push([f[2], f[3]]);
        b.dpsi.push(if closed_form { f[4] } else { f[5] });
        b.psi_ode_gap = b.psi_ode_gap.max(Float::abs(y[4] - y[5]));
    }
    b
}

impl Bicharacteristic {
    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn covers(&self, t: f64) -> bool {
        let (a, b) = self.span();
        t >= a - 1e-12 * (1.0 + Float::abs(a)) && t <= b + 1e-12 * (1.0 + Float::abs(b))
    }

    /// Cubic Hermite interpolation of `(x, ξ, ψ)` at time `t`.
    pub fn state_at(&self, t: f64) -> Result<(Vec2, Vec2, f64)> {
        let (a, b) = self.span();
        if !self.covers(t) {
            return Err(Error::Range { time: t, start: a, end: b });
        }
        let t = t.clamp(a, b);
        let k = match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(k) => return Ok((self.x[k], self.xi[k], self.psi[k])),
            Err(k) => k.clamp(1, self.times.len() - 1) - 1,
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let herm = |p0: f64, m0: f64, p1: f64, m1: f64| h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1;
        let mut x = [0.0; 2];
        let mut xi = [0.0; 2];
        for i in 0..2 {
            x[i] = herm(self.x[k][i], self.dx[k][i], self.x[k + 1][i], self.dx[k + 1][i]);
            xi[i] = herm(self.xi[k][i], self.dxi[k][i], self.xi[k + 1][i], self.dxi[k + 1][i]);
        }
        let psi = herm(self.psi[k], self.dpsi[k], self.psi[k + 1], self.dpsi[k + 1]);
        Ok((x, xi, psi))
    }

    pub fn point_at(&self, t: f64) -> Result<PhasePoint> {
        let (x, xi, _) = self.state_at(t)?;
        Ok(PhasePoint { x: x[..self.dim].to_vec(), xi: xi[..self.dim].to_vec() })
    }

    pub fn start(&self) -> PhasePoint {
        self.point_at(self.t0).expect("t0 inside span")
    }

    /// CSV rows `t, x…, ξ…, ψ`.
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        (0..self.times.len())
            .map(|k| {
                let mut r = alloc::vec![self.times[k]];
                r.extend_from_slice(&self.x[k][..self.dim]);
                r.extend_from_slice(&self.xi[k][..self.dim]);
                r.push(self.psi[k]);
                r
            })
            .collect()
    }

    pub fn csv_header(&self) -> Vec<alloc::string::String> {
        let mut h = alloc::vec![alloc::string::String::from("t")];
        for i in 1..=self.dim {
            h.push(alloc::format!("x{i}"));
        }
        for i in 1..=self.dim {
            h.push(alloc::format!("xi{i}"));
        }
        h.push("psi".into());
        h
    }
}

/// Ratio `|y_h − y_{h/2}| / |y_{h/2} − y_{h/4}|` of endpoint errors; ≈ 16 for 4th order.
pub fn richardson_ratio(symbol: &SymbolModel, start: &PhasePoint, t_span: (f64, f64), steps: usize) -> Result<f64> {
    let o = FlowOptions::default();
    let a = run(symbol, start, t_span.0, t_span.1, steps, &o)?;
    let b = run(symbol, start, t_span.0, t_span.1, 2 * steps, &o)?;
    let c = run(symbol, start, t_span.0, t_span.1, 4 * steps, &o)?;
    let (a, b, c) = (a.last().unwrap().1, b.last().unwrap().1, c.last().unwrap().1);
    Ok(state_distance(&a, &b) / state_distance(&b, &c))
}

/// Matrices `∂(x, ξ)(t)/∂(x₀, ξ₀)` along a bicharacteristic.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalFlow {
    pub dim: usize,
    pub times: Vec<f64>,
    pub matrices: Vec<Mat4>,
    /// `max |det M(t) − 1|`.
    pub max_det_deviation: f64,
    /// Largest gap between the re-integrated and the stored trajectory.
    pub trajectory_gap: f64,
}

impl VariationalFlow {
    /// Block `∂a/∂b` with `a, b ∈ {x, ξ}` given as offsets 0 (x) or `d` (ξ).
    pub fn block(&self, k: usize, row: usize, col: usize) -> Mat2 {
        let d = self.dim;
        let mut m = [[0.0; 2]; 2];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = self.matrices[k][row + i][col + j];
            }
        }
        m
    }
}

fn generator(symbol: &SymbolModel, t: f64, x: Vec2, xi: Vec2) -> Mat4 {
    let d = symbol.dim();
    let j = symbol.jet(x, t, xi);
    let mut a = [[0.0; 4]; 4];
    for i in 0..d {
        for k in 0..d {
            a[i][k] = j.dxxi[k][i];
            a[i][d + k] = j.dxixi[i][k];
            a[d + i][k] = -j.dxx[i][k];
            a[d + i][d + k] = -j.dxxi[i][k];
        }
    }
    a
}

/// Integrates the augmented system on the bicharacteristic's own time samples.
pub fn variational_flow(symbol: &SymbolModel, bichar: &Bicharacteristic) -> Result<VariationalFlow> {
    let d = bichar.dim;
    let n2 = 2 * d;
    let k0 = bichar
        .times
        .iter()
        .position(|&t| t == bichar.t0)
        .ok_or_else(|| param_err!("trajectory has no sample at its start time"))?;
    let n = bichar.times.len();
    let mut mats = alloc::vec![[[0.0; 4]; 4]; n];
    let mut gap = 0.0f64;
    mats[k0] = identity4(n2);
    type Aug = ([f64; 4], Mat4);
    let f = |t: f64, s: &Aug| -> Aug {
        let x = [s.0[0], s.0[1]];
        let xi = [s.0[2], s.0[3]];
        let j = symbol.jet(x, t, xi);
        let a = generator(symbol, t, x, xi);
        let mut dm = [[0.0; 4]; 4];
        for i in 0..n2 {
            for c in 0..n2 {
                dm[i][c] = (0..n2).map(|k| a[i][k] * s.1[k][c]).sum();
            }
        }
        ([j.dxi[0], j.dxi[1], -j.dx[0], -j.dx[1]], dm)
    };
    let axpy = |s: &Aug, k: &Aug, h: f64| -> Aug {
        let mut o = *s;
        for i in 0..4 {
            o.0[i] += h * k.0[i];
            for c in 0..4 {
                o.1[i][c] += h * k.1[i][c];
            }
        }
        o
    };
    for dir in [1i64, -1] {
        let mut s: Aug = ([bichar.x[k0][0], bichar.x[k0][1], bichar.xi[k0][0], bichar.xi[k0][1]], identity4(n2));
        let mut k = k0 as i64;
        loop {
            let next = k + dir;
            if next < 0 || next >= n as i64 {
                break;
            }
            let t = bichar.times[k as usize];
            let h = bichar.times[next as usize] - t;
            let k1 = f(t, &s);
            let k2 = f(t + h / 2.0, &axpy(&s, &k1, h / 2.0));
            let k3 = f(t + h / 2.0, &axpy(&s, &k2, h / 2.0));
            let k4 = f(t + h, &axpy(&s, &k3, h));
            for i in 0..4 {
                s.0[i] += h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
                for c in 0..4 {
                    s.1[i][c] += h / 6.0 * (k1.1[i][c] + 2.0 * k2.1[i][c] + 2.0 * k3.1[i][c] + k4.1[i][c]);
                }
            }
            let u = next as usize;
            mats[u] = s.1;
            for i in 0..d {
                gap = gap.max(Float::abs(s.0[i] - bichar.x[u][i])).max(Float::abs(s.0[2 + i] - bichar.xi[u][i]));
            }
            k = next;
        }
    }
    let max_det_deviation = mats.iter().map(|m| Float::abs(det(m, n2) - 1.0)).fold(0.0, f64::max);
    Ok(VariationalFlow { dim: d, times: bichar.times.clone(), matrices: mats, max_det_deviation, trajectory_gap: gap })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairLipschitz {
    pub pair: usize,
    pub max_ratio: f64,
    /// Smallest `envelope − ratio` over the samples.
    pub min_slack: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BilipschitzReport {
    pub rows: Vec<PairLipschitz>,
    /// Pairs with coincident starting points.
    pub skipped: Vec<usize>,
    pub violations: usize,
}

/// Compares `d_R(t)/d_R(0)` to the Grönwall envelope `e^{2C₂|t|/R}` for each pair.
pub fn bilipschitz_report(
    symbol: &SymbolModel,
    pairs: &[(PhasePoint, PhasePoint)],
    big_r: f64,
    horizon: f64,
    c2: f64,
    steps: usize,
) -> Result<BilipschitzReport> {
    if Float::abs(horizon) > big_r * (1.0 + 1e-12) {
        return Err(param_err!("horizon {horizon} exceeds R = {big_r}"));
    }
    let opts = FlowOptions::default();
    let results = crate::par::par_map_range(pairs.len(), |i| -> Result<Option<PairLipschitz>> {
        let (p, q) = &pairs[i];
        let d0 = d_r_metric(p, q, big_r)?;
        if d0 == 0.0 {
            return Ok(None);
        }
        let a = integrate_bicharacteristic(symbol, p, (0.0, horizon), steps, &opts)?;
        let b = integrate_bicharacteristic(symbol, q, (0.0, horizon), steps, &opts)?;
        let mut row = PairLipschitz { pair: i, max_ratio: 0.0, min_slack: f64::INFINITY, violations: 0 };
        for k in 0..a.times.len() {
            let t = a.times[k];
            let pa = PhasePoint { x: a.x[k][..a.dim].to_vec(), xi: a.xi[k][..a.dim].to_vec() };
            let pb = PhasePoint { x: b.x[k][..b.dim].to_vec(), xi: b.xi[k][..b.dim].to_vec() };
            let ratio = d_r_metric(&pa, &pb, big_r)? / d0;
            let env = Float::exp(2.0 * c2 * Float::abs(t) / big_r);
            row.max_ratio = row.max_ratio.max(ratio);
            row.min_slack = row.min_slack.min(env - ratio);
            if ratio > env * (1.0 + 1e-12) {
                row.violations += 1;
            }
        }
        Ok(Some(row))
    });
    let mut rep = BilipschitzReport::default();
    for (i, r) in results.into_iter().enumerate() {
        match r? {
            Some(row) => {
                rep.violations += row.violations;
                rep.rows.push(row);
            }
            None => rep.skipped.push(i),
        }
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SeparationMode {
    /// `|Δx_t| / (|t| |Δξ|)`.
    Linear,
    /// `|Δx_t| / (|t| ∠(ξ¹, ξ²))`.
    Angular,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeparationRow {
    pub first: usize,
    pub second: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeparationReport {
    pub rows: Vec<SeparationRow>,
    pub skipped: Vec<(usize, usize)>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Separation of bicharacteristics sharing the start `x0`, over `t ∈ [√R, T]`.
pub fn separation_report(
    symbol: &SymbolModel,
    x0: &[f64],
    xis: &[Vec<f64>],
    horizon: f64,
    big_r: f64,
    mode: SeparationMode,
    steps: usize,
) -> Result<SeparationReport> {
    let t_min = Float::sqrt(big_r);
    if !(horizon > t_min) {
        return Err(param_err!("horizon must exceed R^(1/2) = {t_min}"));
    }
    let opts = FlowOptions::default();
    let flows = crate::par::par_map(xis, |xi| {
        let start = PhasePoint::new(x0, xi)?;
        integrate_bicharacteristic(symbol, &start, (0.0, horizon), steps, &opts)
    });
    let flows: Vec<Bicharacteristic> = flows.into_iter().collect::<Result<_>>()?;
    let mut rep = SeparationReport { rows: Vec::new(), skipped: Vec::new(), min_ratio: f64::INFINITY, max_ratio: 0.0 };
    for i in 0..xis.len() {
        for j in i + 1..xis.len() {
            let denom = match mode {
                SeparationMode::Linear => crate::math::dist(&xis[i], &xis[j]),
                SeparationMode::Angular => {
                    let c = crate::math::dot(&xis[i], &xis[j]) / (crate::math::norm(&xis[i]) * crate::math::norm(&xis[j]));
                    Float::acos(c.clamp(-1.0, 1.0))
                }
            };
            if denom == 0.0 {
                rep.skipped.push((i, j));
                continue;
            }
            let mut row = SeparationRow { first: i, second: j, min_ratio: f64::INFINITY, max_ratio: 0.0 };
            for k in 0..flows[i].times.len() {
                let t = flows[i].times[k];
                if t < t_min {
                    continue;
                }
                let dx = crate::math::dist(&flows[i].x[k], &flows[j].x[k]);
                let r = dx / (t * denom);
                row.min_ratio = row.min_ratio.min(r);
                row.max_ratio = row.max_ratio.max(r);
            }
            rep.min_ratio = rep.min_ratio.min(row.min_ratio);
            rep.max_ratio = rep.max_ratio.max(row.max_ratio);
            rep.rows.push(row);
        }
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AveragedHessian {
    pub matrix: Mat2,
    pub condition: f64,
    pub invertible: bool,
}

/// Trapezoid-rule time average of `∂²_ξ p` along `bichar` between `t_q` and `t`.
pub fn averaged_hessian(symbol: &SymbolModel, bichar: &Bicharacteristic, t_q: f64, t: f64) -> Result<AveragedHessian> {
    if t == t_q {
        return Err(param_err!("averaging window is empty (t = t_q)"));
    }
    let (a, b) = if t_q < t { (t_q, t) } else { (t, t_q) };
    let (sa, sb) = bichar.span();
    for s in [a, b] {
        if !bichar.covers(s) {
            return Err(Error::Range { time: s, start: sa, end: sb });
        }
    }
    let d = bichar.dim;
    let mut nodes = alloc::vec![a];
    nodes.extend(bichar.times.iter().copied().filter(|&s| s > a && s < b));
    nodes.push(b);
    let hess = |s: f64| -> Result<Mat2> {
        let (x, xi, _) = bichar.state_at(s)?;
        Ok(symbol.jet(x, s, xi).dxixi)
    };
    let mut acc = [[0.0; 2]; 2];
    let mut prev = hess(nodes[0])?;
    for w in nodes.windows(2) {
        let cur = hess(w[1])?;
        let h = w[1] - w[0];
        for i in 0..d {
            for j in 0..d {
                acc[i][j] += 0.5 * h * (prev[i][j] + cur[i][j]);
            }
        }
        prev = cur;
    }
    for row in acc.iter_mut() {
        for v in row.iter_mut() {
            *v /= b - a;
        }
    }
    let condition = sym_condition(&acc, d);
    Ok(AveragedHessian { matrix: acc, condition, invertible: condition <= SINGULAR_CONDITION })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{MetricField, make_halfwave, make_schrodinger};

    fn free(d: usize) -> SymbolModel {
        make_schrodinger(MetricField::scaled_identity(d, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn free_schrodinger_straight_line() {
        let p = free(2);
        let s = PhasePoint::new(&[1.0, -2.0], &[0.3, 0.4]).unwrap();
        let b = integrate_bicharacteristic(&p, &s, (0.0, 10.0), 64, &FlowOptions::checked()).unwrap();
        for k in 0..b.times.len() {
            let t = b.times[k];
            assert!((b.x[k][0] - (1.0 + 0.6 * t)).abs() < 1e-10);
            assert!((b.x[k][1] - (-2.0 + 0.8 * t)).abs() < 1e-10);
            assert!((b.psi[k] - 0.25 * t).abs() < 1e-10);
            assert_eq!(b.xi[k], [0.3, 0.4]);
        }
        assert!(b.psi_ode_gap < 1e-12);
        assert!(b.richardson_error.unwrap() < 1e-12);
    }

    #[test]
    fn free_halfwave_unit_speed_zero_phase() {
        let p = make_halfwave(MetricField::scaled_identity(2, 1.0).unwrap()).unwrap();
        let s = PhasePoint::new(&[0.0, 0.0], &[0.6, 0.8]).unwrap();
        let b = integrate_bicharacteristic(&p, &s, (0.0, 5.0), 32, &FlowOptions::default()).unwrap();
        let k = b.times.len() - 1;
        assert!((b.x[k][0] - 3.0).abs() < 1e-10 && (b.x[k][1] - 4.0).abs() < 1e-10);
        assert!(b.psi.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn backward_span_is_sorted_and_anchored() {
        let p = free(1);
        let b = integrate_bicharacteristic(&p, &PhasePoint::d1(0.0, 1.0), (0.0, -4.0), 16, &FlowOptions::default()).unwrap();
        assert!(b.times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(b.t0, 0.0);
        assert_eq!(*b.psi.last().unwrap(), 0.0);
        assert!((b.x[0][0] + 8.0).abs() < 1e-12);
    }

    #[test]
    fn escape_is_reported() {
        let p = free(1);
        let region = crate::phase_space::PhaseSpaceRegion::ball(&[0.0], 1.0, &[0.0], 1.0).unwrap();
        let opts = FlowOptions { region: Some(region), ..FlowOptions::default() };
        let e = integrate_bicharacteristic(&p, &PhasePoint::d1(0.0, 1.0), (0.0, 1.0), 16, &opts).unwrap_err();
        match e {
            Error::FlowEscape { time } => assert!(time > 0.5 && time <= 0.5625 + 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn variational_free_flow() {
        let p = free(1);
        let b = integrate_bicharacteristic(&p, &PhasePoint::d1(0.0, 0.5), (0.0, 3.0), 30, &FlowOptions::default()).unwrap();
        let v = variational_flow(&p, &b).unwrap();
        let k = v.times.len() - 1;
        let t = v.times[k];
        assert!((v.block(k, 0, 1)[0][0] - 2.0 * t).abs() < 1e-12);
        assert!((v.block(k, 1, 1)[0][0] - 1.0).abs() < 1e-12);
        assert!((v.block(k, 0, 0)[0][0] - 1.0).abs() < 1e-12);
        assert!(v.block(k, 1, 0)[0][0].abs() < 1e-12);
        assert!(v.max_det_deviation < 1e-12);
    }

    #[test]
    fn hermite_interpolation_exact_for_free_flow() {
        let p = free(1);
        let b = integrate_bicharacteristic(&p, &PhasePoint::d1(1.0, 0.5), (0.0, 4.0), 16, &FlowOptions::default()).unwrap();
        let (x, xi, psi) = b.state_at(1.37).unwrap();
        assert!((x[0] - (1.0 + 1.37)).abs() < 1e-12 && xi[0] == 0.5);
        assert!((psi - 0.25 * 1.37).abs() < 1e-12);
        assert!(matches!(b.state_at(5.0), Err(Error::Range { .. })));
    }

    #[test]
    fn averaged_hessian_examples() {
        let p = free(2);
        let b = integrate_bicharacteristic(&p, &PhasePoint::new(&[0.0, 0.0], &[0.2, 0.1]).unwrap(), (0.0, 5.0), 16, &FlowOptions::default()).unwrap();
        let a = averaged_hessian(&p, &b, 1.0, 4.0).unwrap();
        assert_eq!(a.matrix, [[2.0, 0.0], [0.0, 2.0]]);
        assert!(a.invertible);
        let w = make_halfwave(MetricField::scaled_identity(2, 1.0).unwrap()).unwrap();
        let b = integrate_bicharacteristic(&w, &PhasePoint::new(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), (0.0, 5.0), 16, &FlowOptions::default()).unwrap();
        let a = averaged_hessian(&w, &b, 0.0, 5.0).unwrap();
        assert!(!a.invertible);
        assert!(averaged_hessian(&w, &b, 1.0, 1.0).is_err());
    }

    #[test]
    fn separation_free_examples() {
        let p = free(1);
        let r = separation_report(&p, &[0.0], &[alloc::vec![0.1], alloc::vec![0.4], alloc::vec![0.4]], 64.0, 16.0, SeparationMode::Linear, 64).unwrap();
        assert!((r.min_ratio - 2.0).abs() < 1e-10 && (r.max_ratio - 2.0).abs() < 1e-10);
        assert_eq!(r.skipped, [(1, 2)]);
        let w = make_halfwave(MetricField::scaled_identity(2, 1.0).unwrap()).unwrap();
        let r = separation_report(&w, &[0.0, 0.0], &[alloc::vec![0.6, 0.0], alloc::vec![1.2, 0.0]], 64.0, 16.0, SeparationMode::Linear, 64).unwrap();
        assert!(r.max_ratio < 1e-10);
    }

    #[test]
    fn bilipschitz_free_closed_form() {
        let p = free(1);
        let big_r = 64.0;
        let a = PhasePoint::d1(0.0, 0.3);
        let b = PhasePoint::d1(0.0, 0.3 + 1.0 / big_r.sqrt());
        let rep = bilipschitz_report(&p, &[(a.clone(), b), (a.clone(), a)], big_r, big_r, 2.0, 64).unwrap();
        assert_eq!(rep.skipped, [1]);
        assert_eq!(rep.violations, 0);
        assert!((rep.rows[0].max_ratio - 3.0).abs() < 1e-10);
    }
}
