//! Cube grids, tube incidences, dyadic pigeonholing, the focusing relation
//! between tubes and coarse cubes, and double-ended cube counts.
//!
//! Cells are space-time boxes of side `R^{1/2}` tiling the cube `Q_R` of
//! side `R`; coarse cells have side `R^{1-δ}`. Cell indices are
//! `[i_x1, i_x2, i_t]` with `i_x2 = 0` in one space dimension.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result, param_err};
use crate::flow::Bicharacteristic;
use crate::par::par_map;
use crate::phase_space::PhasePoint;

pub type CellId = [i64; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubeGrid {
    pub dim: usize,
    pub big_r: f64,
    pub delta: f64,
    /// Lower corner of `Q_R` in `(x₁, x₂, t)`.
    pub origin: [f64; 3],
    pub cell: f64,
    pub coarse: f64,
    /// Fine cells per axis.
    pub cells_per_axis: i64,
    pub coarse_per_axis: i64,
}

impl CubeGrid {
    /// `Q_R` centred at `(center_x, center_t)`.
    pub fn new(dim: usize, big_r: f64, delta: f64, center_x: &[f64], center_t: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) || center_x.len() != dim {
            return Err(param_err!("cube grid needs d in {{1, 2}} and a centre of that dimension"));
        }
        if !(big_r >= 4.0 && delta > 0.0 && delta < 0.5) {
            return Err(param_err!("cube grid needs R >= 4 and 0 < delta < 1/2"));
        }
        let cell = Float::sqrt(big_r);
        let coarse = Float::powf(big_r, 1.0 - delta);
        let mut origin = [0.0; 3];
        for a in 0..dim {
            origin[a] = center_x[a] - big_r / 2.0;
        }
        origin[2] = center_t - big_r / 2.0;
        let cells_per_axis = Float::floor(big_r / cell + 1e-9) as i64;
        let coarse_per_axis = Float::ceil(cells_per_axis as f64 * cell / coarse - 1e-9) as i64;
        Ok(Self { dim, big_r, delta, origin, cell, coarse, cells_per_axis, coarse_per_axis })
    }

    pub fn len(&self) -> usize {
        (self.cells_per_axis as usize).pow(self.dim as u32 + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.cells_per_axis == 0
    }

    pub fn contains(&self, id: &CellId) -> bool {
        let n = self.cells_per_axis;
        let ok = |v: i64| (0..n).contains(&v);
        ok(id[0]) && ok(id[2]) && if self.dim == 2 { ok(id[1]) } else { id[1] == 0 }
    }

    /// Every cell, lexicographically ordered.
    pub fn cells(&self) -> Vec<CellId> {
        let n = self.cells_per_axis;
        let n2 = if self.dim == 2 { n } else { 1 };
        let mut out = Vec::with_capacity(self.len());
        for i in 0..n {
            for j in 0..n2 {
                for k in 0..n {
                    out.push([i, j, k]);
                }
            }
        }
        out
    }

    /// Centre `(x₁, x₂, t)` of a fine cell.
    pub fn center(&self, id: &CellId) -> [f64; 3] {
        let mut c = [0.0; 3];
        for a in 0..3 {
            if a == 1 && self.dim == 1 {
                continue;
            }
            c[a] = self.origin[a] + (id[a] as f64 + 0.5) * self.cell;
        }
        c
    }

    /// Half-diagonal of a fine cell in space-time.
    pub fn circumradius(&self) -> f64 {
        self.cell * Float::sqrt(self.dim as f64 + 1.0) / 2.0
    }

    /// Coarse cell containing the centre of a fine cell.
    pub fn coarse_of(&self, id: &CellId) -> CellId {
        let c = self.center(id);
        let mut s = [0i64; 3];
        for a in 0..3 {
            if a == 1 && self.dim == 1 {
                continue;
            }
            s[a] = Float::floor((c[a] - self.origin[a]) / self.coarse) as i64;
        }
        s
    }

    /// The coarse cell and its neighbours inside the grid (at most `3^{d+1}`).
    pub fn coarse_neighbourhood(&self, s: &CellId) -> Vec<CellId> {
        let n = self.coarse_per_axis;
        let r2 = if self.dim == 2 { -1..=1 } else { 0..=0 };
        let mut out = Vec::new();
        for a in -1..=1 {
            for b in r2.clone() {
                for c in -1..=1 {
                    let v = [s[0] + a, s[1] + b, s[2] + c];
                    if (0..n).contains(&v[0]) && (0..n).contains(&v[2]) && (self.dim == 1 || (0..n).contains(&v[1])) {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    /// Space-time distance between fine-cell centres.
    pub fn distance(&self, a: &CellId, b: &CellId) -> f64 {
        let (ca, cb) = (self.center(a), self.center(b));
        Float::sqrt((0..3).map(|k| (ca[k] - cb[k]) * (ca[k] - cb[k])).sum::<f64>())
    }

    /// Fine cell containing a space-time point, if inside `Q_R`.
    pub fn locate(&self, x: &[f64], t: f64) -> Option<CellId> {
        let mut id = [0i64; 3];
        let p = [x[0], if self.dim == 2 { x[1] } else { 0.0 }, t];
        for a in 0..3 {
            if a == 1 && self.dim == 1 {
                continue;
            }
            id[a] = Float::floor((p[a] - self.origin[a]) / self.cell) as i64;
        }
        self.contains(&id).then_some(id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Family {
    One,
    Two,
}

/// Space-time neighbourhood of a bicharacteristic's spatial projection.
#[derive(Clone, Debug)]
pub struct Tube {
    pub bichar: Bicharacteristic,
    pub radius: f64,
    pub extent: (f64, f64),
    pub family: Family,
    /// Phase-space label at `t = 0`.
    pub label: PhasePoint,
    /// Core samples `(x₁, x₂, t)` inside `extent`, ascending in `t`.
    pub core: Vec<[f64; 3]>,
}

impl Tube {
    pub fn new(bichar: Bicharacteristic, extent: (f64, f64), radius: f64, family: Family) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(param_err!("tube radius must be positive"));
        }
        if !(extent.0 < extent.1) || !bichar.covers(extent.0) || !bichar.covers(extent.1) {
            let (a, b) = bichar.span();
            return Err(Error::Range { time: if bichar.covers(extent.0) { extent.1 } else { extent.0 }, start: a, end: b });
        }
        let mut times = alloc::vec![extent.0];
        times.extend(bichar.times.iter().copied().filter(|&t| t > extent.0 && t < extent.1));
        times.push(extent.1);
        let mut core = Vec::with_capacity(times.len());
        for t in times {
            let (x, _, _) = bichar.state_at(t)?;
            core.push([x[0], x[1], t]);
        }
        let label = bichar.point_at(0.0).unwrap_or_else(|_| bichar.start());
        Ok(Self { bichar, radius, extent, family, label, core })
    }

    /// Largest space-time step between consecutive core samples.
    pub fn max_sample_gap(&self) -> f64 {
        self.core.windows(2).map(|w| dist3(&w[0], &w[1])).fold(0.0, f64::max)
    }

    /// Distance from a space-time point to the piecewise-linear core.
    pub fn distance_to(&self, p: &[f64; 3]) -> f64 {
        self.core.windows(2).map(|w| segment_distance(p, &w[0], &w[1])).fold(f64::INFINITY, f64::min)
    }

    /// Whether the core stays in the spatial extent of `Q_R`.
    pub fn inside(&self, grid: &CubeGrid) -> bool {
        let side = grid.cells_per_axis as f64 * grid.cell;
        self.core.iter().all(|c| {
            (0..grid.dim).all(|a| c[a] >= grid.origin[a] && c[a] <= grid.origin[a] + side)
                && c[2] >= grid.origin[2] - 1e-9
                && c[2] <= grid.origin[2] + side + 1e-9
        })
    }
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    Float::sqrt((0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum::<f64>())
}

fn segment_distance(p: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let ab: [f64; 3] = core::array::from_fn(|k| b[k] - a[k]);
    let ap: [f64; 3] = core::array::from_fn(|k| p[k] - a[k]);
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let s = if len2 == 0.0 { 0.0 } else { (ap.iter().zip(&ab).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0) };
    let q: [f64; 3] = core::array::from_fn(|k| a[k] + s * ab[k]);
    dist3(p, &q)
}

/// Tube–cell incidence relation with accessors in both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct Incidence {
    pub families: Vec<Family>,
    /// Sorted cell lists, one per tube.
    pub tube_cells: Vec<Vec<CellId>>,
    /// Sorted tube lists per incident cell.
    pub cell_tubes: BTreeMap<CellId, Vec<usize>>,
}

impl Incidence {
    pub fn cells_of(&self, tube: usize) -> &[CellId] {
        &self.tube_cells[tube]
    }

    pub fn tubes_at(&self, cell: &CellId) -> &[usize] {
        self.cell_tubes.get(cell).map_or(&[], |v| v.as_slice())
    }

    pub fn is_incident(&self, tube: usize, cell: &CellId) -> bool {
        self.tube_cells[tube].binary_search(cell).is_ok()
    }

    /// Number of tubes of `family` through `cell`.
    pub fn family_count(&self, cell: &CellId, family: Family) -> usize {
        self.tubes_at(cell).iter().filter(|&&i| self.families[i] == family).count()
    }

    pub fn len(&self) -> usize {
        self.tube_cells.iter().map(|c| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A cell is incident to a tube when its centre lies within
/// `radius + circumradius` of the sampled core. Cores must be sampled at
/// least four times per `R^{1/2}` of space-time arc.
pub fn incidences(tubes: &[Tube], grid: &CubeGrid) -> Result<Incidence> {
    let max_gap = grid.cell / 4.0;
    for (i, t) in tubes.iter().enumerate() {
        if t.max_sample_gap() > max_gap * (1.0 + 1e-9) {
            return Err(Error::Resolution(alloc::format!(
                "tube {i} core has a sample gap {} above R^(1/2)/4 = {max_gap}",
                t.max_sample_gap()
            )));
        }
    }
    let reach = grid.circumradius();
    let tube_cells: Vec<Vec<CellId>> = par_map(tubes, |t| {
        let thr = t.radius + reach;
        let mut found = BTreeSet::new();
        for w in t.core.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut lo = [0i64; 3];
            let mut hi = [0i64; 3];
            for k in 0..3 {
                if k == 1 && grid.dim == 1 {
                    continue;
                }
                let m = a[k].min(b[k]) - thr;
                let n = a[k].max(b[k]) + thr;
                lo[k] = (Float::floor((m - grid.origin[k]) / grid.cell) as i64).max(0);
                hi[k] = (Float::floor((n - grid.origin[k]) / grid.cell) as i64).min(grid.cells_per_axis - 1);
            }
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for k in lo[2]..=hi[2] {
                        let id = [i, j, k];
                        if found.contains(&id) {
                            continue;
                        }
                        if segment_distance(&grid.center(&id), &a, &b) <= thr {
                            found.insert(id);
                        }
                    }
                }
            }
        }
        found.into_iter().collect()
    });
    let mut cell_tubes: BTreeMap<CellId, Vec<usize>> = BTreeMap::new();
    for (i, cells) in tube_cells.iter().enumerate() {
        for c in cells {
            cell_tubes.entry(*c).or_default().push(i);
        }
    }
    Ok(Incidence { families: tubes.iter().map(|t| t.family).collect(), tube_cells, cell_tubes })
}

/// Largest power of two not exceeding `n ≥ 1`.
pub fn dyadic_floor(n: usize) -> u64 {
    debug_assert!(n >= 1);
    1u64 << (usize::BITS - 1 - n.leading_zeros())
}

/// Dyadic pigeonholing of cells by family counts and of family-one tubes
/// by how many bucket cells they hit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Buckets {
    /// `(μ₁, μ₂)` → cells with `#𝕋₁ ∼ μ₁` and `#𝕋₂ ∼ μ₂`.
    pub cells: BTreeMap<(u64, u64), Vec<CellId>>,
    /// `(λ₁, μ₁, μ₂)` → family-one tubes hitting `∼ λ₁` cells of the `(μ₁, μ₂)` bucket.
    pub tubes: BTreeMap<(u64, u64, u64), Vec<usize>>,
    /// Incident cells with a zero count in either family.
    pub unbucketed_cells: usize,
}

impl Buckets {
    pub fn triples(&self) -> usize {
        self.tubes.len()
    }

    /// `(100 d log₂ R)³`.
    pub fn triple_bound(dim: usize, big_r: f64) -> f64 {
        Float::powi(100.0 * dim as f64 * Float::log2(big_r), 3)
    }

    /// Histogram rows `(λ₁, μ₁, μ₂, tube count)`.
    pub fn histogram(&self) -> Vec<(u64, u64, u64, usize)> {
        self.tubes.iter().map(|(&(l, a, b), v)| (l, a, b, v.len())).collect()
    }
}

pub fn pigeonhole_buckets(inc: &Incidence) -> Buckets {
    let mut out = Buckets::default();
    for cell in inc.cell_tubes.keys() {
        let m1 = inc.family_count(cell, Family::One);
        let m2 = inc.family_count(cell, Family::Two);
        if m1 == 0 || m2 == 0 {
            out.unbucketed_cells += 1;
            continue;
        }
        out.cells.entry((dyadic_floor(m1), dyadic_floor(m2))).or_default().push(*cell);
    }
    for (&(m1, m2), cells) in &out.cells {
        let set: BTreeSet<&CellId> = cells.iter().collect();
        for (i, tc) in inc.tube_cells.iter().enumerate() {
            if inc.families[i] != Family::One {
                continue;
            }
            let hits = tc.iter().filter(|c| set.contains(c)).count();
            if hits > 0 {
                out.tubes.entry((dyadic_floor(hits), m1, m2)).or_default().push(i);
            }
        }
    }
    out
}

/// `T ∼ S` for every family-one tube, with per-triple maximisers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FocusingRelation {
    /// Tube → related coarse cells.
    pub related: BTreeMap<usize, BTreeSet<CellId>>,
    /// `(triple, tube)` → maximising coarse cell.
    pub maximizers: BTreeMap<((u64, u64, u64), usize), CellId>,
    pub triples: usize,
}

impl FocusingRelation {
    pub fn count(&self, tube: usize) -> usize {
        self.related.get(&tube).map_or(0, |s| s.len())
    }

    /// `3^{d+1}` times the number of realised triples.
    pub fn bound(&self, dim: usize) -> usize {
        3usize.pow(dim as u32 + 1) * self.triples
    }

    pub fn max_count(&self) -> usize {
        self.related.values().map(|s| s.len()).max().unwrap_or(0)
    }
}

/// For each triple and each of its tubes, the coarse cell holding the most
/// bucket cells hit by the tube (lowest index on ties) and its neighbours.
pub fn focusing_relation(buckets: &Buckets, inc: &Incidence, grid: &CubeGrid) -> FocusingRelation {
    let mut rel = FocusingRelation { triples: buckets.tubes.len(), ..Default::default() };
    for (&triple, tubes) in &buckets.tubes {
        let (_, m1, m2) = triple;
        let bucket: BTreeSet<&CellId> = buckets.cells[&(m1, m2)].iter().collect();
        for &t in tubes {
            let mut counts: BTreeMap<CellId, usize> = BTreeMap::new();
            for c in inc.cells_of(t).iter().filter(|c| bucket.contains(c)) {
                *counts.entry(grid.coarse_of(c)).or_default() += 1;
            }
            let best = counts.iter().fold(None::<(CellId, usize)>, |acc, (s, &n)| match acc {
                Some((_, m)) if m >= n => acc,
                _ => Some((*s, n)),
            });
            if let Some((s, _)) = best {
                rel.maximizers.insert((triple, t), s);
                rel.related.entry(t).or_default().extend(grid.coarse_neighbourhood(&s));
            }
        }
    }
    rel
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoubleEndCount {
    /// `q′ → #{shell tubes through q and q′}` over `q′ ∈ R^δT₂` with `dist(q, q′) ≥ R^{1-δ}`.
    pub per_cell: BTreeMap<CellId, usize>,
    /// `|𝒬_q|`, the number of such `q′` with a nonzero count.
    pub total: usize,
    pub max_per_cell: usize,
    /// Time extent of `∪q′` along `T₂`, including one cell side.
    pub time_extent: f64,
    /// `ν^{-1} R^{1/2+δ}`.
    pub predicted_extent: f64,
}

/// Counts cells `q′` of `T₂` far from `q` that share a shell tube with `q`.
pub fn double_end_count(
    q: &CellId,
    shell_tubes: &[usize],
    t2: usize,
    inc: &Incidence,
    grid: &CubeGrid,
    nu: f64,
) -> Result<DoubleEndCount> {
    if !(nu > 0.0) {
        return Err(param_err!("nu must be positive"));
    }
    if !grid.contains(q) {
        return Err(param_err!("anchor cell {q:?} is outside the grid"));
    }
    let through_q: Vec<usize> = shell_tubes.iter().copied().filter(|&i| inc.is_incident(i, q)).collect();
    let far = Float::powf(grid.big_r, 1.0 - grid.delta);
    let mut per_cell = BTreeMap::new();
    for c in inc.cells_of(t2) {
        if grid.distance(q, c) < far {
            continue;
        }
        let n = through_q.iter().filter(|&&i| inc.is_incident(i, c)).count();
        if n > 0 {
            per_cell.insert(*c, n);
        }
    }
    let ts: Vec<f64> = per_cell.keys().map(|c| grid.center(c)[2]).collect();
    let time_extent = if ts.is_empty() {
        0.0
    } else {
        ts.iter().copied().fold(f64::NEG_INFINITY, f64::max) - ts.iter().copied().fold(f64::INFINITY, f64::min) + grid.cell
    };
    Ok(DoubleEndCount {
        total: per_cell.len(),
        max_per_cell: per_cell.values().copied().max().unwrap_or(0),
        per_cell,
        time_extent,
        predicted_extent: Float::powf(grid.big_r, 0.5 + grid.delta) / nu,
    })
}
