use num_rational::Ratio;
use proptest::prelude::*;
use wavepacket_core::estimates::energy::{FrequencyGrid, energy_difference, energy_shell_sample};
use wavepacket_core::estimates::norms::{SpaceTimeCube, lp_spacetime_norm};
use wavepacket_core::fbi::{PhaseSpaceGrid, fbi_adjoint, fbi_forward};
use wavepacket_core::flow::{FlowOptions, integrate_bicharacteristic, variational_flow};
use wavepacket_core::phase_space::{d_r_metric, lattice_points, partition_weights, thicken};
use wavepacket_core::propagate::{Backend, FieldTrajectory, Method, SolverMeta};
use wavepacket_core::symbols::{MetricField, SymbolModel, loss_budget, make_halfwave, make_schrodinger};
use wavepacket_core::tubes::{CubeGrid, Family, Tube, focusing_relation, incidences, pigeonhole_buckets};
use wavepacket_core::{Complex64, PhasePoint, PhaseSpaceRegion, ScaleParams, SpatialField, SpatialGrid};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, failure_persistence: None, ..ProptestConfig::default() }
}

fn point(d: usize) -> impl Strategy<Value = PhasePoint> {
    (prop::collection::vec(-100.0f64..100.0, d), prop::collection::vec(-2.0f64..2.0, d)).prop_map(|(x, xi)| PhasePoint::new(&x, &xi).unwrap())
}

fn cosine_schrodinger(dim: usize, eps: f64) -> SymbolModel {
    make_schrodinger(MetricField::cosine_perturbed(dim, 1.0, eps, 4.0, 32.0 * std::f64::consts::PI).unwrap()).unwrap()
}

fn cosine_halfwave(eps: f64) -> SymbolModel {
    make_halfwave(MetricField::cosine_perturbed(2, 1.0, eps, 4.0, 32.0 * std::f64::consts::PI).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn d_r_is_a_metric(
        (p, q, w) in (1usize..=2).prop_flat_map(|d| (point(d), point(d), point(d))),
        r in 1.0f64..1e4
    ) {
        let pq = d_r_metric(&p, &q, r).unwrap();
        prop_assert_eq!(pq, d_r_metric(&q, &p, r).unwrap());
        prop_assert_eq!(d_r_metric(&p, &p, r).unwrap(), 0.0);
        prop_assert!(pq >= 0.0);
        let via = d_r_metric(&p, &w, r).unwrap() + d_r_metric(&w, &q, r).unwrap();
        prop_assert!(pq <= via * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn thickening_is_monotone_and_translation_covariant(
        r1 in 4.0f64..256.0, r2 in 4.0f64..256.0, shift in -50.0f64..50.0
    ) {
        let params = ScaleParams::new(256.0, 1.0, 0.25, 0.1).unwrap();
        let region = PhaseSpaceRegion::ball(&[0.0], 10.0, &[0.0], 0.5).unwrap();
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let a = thicken(&region, lo, &params).unwrap();
        let b = thicken(&region, hi, &params).unwrap();
        prop_assert!(a.margin_x >= b.margin_x && a.margin_xi >= b.margin_xi);
        let moved = thicken(&region.translated(&[shift]), lo, &params).unwrap();
        prop_assert_eq!(moved, a.translated(&[shift]));
    }

    #[test]
    fn partition_weights_are_a_partition_of_unity(x in -40.0f64..40.0, xi in -0.6f64..0.6) {
        let region = PhaseSpaceRegion::ball(&[0.0], 80.0, &[0.0], 1.0).unwrap();
        let lattice = lattice_points(64.0, &region).unwrap();
        let w = partition_weights(&lattice).unwrap();
        let p = PhasePoint::d1(x, xi);
        let mut total = 0.0;
        for k in 0..lattice.len() {
            let v = w.weight(k, &p);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            total += v;
        }
        prop_assert!((total - 1.0).abs() < 1e-12, "sum {}", total);
        prop_assert!((w.full_sum(&p) - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn flow_is_time_reversible_and_symplectic(
        d in 1usize..=2, x in -20.0f64..20.0, y in -20.0f64..20.0, k in -1.0f64..1.0, l in -1.0f64..1.0, t in 4.0f64..32.0
    ) {
        let sym = cosine_schrodinger(d, 0.05);
        let start = if d == 1 { PhasePoint::d1(x, k) } else { PhasePoint::new(&[x, y], &[k, l]).unwrap() };
        let opts = FlowOptions::unchecked();
        let fwd = integrate_bicharacteristic(&sym, &start, (0.0, t), 256, &opts).unwrap();
        let end = fwd.point_at(t).unwrap();
        let back = integrate_bicharacteristic(&sym, &end, (t, 0.0), 256, &opts).unwrap();
        let home = back.point_at(0.0).unwrap();
        let scale = 1.0 + start.x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let gap = d_r_metric(&home, &start, 1.0).unwrap();
        prop_assert!(gap <= 1e-8 * scale, "gap {}", gap);
        let var = variational_flow(&sym, &fwd).unwrap();
        prop_assert!(var.max_det_deviation <= 1e-6);
    }

    #[test]
    fn halfwave_flow_is_scale_invariant(x in -20.0f64..20.0, y in -20.0f64..20.0, angle in 0.0f64..std::f64::consts::TAU, m in 0.4f64..0.9) {
        let sym = cosine_halfwave(0.05);
        let xi = [m * angle.cos(), m * angle.sin()];
        let a = PhasePoint::new(&[x, y], &xi).unwrap();
        let b = PhasePoint::new(&[x, y], &[2.0 * xi[0], 2.0 * xi[1]]).unwrap();
        let opts = FlowOptions::unchecked();
        let ta = integrate_bicharacteristic(&sym, &a, (0.0, 16.0), 256, &opts).unwrap();
        let tb = integrate_bicharacteristic(&sym, &b, (0.0, 16.0), 256, &opts).unwrap();
        for (i, (xa, xb)) in ta.x.iter().zip(&tb.x).enumerate() {
            prop_assert!((xa[0] - xb[0]).abs() < 1e-8 && (xa[1] - xb[1]).abs() < 1e-8);
            prop_assert!((2.0 * ta.xi[i][0] - tb.xi[i][0]).abs() < 1e-8 && (2.0 * ta.xi[i][1] - tb.xi[i][1]).abs() < 1e-8);
        }
    }

    #[test]
    fn halfwave_symbol_is_one_homogeneous(x in -50.0f64..50.0, angle in 0.0f64..std::f64::consts::TAU, m in 0.5f64..1.0, lam in 0.5f64..2.0) {
        let sym = cosine_halfwave(0.1);
        let xi = [m * angle.cos(), m * angle.sin()];
        let p = sym.value(&[x, 0.3 * x], 0.0, &xi);
        let q = sym.value(&[x, 0.3 * x], 0.0, &[lam * xi[0], lam * xi[1]]);
        prop_assert!((q - lam * p).abs() <= 1e-12);
    }
}

fn band_limited(grid: SpatialGrid, coeffs: &[(f64, f64)]) -> SpatialField {
    let k0 = grid.frequency_spacing();
    SpatialField::from_fn(grid, |y| {
        coeffs.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, &(re, im))| {
            let k = (j as i64 - coeffs.len() as i64 / 2) as f64 * k0;
            acc + Complex64::new(re, im) * Complex64::from_polar(1.0, k * y[0])
        })
    })
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn fbi_is_an_isometry_with_exact_inverse(
        r_exp in 2u32..=4, coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..24)
    ) {
        let big_r = f64::powi(4.0, r_exp as i32);
        let grid = SpatialGrid::new(1, 64.0, 512).unwrap();
        let ps = PhaseSpaceGrid::new(grid, big_r).unwrap();
        let f = band_limited(grid, &coeffs);
        prop_assume!(f.norm_l2() > 1e-6);
        let big_f = fbi_forward(&f, &ps).unwrap();
        prop_assert!((big_f.norm_l2() / f.norm_l2() - 1.0).abs() <= 1e-6);
        prop_assert!(fbi_adjoint(&big_f, &grid).unwrap().rel_diff(&f).unwrap() <= 1e-6);
    }

    #[test]
    fn spacetime_norm_is_absolutely_homogeneous(re in -5.0f64..5.0, im in -5.0f64..5.0, p in 1.0f64..4.0) {
        let grid = SpatialGrid::new(1, 8.0, 128).unwrap();
        let times: Vec<f64> = (0..=32).map(|k| -2.0 + k as f64 / 8.0).collect();
        let c = Complex64::new(re, im);
        let make = |scale: Complex64| FieldTrajectory {
            t0: times[0],
            times: times.clone(),
            fields: times
                .iter()
                .map(|&t| SpatialField::from_fn(grid, |y| scale * Complex64::from_polar((-(y[0] * y[0]) / 4.0 - t * t).exp(), y[0] - t)))
                .collect(),
            meta: SolverMeta { method: Method::Exact, backend: Backend::Multiplier, steps: 0, step: 0.0, operator_norm: 0.0, norm_drift: 0.0 },
        };
        let cube = SpaceTimeCube::new(&[0.0], 0.0, 4.0, 8).unwrap();
        let base = lp_spacetime_norm(&make(Complex64::new(1.0, 0.0)), p, &cube).unwrap();
        let scaled = lp_spacetime_norm(&make(c), p, &cube).unwrap();
        prop_assert!((scaled - c.norm() * base).abs() <= 1e-12 * (1.0 + scaled));
    }

    #[test]
    fn energy_shell_is_sound_and_complete(
        xi1 in -1.0f64..1.0, xi2p in -1.0f64..1.0, tol in 1e-3f64..0.5, per_axis in 9usize..41, d in 1usize..=2
    ) {
        let sym = cosine_schrodinger(d, 0.1);
        let z = [3.0, -1.0];
        let (a, b) = (vec![xi1; d], vec![xi2p; d]);
        let grid = FrequencyGrid::new(d, -1.0, 1.0, per_axis).unwrap();
        let shell = energy_shell_sample(&sym, &sym, (&z[..d], 0.5), &a, &b, tol, &grid).unwrap();
        let brute: Vec<Vec<f64>> = (0..grid.len())
            .map(|k| grid.point(k))
            .filter(|eta| energy_difference(&sym, &sym, (&z[..d], 0.5), &a, &b, eta).abs() <= tol)
            .collect();
        for eta in &shell {
            prop_assert!(energy_difference(&sym, &sym, (&z[..d], 0.5), &a, &b, eta).abs() <= tol);
        }
        prop_assert_eq!(shell, brute);
    }
}

fn paraboloid() -> SymbolModel {
    make_schrodinger(MetricField::scaled_identity(1, 1.0).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn incidence_buckets_and_focusing_are_consistent(
        starts in prop::collection::vec((-100.0f64..100.0, -0.5f64..0.5, any::<bool>()), 1..12),
        radius in 2.0f64..20.0
    ) {
        let grid = CubeGrid::new(1, 256.0, 0.1, &[0.0], 0.0).unwrap();
        let sym = paraboloid();
        let tubes: Vec<Tube> = starts
            .iter()
            .map(|&(x, xi, one)| {
                let b = integrate_bicharacteristic(&sym, &PhasePoint::d1(x, xi), (-128.0, 128.0), 2048, &FlowOptions::unchecked()).unwrap();
                Tube::new(b, (-128.0, 128.0), radius, if one { Family::One } else { Family::Two }).unwrap()
            })
            .collect();
        let inc = incidences(&tubes, &grid).unwrap();
        let mut from_cells = 0;
        for (cell, ts) in &inc.cell_tubes {
            for &t in ts {
                prop_assert!(inc.cells_of(t).contains(cell));
            }
            from_cells += ts.len();
        }
        for (t, cells) in inc.tube_cells.iter().enumerate() {
            for c in cells {
                prop_assert!(inc.tubes_at(c).contains(&t));
            }
        }
        prop_assert_eq!(from_cells, inc.tube_cells.iter().map(|c| c.len()).sum::<usize>());

        let buckets = pigeonhole_buckets(&inc);
        let bucketed: usize = buckets.cells.values().map(|v| v.len()).sum();
        prop_assert_eq!(bucketed + buckets.unbucketed_cells, inc.cell_tubes.len());
        for (&(m1, m2), cells) in &buckets.cells {
            let family_one: std::collections::BTreeSet<usize> = buckets
                .tubes
                .iter()
                .filter(|((_, a, b), _)| (*a, *b) == (m1, m2))
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            let hitting = (0..tubes.len())
                .filter(|&t| inc.families[t] == Family::One && inc.cells_of(t).iter().any(|c| cells.contains(c)))
                .count();
            prop_assert_eq!(family_one.len(), hitting);
        }

        let rel = focusing_relation(&buckets, &inc, &grid);
        for t in 0..tubes.len() {
            prop_assert!(rel.count(t) <= rel.bound(1));
        }
    }

    #[test]
    fn loss_budget_identities(num in 0i64..=12, den in 1i64..=12, d in 1i64..=4, qn in 5i64..40) {
        prop_assume!(num <= den);
        let s = Ratio::new(num, den);
        let q = Ratio::new(qn, 2);
        let b = loss_budget(s, d, q).unwrap();
        let one = Ratio::from_integer(1);
        prop_assert_eq!(b.sigma * (Ratio::from_integer(3) + s), Ratio::from_integer(2));
        prop_assert_eq!(b.kappa, b.sigma - Ratio::new(1, 2));
        prop_assert_eq!(b.interval_count_exponent, Ratio::from_integer(2) * b.kappa);
        prop_assert_eq!(b.kappa1 * Ratio::from_integer(2) * (Ratio::from_integer(3) + s), one - s);
        prop_assert!(b.sigma >= Ratio::new(1, 2) && b.sigma <= Ratio::new(2, 3));
        prop_assert_eq!(b.kappa0 + Ratio::new(d, 1) / q, Ratio::new(d - 1, 2));
    }
}
