//! Invariants checked over generated inputs.

mod common;

use common::fixtures::{dataset, sounding};
use common::oracles;
use geofpca::dataset::{great_circle_distance, remove_cross_tracks, select_region, GeoLocation, WavelengthSet};
use geofpca::fpca::{
    eigendecompose, estimate_error_covariance, CovarianceLabel, CovarianceMatrix, DifferencingOptions, ScoreField,
};
use geofpca::geostat::{EmpiricalVariogram, OrdinaryKriging, VariogramFit, WeightScheme};
use geofpca::mean_model::{fit_mean_model, Covariate};
use geofpca::simulation::trimmed_mean;
use geofpca::unmixing::estimate_land_fraction;
use geofpca::validation::rrmse;
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

fn fit(sill: f64, range: f64) -> VariogramFit {
    VariogramFit {
        model: "exponential".into(),
        sill,
        range,
        weights: WeightScheme::default(),
        objective: 0.0,
        degenerate: false,
        empirical: EmpiricalVariogram { bins: vec![] },
    }
}

fn field(pts: &[(f64, f64)], values: Vec<f64>, tau: f64) -> ScoreField {
    let n = pts.len();
    let mut f = ScoreField::new(
        (0..n as u64).collect(),
        pts.iter().map(|p| GeoLocation::new(p.0, p.1).unwrap()).collect(),
        vec![1; n],
        vec![values],
    )
    .unwrap();
    f.set_noise_variances(BTreeMap::from([(1, vec![tau])])).unwrap();
    f
}

/// Distinct sites in a 0.5 degree box, at least ~100 m apart.
fn sites(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0u32..500, 0u32..500), n).prop_map(|v| {
        let set: BTreeSet<(u32, u32)> = v.into_iter().collect();
        set.into_iter()
            .map(|(a, b)| (34.0 + a as f64 * 1e-3, 23.0 + b as f64 * 1e-3))
            .collect()
    })
}

fn spectrum(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1.0f64..100.0, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kriging_constant_field_returns_constant(
        pts in sites(2..25),
        c in -50.0f64..50.0,
        tau in 0.0f64..3.0,
        sill in 0.1f64..10.0,
        range in 1.0f64..60.0,
        t in (34.0f64..34.5, 23.0f64..23.5),
    ) {
        let n = pts.len();
        let ok = OrdinaryKriging::new(&field(&pts, vec![c; n], tau), 0, &fit(sill, range)).unwrap();
        let target = GeoLocation::new(t.0, t.1).unwrap();
        let p = ok.predict(target);
        prop_assert!((p.value - c).abs() <= 1e-10 * c.abs().max(1.0), "{} vs {c}", p.value);
        let w: f64 = ok.weights(target).iter().sum();
        prop_assert!((w - 1.0).abs() <= 1e-10);
        prop_assert!(p.variance >= 0.0);
    }

    #[test]
    fn kriging_is_translation_equivariant(
        pts in sites(3..25),
        seed_vals in prop::collection::vec(-5.0f64..5.0, 25),
        shift in -100.0f64..100.0,
        tau in 0.0f64..1.0,
        t in (34.0f64..34.5, 23.0f64..23.5),
    ) {
        let n = pts.len();
        let u: Vec<f64> = seed_vals[..n].to_vec();
        let v: Vec<f64> = u.iter().map(|x| x + shift).collect();
        let f = fit(2.0, 15.0);
        let target = GeoLocation::new(t.0, t.1).unwrap();
        let a = OrdinaryKriging::new(&field(&pts, u, tau), 0, &f).unwrap().predict(target).value;
        let b = OrdinaryKriging::new(&field(&pts, v, tau), 0, &f).unwrap().predict(target).value;
        prop_assert!((b - a - shift).abs() <= 1e-8 * shift.abs().max(1.0));
    }

    #[test]
    fn kriging_variance_vanishes_only_at_noise_free_data(
        pts in sites(3..20),
        vals in prop::collection::vec(-5.0f64..5.0, 20),
    ) {
        let n = pts.len();
        let f = field(&pts, vals[..n].to_vec(), 0.0);
        let ok = OrdinaryKriging::new(&f, 0, &fit(2.0, 10.0)).unwrap();
        let at = ok.predict(f.locations()[0]);
        prop_assert!(at.variance >= 0.0 && at.variance < 1e-6);
        prop_assert!((at.value - vals[0]).abs() < 1e-6);
        let off = ok.predict(GeoLocation::new(34.9, 23.9).unwrap());
        prop_assert!(off.variance > 0.0);
    }

    #[test]
    fn exact_mixture_recovers_fraction(
        land in spectrum(30),
        water in spectrum(30),
        alpha in 0.0f64..=1.0,
    ) {
        prop_assume!(land.iter().zip(&water).map(|(l, w)| (l - w).powi(2)).sum::<f64>() > 1.0);
        let obs: Vec<f64> = land.iter().zip(&water).map(|(l, w)| alpha * l + (1.0 - alpha) * w).collect();
        let a = estimate_land_fraction(&obs, &land, &water).unwrap();
        prop_assert!((a.alpha - alpha).abs() <= 1e-12, "{} vs {alpha}", a.alpha);
    }

    #[test]
    fn fraction_is_scale_invariant_and_swap_symmetric(
        obs in spectrum(20),
        land in spectrum(20),
        water in spectrum(20),
        k in 0.01f64..100.0,
    ) {
        prop_assume!(land.iter().zip(&water).map(|(l, w)| (l - w).powi(2)).sum::<f64>() > 1.0);
        let a = estimate_land_fraction(&obs, &land, &water).unwrap().alpha_unclamped;
        let scaled = |v: &[f64]| v.iter().map(|x| k * x).collect::<Vec<_>>();
        let b = estimate_land_fraction(&scaled(&obs), &scaled(&land), &scaled(&water)).unwrap().alpha_unclamped;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        let s = estimate_land_fraction(&obs, &water, &land).unwrap().alpha_unclamped;
        prop_assert!((s - (1.0 - a)).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn differencing_annihilates_latitude_affine_signal(
        start in 30.0f64..40.0,
        step in 0.001f64..0.05,
        a in prop::collection::vec(-100.0f64..100.0, 4),
        b in prop::collection::vec(-10.0f64..10.0, 4),
        n in 3usize..60,
    ) {
        let soundings = (0..n as u64)
            .map(|i| {
                let lat = start + step * i as f64;
                let v: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| ai + bi * lat).collect();
                sounding(i, lat, 20.0, 2, &v)
            })
            .collect();
        let ds = dataset(soundings);
        let ws = WavelengthSet::full(4).unwrap();
        let r = estimate_error_covariance(&ds, &ws, 2, DifferencingOptions::default()).unwrap();
        prop_assert!(r.covariance.matrix().iter().all(|x| x.abs() <= 1e-12), "{}", r.covariance.matrix());
    }

    #[test]
    fn mean_fit_residuals_orthogonal_and_order_free(
        rows in prop::collection::vec((33.0f64..35.0, 1.0f64..50.0, 1.0f64..50.0), 4..40),
        shift in -10.0f64..10.0,
        rot in 0usize..40,
    ) {
        let soundings: Vec<_> = rows
            .iter()
            .enumerate()
            .map(|(i, &(lat, v0, v1))| sounding(i as u64, lat, 20.0, 1, &[v0, v1]))
            .collect();
        prop_assume!(rows.iter().map(|r| r.0).fold(f64::MIN, f64::max) - rows.iter().map(|r| r.0).fold(f64::MAX, f64::min) > 0.05);
        let ws = WavelengthSet::full(2).unwrap();
        let ds = dataset(soundings.clone());
        let m = fit_mean_model(&ds, &ws, Covariate::Latitude).unwrap();
        for j in 0..2 {
            let (mut s0, mut s1, mut scale) = (0.0, 0.0, 0.0);
            for s in ds.soundings() {
                let c = m.coefficients(1, j).unwrap();
                let e = s.radiance[j].unwrap() - c[0] - c[1] * s.location.latitude;
                s0 += e;
                s1 += e * s.location.latitude;
                scale += s.radiance[j].unwrap().abs() * s.location.latitude;
            }
            prop_assert!(s0.abs() <= 1e-8 * scale && s1.abs() <= 1e-8 * scale);
        }
        let mut permuted = soundings.clone();
        let k = rot % permuted.len();
        permuted.rotate_left(k);
        let mp = fit_mean_model(&dataset(permuted), &ws, Covariate::Latitude).unwrap();
        let shifted: Vec<_> = soundings
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.radiance[0] = s.radiance[0].map(|v| v + shift);
                s
            })
            .collect();
        let ms = fit_mean_model(&dataset(shifted), &ws, Covariate::Latitude).unwrap();
        for j in 0..2 {
            let (c, cp) = (m.coefficients(1, j).unwrap(), mp.coefficients(1, j).unwrap());
            for (x, y) in c.iter().zip(cp) {
                prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
            }
        }
        let (c, cs) = (m.coefficients(1, 0).unwrap(), ms.coefficients(1, 0).unwrap());
        prop_assert!((cs[0] - c[0] - shift).abs() <= 1e-8 * c[0].abs().max(1.0));
        prop_assert!((cs[1] - c[1]).abs() <= 1e-8 * c[1].abs().max(1.0));
    }

    #[test]
    fn nested_regions_compose(
        lats in prop::collection::vec(33.0f64..36.0, 5..80),
        outer in (33.0f64..34.0, 35.0f64..36.0),
        inner in (34.0f64..34.5, 34.5f64..35.0),
    ) {
        let ds = dataset(lats.iter().enumerate().map(|(i, &l)| sounding(i as u64, l, 20.0, 1, &[1.0])).collect());
        let direct = select_region(&ds, inner.0, inner.1);
        let nested = select_region(&ds, outer.0, outer.1).and_then(|d| select_region(&d, inner.0, inner.1));
        match (direct, nested) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.soundings(), b.soundings()),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "nested and direct selection disagree"),
        }
    }

    #[test]
    fn cross_track_removal_partitions(
        n_tracks in 10usize..30,
        center_track in 0usize..30,
        fp in 1u8..=8,
        r in 1usize..=8,
    ) {
        let mut v = Vec::new();
        for t in 0..n_tracks {
            for p in 1..=8u8 {
                v.push(sounding((t * 8 + p as usize) as u64, 30.0 + 0.02 * t as f64 + 0.001 * p as f64, 20.0, p, &[1.0]));
            }
        }
        let ds = dataset(v);
        let center = (center_track.min(n_tracks - 1) * 8 + fp as usize) as u64;
        if let Ok((train, held)) = remove_cross_tracks(&ds, center, r) {
            let a: BTreeSet<u64> = train.soundings().iter().map(|s| s.id).collect();
            let b: BTreeSet<u64> = held.soundings().iter().map(|s| s.id).collect();
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(a.len() + b.len(), ds.len());
            prop_assert!(b.len() <= 8 * r && b.contains(&center));
        }
    }

    #[test]
    fn great_circle_triangle_inequality(
        p in (-80.0f64..80.0, -180.0f64..180.0),
        q in (-80.0f64..80.0, -180.0f64..180.0),
        s in (-80.0f64..80.0, -180.0f64..180.0),
    ) {
        let g = |x: (f64, f64)| GeoLocation::new(x.0, x.1).unwrap();
        let (a, b, c) = (g(p), g(q), g(s));
        prop_assert!(great_circle_distance(a, c) <= great_circle_distance(a, b) + great_circle_distance(b, c) + 1e-9);
        prop_assert!((great_circle_distance(a, b) - great_circle_distance(b, a)).abs() < 1e-9);
    }

    #[test]
    fn eigendecomposition_is_permutation_equivariant(
        entries in prop::collection::vec(-1.0f64..1.0, 36),
        perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let b = DMatrix::from_vec(6, 6, entries);
        let a = b.transpose() * &b + DMatrix::identity(6, 6) * 0.01;
        let p = DMatrix::from_fn(6, 6, |i, j| a[(perm[i], perm[j])]);
        let ws = WavelengthSet::full(6).unwrap();
        let ba = eigendecompose(&CovarianceMatrix::new(CovarianceLabel::Signal, ws.clone(), a).unwrap(), 1.0).unwrap();
        let bp = eigendecompose(&CovarianceMatrix::new(CovarianceLabel::Signal, ws, p).unwrap(), 1.0).unwrap();
        for (x, y) in ba.eigenvalues.iter().zip(&bp.eigenvalues) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        for k in 0..ba.k.min(bp.k) {
            let gap = ba.eigenvalues.iter().enumerate().filter(|&(j, _)| j != k)
                .map(|(_, l)| (l - ba.eigenvalues[k]).abs()).fold(f64::MAX, f64::min);
            if gap < 1e-3 {
                continue;
            }
            let moved: Vec<f64> = (0..6).map(|i| ba.eigenvectors[k][perm[i]]).collect();
            let dot: f64 = moved.iter().zip(&bp.eigenvectors[k]).map(|(x, y)| x * y).sum();
            prop_assert!((dot.abs() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn trimmed_mean_matches_sort_and_slice(v in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let got = trimmed_mean(&v, 0.1).unwrap();
        prop_assert!((got - oracles::trimmed_mean(&v, 0.1)).abs() <= 1e-9);
    }

    #[test]
    fn rrmse_is_nonnegative_and_exact_on_uniform_scaling(obs in spectrum(15), f in 0.5f64..1.5) {
        let imp: Vec<f64> = obs.iter().map(|o| f * o).collect();
        let e = rrmse(&imp, &obs).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!((e - (f - 1.0).abs()).abs() <= 1e-12);
    }
}
