//! Small synthetic datasets shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use geofpca::dataset::{GeoLocation, Sounding, SpectralDataset};
use geofpca::fpca::ScoreField;
use geofpca::simulation::{ComponentLaw, OrbitConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut impl Rng) -> f64 {
    // Box-Muller keeps the fixtures independent of the library's sampler.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn sounding(id: u64, lat: f64, lon: f64, footprint: u8, values: &[f64]) -> Sounding {
    Sounding {
        id,
        location: GeoLocation::new(lat, lon).unwrap(),
        footprint,
        land_fraction: None,
        radiance: values.iter().map(|&v| Some(v)).collect(),
    }
}

pub fn dataset(soundings: Vec<Sounding>) -> SpectralDataset {
    let m = soundings[0].radiance.len();
    SpectralDataset::new(soundings, m).unwrap()
}

/// Random symmetric positive definite `n x n` matrix `B'B / n + I * shift`.
pub fn random_spd(rng: &mut impl Rng, n: usize, shift: f64) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| gauss(rng)).collect()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>() / n as f64 + if i == j { shift } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Single-component score field at scattered sites around (34.5, 23.9).
pub fn scattered_field(rng: &mut impl Rng, n: usize, tau: f64) -> ScoreField {
    let locs: Vec<GeoLocation> = (0..n)
        .map(|_| GeoLocation::new(34.5 + 0.4 * rng.random::<f64>(), 23.9 + 0.4 * rng.random::<f64>()).unwrap())
        .collect();
    let u: Vec<f64> = locs
        .iter()
        .map(|l| 2.0 + (8.0 * l.latitude).sin() + 0.5 * (5.0 * l.longitude).cos() + 0.3 * gauss(rng))
        .collect();
    let fps: Vec<u8> = (0..n).map(|i| (i % 8) as u8 + 1).collect();
    let mut f = ScoreField::new((0..n as u64).collect(), locs, fps, vec![u]).unwrap();
    let tau_map: BTreeMap<u8, Vec<f64>> = (1..=8u8).map(|p| (p, vec![tau * p as f64 / 8.0])).collect();
    f.set_noise_variances(tau_map).unwrap();
    f
}

pub fn sites(f: &ScoreField) -> Vec<(f64, f64)> {
    f.locations().iter().map(|l| (l.latitude, l.longitude)).collect()
}

/// Noise-free orbit whose scores are smooth squared-exponential fields, so
/// second differences of the radiance are negligible.
pub fn smooth_orbit(n_tracks: usize, components: usize, seed: u64) -> OrbitConfig {
    let laws = [
        ComponentLaw::SquaredExponential {
            sill: 8.0,
            length_km: 40.0,
        },
        ComponentLaw::SquaredExponential {
            sill: 4.0,
            length_km: 30.0,
        },
        ComponentLaw::SquaredExponential {
            sill: 2.0,
            length_km: 25.0,
        },
    ];
    OrbitConfig {
        n_tracks,
        components: laws[..components].to_vec(),
        rho: 0.0,
        seed,
        ..OrbitConfig::default()
    }
}
