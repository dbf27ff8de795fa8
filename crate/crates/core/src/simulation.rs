//! Synthetic data from the geospatial functional model: a single-footprint
//! land/water transect with one mixed site, and a full eight-footprint orbit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{great_circle_distance, GeoLocation, Sounding, SpectralDataset, FOOTPRINT_COUNT};
use crate::error::{Error, Result};
use crate::unmixing::{detect_mixed_region, mixed_region_between, unmix_region, UnmixConfig};

/// Derive an independent stream seed from a base seed and a stream index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Smooth measurement-error draw `sigma(w) * e(w)` with
/// `e(w) = nu1 sin(pi (w - w_min) / c) / sqrt(c/2) + nu2 cos(...) / sqrt(c/2)`,
/// `nu ~ N(0, c/2)` and `c` the number of wavelengths, so `Var e(w) = 1`.
pub fn simulate_error_process(rng: &mut impl Rng, wavelengths: &[usize], sigma: &[f64]) -> Vec<f64> {
    assert_eq!(wavelengths.len(), sigma.len(), "sigma must cover every wavelength");
    let c = wavelengths.len() as f64;
    let w_min = wavelengths.iter().copied().min().unwrap_or(0) as f64;
    let half = (c / 2.0).sqrt();
    let nu1 = half * normal(rng);
    let nu2 = half * normal(rng);
    wavelengths
        .iter()
        .zip(sigma)
        .map(|(&w, &s)| {
            let t = std::f64::consts::PI * (w as f64 - w_min) / c;
            s * (nu1 * t.sin() + nu2 * t.cos()) / half
        })
        .collect()
}

/// Zero-mean Gaussian field at fixed sites, factorized once.
#[derive(Debug, Clone)]
pub struct GaussianField {
    chol_l: DMatrix<f64>,
}

impl GaussianField {
    pub fn new(locations: &[GeoLocation], covariance: impl Fn(f64) -> f64) -> Result<Self> {
        let n = locations.len();
        let mut c = DMatrix::from_fn(n, n, |i, j| {
            covariance(great_circle_distance(locations[i], locations[j]))
        });
        let jitter = 1e-10 * c.diagonal().max().max(f64::MIN_POSITIVE);
        for i in 0..n {
            c[(i, i)] += jitter;
        }
        let chol = c
            .cholesky()
            .ok_or_else(|| Error::Numerical("field covariance is not positive definite".into()))?;
        Ok(Self { chol_l: chol.l() })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let z = DVector::from_fn(self.chol_l.nrows(), |_, _| normal(rng));
        (&self.chol_l * z).iter().copied().collect()
    }
}

/// Law of one component's score field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ComponentLaw {
    /// Gaussian field with covariance `sill * exp(-h / range_km)`.
    Exponential { sill: f64, range_km: f64 },
    /// Gaussian field with covariance `sill * exp(-(h / length_km)^2)`.
    SquaredExponential { sill: f64, length_km: f64 },
    /// Independent `N(0, variance)` at every site.
    Iid { variance: f64 },
}

impl ComponentLaw {
    pub fn variance(&self) -> f64 {
        match *self {
            Self::Exponential { sill, .. } | Self::SquaredExponential { sill, .. } => sill,
            Self::Iid { variance } => variance,
        }
    }

    pub fn covariance(&self, h: f64) -> f64 {
        match *self {
            Self::Exponential { sill, range_km } => sill * (-h / range_km).exp(),
            Self::SquaredExponential { sill, length_km } => sill * (-(h / length_km).powi(2)).exp(),
            Self::Iid { variance } => {
                if h == 0.0 {
                    variance
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Exponential { sill, range_km } => sill >= 0.0 && range_km > 0.0,
            Self::SquaredExponential { sill, length_km } => sill >= 0.0 && length_km > 0.0,
            Self::Iid { variance } => variance >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid component law {self:?}")))
        }
    }
}

/// Sampler for one score field over a fixed set of sites.
#[derive(Debug, Clone)]
enum FieldSampler {
    Field(GaussianField),
    Iid { sd: f64, n: usize },
}

impl FieldSampler {
    fn new(law: &ComponentLaw, locations: &[GeoLocation]) -> Result<Self> {
        law.validate()?;
        match *law {
            ComponentLaw::Iid { variance } => Ok(Self::Iid {
                sd: variance.sqrt(),
                n: locations.len(),
            }),
            _ => Ok(Self::Field(GaussianField::new(locations, |h| law.covariance(h))?)),
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Self::Field(f) => f.sample(rng),
            Self::Iid { sd, n } => (0..*n).map(|_| sd * normal(rng)).collect(),
        }
    }
}

/// Mean coefficients and eigenvectors of one surface type over wavelengths `1..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndmemberProfile {
    pub intercept: Vec<f64>,
    /// Change in mean radiance per degree of latitude.
    pub slope: Vec<f64>,
    /// Orthonormal eigenvectors.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EndmemberProfile {
    pub fn len(&self) -> usize {
        self.intercept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intercept.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let m = self.len();
        if m < 2 || self.slope.len() != m || self.eigenvectors.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidInput("endmember profile lengths disagree".into()));
        }
        for (i, a) in self.eigenvectors.iter().enumerate() {
            for (j, b) in self.eigenvectors.iter().enumerate().take(i + 1) {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-6 {
                    return Err(Error::InvalidInput(format!(
                        "endmember eigenvectors {} and {} are not orthonormal",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mean radiance at latitude offset `dlat` from the profile's reference latitude.
    pub fn mean(&self, dlat: f64) -> Vec<f64> {
        self.intercept
            .iter()
            .zip(&self.slope)
            .map(|(b0, b1)| b0 + b1 * dlat)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndmemberSet {
    pub land: EndmemberProfile,
    pub water: EndmemberProfile,
}

impl EndmemberSet {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let set: Self = serde_json::from_reader(BufReader::new(file))?;
        set.land.validate()?;
        set.water.validate()?;
        if set.land.len() != set.water.len() {
            return Err(Error::InvalidInput("land and water profiles differ in length".into()));
        }
        Ok(set)
    }
}

/// Continuum with a run of absorption lines, positive everywhere.
fn band_shape(x: f64) -> f64 {
    let mut dip = 0.0;
    for j in 0..12 {
        let center = 0.12 + 0.065 * j as f64;
        let depth = 0.35 + 0.3 * ((j * 7 % 5) as f64 / 4.0);
        dip += depth * (-((x - center) / 0.012).powi(2)).exp();
    }
    (1.0 + 0.25 * x - 0.3 * x * x) * (1.0 - dip.min(0.85))
}

fn orthonormalize(mut vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for i in 0..vs.len() {
        for j in 0..i {
            let d: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
            let prev = vs[j].clone();
            vs[i].iter_mut().zip(&prev).for_each(|(a, b)| *a -= d * b);
        }
        let n = vs[i].iter().map(|a| a * a).sum::<f64>().sqrt();
        vs[i].iter_mut().for_each(|a| *a /= n);
        let lead = vs[i]
            .iter()
            .copied()
            .fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
        if lead < 0.0 {
            vs[i].iter_mut().for_each(|a| *a = -*a);
        }
    }
    vs
}

/// Built-in land and water profiles over `m` wavelengths, each with three
/// orthonormal eigenvectors.
pub fn synthetic_endmembers(m: usize) -> EndmemberSet {
    let xs: Vec<f64> = (0..m).map(|i| i as f64 / (m.max(2) - 1) as f64).collect();
    let shape: Vec<f64> = xs.iter().map(|&x| band_shape(x)).collect();
    let profile = |level: f64, tilt: f64, slope: f64, bases: [fn(f64) -> f64; 3]| EndmemberProfile {
        intercept: xs
            .iter()
            .zip(&shape)
            .map(|(&x, s)| level * s * (1.0 + tilt * x))
            .collect(),
        slope: xs.iter().zip(&shape).map(|(_, s)| slope * s).collect(),
        eigenvectors: orthonormalize(
            bases
                .iter()
                .map(|f| xs.iter().zip(&shape).map(|(&x, s)| s * f(x)).collect())
                .collect(),
        ),
    };
    EndmemberSet {
        water: profile(
            40.0,
            -0.3,
            -1.5,
            [
                |x| 1.0 - 0.5 * x,
                |x| (2.0 * std::f64::consts::PI * x).sin(),
                |x| x * x - 0.4,
            ],
        ),
        land: profile(
            120.0,
            0.15,
            4.0,
            [
                |x| 1.0 + 0.3 * x,
                |x| x - 0.5,
                |x| (3.0 * std::f64::consts::PI * x).cos(),
            ],
        ),
    }
}

/// Layout and laws of the single-footprint land/water transect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransectConfig {
    pub n_sites: usize,
    pub span_deg: f64,
    /// Location of the middle (mixed) site.
    pub center: (f64, f64),
    /// Longitude step per latitude step.
    pub lon_per_lat: f64,
    pub footprint: u8,
    pub n_wavelengths: usize,
    pub water: Vec<ComponentLaw>,
    pub land: Vec<ComponentLaw>,
    pub rho: f64,
    /// Land fraction of the mixed site; drawn from U(0, 1) when absent.
    pub alpha: Option<f64>,
    pub seed: u64,
}

impl Default for TransectConfig {
    fn default() -> Self {
        Self {
            n_sites: 41,
            span_deg: 1.2,
            center: (35.49881, 23.83578),
            lon_per_lat: -0.25,
            footprint: 4,
            n_wavelengths: 100,
            water: vec![
                ComponentLaw::Exponential {
                    sill: 5.0,
                    range_km: 10.0,
                },
                ComponentLaw::Iid { variance: 2.0 },
            ],
            land: vec![
                ComponentLaw::Exponential {
                    sill: 10.0,
                    range_km: 7.0,
                },
                ComponentLaw::Iid { variance: 2.0 },
                ComponentLaw::Iid { variance: 1.0 },
            ],
            rho: 0.01,
            alpha: None,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransectTruth {
    pub alpha: f64,
    pub mixed_id: u64,
    /// `scores[k][i]` per surface; sites outside a surface's extent hold `None`.
    pub water_scores: Vec<Vec<Option<f64>>>,
    pub land_scores: Vec<Vec<Option<f64>>>,
    /// Noise-free spectrum of every site.
    pub noise_free: BTreeMap<u64, Vec<f64>>,
    pub sigma_water: Vec<f64>,
    pub sigma_land: Vec<f64>,
}

/// Transect simulator with the field factorizations built once.
#[derive(Debug, Clone)]
pub struct TransectSimulator {
    config: TransectConfig,
    endmembers: EndmemberSet,
    locations: Vec<GeoLocation>,
    water_fields: Vec<FieldSampler>,
    land_fields: Vec<FieldSampler>,
}

impl TransectSimulator {
    pub fn new(config: TransectConfig, endmembers: Option<EndmemberSet>) -> Result<Self> {
        if config.n_sites < 3 || config.n_sites.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "transect needs an odd number of at least 3 sites, got {}",
                config.n_sites
            )));
        }
        if !(config.rho >= 0.0) || !(config.span_deg > 0.0) {
            return Err(Error::InvalidInput("rho must be >= 0 and span positive".into()));
        }
        if config.alpha.is_some_and(|a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::InvalidInput("alpha outside [0, 1]".into()));
        }
        let endmembers = endmembers.unwrap_or_else(|| synthetic_endmembers(config.n_wavelengths));
        for (name, laws, prof) in [
            ("water", &config.water, &endmembers.water),
            ("land", &config.land, &endmembers.land),
        ] {
            prof.validate()?;
            if laws.len() > prof.eigenvectors.len() {
                return Err(Error::InvalidInput(format!(
                    "{name}: {} component laws but {} eigenvectors",
                    laws.len(),
                    prof.eigenvectors.len()
                )));
            }
        }
        let mid = config.n_sites / 2;
        let step = config.span_deg / (config.n_sites - 1) as f64;
        let locations = (0..config.n_sites)
            .map(|i| {
                let o = i as f64 - mid as f64;
                GeoLocation::new(
                    config.center.0 + o * step,
                    config.center.1 + o * step * config.lon_per_lat,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let water_sites = &locations[..=mid];
        let land_sites = &locations[mid..];
        let water_fields = config
            .water
            .iter()
            .map(|l| FieldSampler::new(l, water_sites))
            .collect::<Result<_>>()?;
        let land_fields = config
            .land
            .iter()
            .map(|l| FieldSampler::new(l, land_sites))
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            endmembers,
            locations,
            water_fields,
            land_fields,
        })
    }

    pub fn config(&self) -> &TransectConfig {
        &self.config
    }

    pub fn locations(&self) -> &[GeoLocation] {
        &self.locations
    }

    /// One transect draw with the stream seeded by `seed`.
    pub fn simulate(&self, seed: u64) -> Result<(SpectralDataset, TransectTruth)> {
        let cfg = &self.config;
        let mut rng = rng_from_seed(seed);
        let n = cfg.n_sites;
        let mid = n / 2;
        let m = self.endmembers.water.len();
        let wavelengths: Vec<usize> = (1..=m).collect();
        let alpha = match cfg.alpha {
            Some(a) => a,
            None => rng.random::<f64>(),
        };
        let water_scores: Vec<Vec<f64>> = self.water_fields.iter().map(|f| f.sample(&mut rng)).collect();
        let land_scores: Vec<Vec<f64>> = self.land_fields.iter().map(|f| f.sample(&mut rng)).collect();
        let dlat = |i: usize| self.locations[i].latitude - cfg.center.0;
        let spectrum = |prof: &EndmemberProfile, scores: &[Vec<f64>], i: usize, j: usize| {
            let mut f = prof.mean(dlat(i));
            for (phi, s) in prof.eigenvectors.iter().zip(scores) {
                f.iter_mut().zip(phi).for_each(|(v, p)| *v += s[j] * p);
            }
            f
        };
        let region_sigma = |prof: &EndmemberProfile, sites: std::ops::Range<usize>| -> Vec<f64> {
            let count = sites.len() as f64;
            let mut acc = vec![0.0; m];
            for i in sites {
                acc.iter_mut().zip(prof.mean(dlat(i))).for_each(|(a, v)| *a += v);
            }
            acc.iter().map(|a| cfg.rho * a / count).collect()
        };
        let sigma_water = region_sigma(&self.endmembers.water, 0..mid);
        let sigma_land = region_sigma(&self.endmembers.land, mid + 1..n);

        let mut soundings = Vec::with_capacity(n);
        let mut noise_free = BTreeMap::new();
        for i in 0..n {
            let (f, sigma, fraction) = if i < mid {
                (
                    spectrum(&self.endmembers.water, &water_scores, i, i),
                    sigma_water.clone(),
                    0.0,
                )
            } else if i > mid {
                (
                    spectrum(&self.endmembers.land, &land_scores, i, i - mid),
                    sigma_land.clone(),
                    1.0,
                )
            } else {
                let fw = spectrum(&self.endmembers.water, &water_scores, i, mid);
                let fl = spectrum(&self.endmembers.land, &land_scores, i, 0);
                let f = fl.iter().zip(&fw).map(|(l, w)| alpha * l + (1.0 - alpha) * w).collect();
                let s = sigma_land
                    .iter()
                    .zip(&sigma_water)
                    .map(|(l, w)| alpha * l + (1.0 - alpha) * w)
                    .collect();
                (f, s, alpha)
            };
            let e = simulate_error_process(&mut rng, &wavelengths, &sigma);
            let radiance = f.iter().zip(&e).map(|(a, b)| Some(a + b)).collect();
            noise_free.insert(i as u64, f);
            soundings.push(Sounding {
                id: i as u64,
                location: self.locations[i],
                footprint: cfg.footprint,
                land_fraction: Some(fraction),
                radiance,
            });
        }
        let pad = |scores: &[Vec<f64>], offset: usize, len: usize| -> Vec<Vec<Option<f64>>> {
            scores
                .iter()
                .map(|s| {
                    (0..n)
                        .map(|i| (i >= offset && i < offset + len).then(|| s[i - offset]))
                        .collect()
                })
                .collect()
        };
        let mut ds = SpectralDataset::new(soundings, m)?;
        ds.metadata.insert("simulation".into(), "transect".into());
        let truth = TransectTruth {
            alpha,
            mixed_id: mid as u64,
            water_scores: pad(&water_scores, 0, mid + 1),
            land_scores: pad(&land_scores, mid, n - mid),
            noise_free,
            sigma_water,
            sigma_land,
        };
        Ok((ds, truth))
    }
}

/// One transect draw from `config`, seeded by `config.seed`.
pub fn simulate_mixed_transect(config: &TransectConfig) -> Result<(SpectralDataset, TransectTruth)> {
    TransectSimulator::new(config.clone(), None)?.simulate(config.seed)
}

/// Trimmed mean dropping `floor(trim * n)` values from each end.
pub fn trimmed_mean(values: &[f64], trim: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..0.5).contains(&trim) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let g = (trim * v.len() as f64).floor() as usize;
    let kept = &v[g..v.len() - g];
    Some(kept.iter().sum::<f64>() / kept.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub transect: TransectConfig,
    pub unmix: UnmixConfig,
    pub trim: f64,
    /// Locate the mixed window from reported land fractions; otherwise use
    /// the known middle site.
    pub detect_region: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            transect: TransectConfig::default(),
            unmix: UnmixConfig::default(),
            trim: 0.1,
            detect_region: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub rho: f64,
    pub method: String,
    pub trimmed_mean_rel_abs_error: f64,
    pub n_reps: usize,
    pub seed: u64,
    pub failures: usize,
}

/// Estimates of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub alpha: f64,
    pub alpha_unmix: f64,
    pub alpha_interp: f64,
}

/// Simulate one transect and estimate the mixed site's land fraction by both methods.
pub fn run_unmixing_replicate(sim: &TransectSimulator, config: &StudyConfig, seed: u64) -> Result<ReplicateOutcome> {
    let (ds, truth) = sim.simulate(seed)?;
    let u = &config.unmix;
    let spec = if config.detect_region {
        detect_mixed_region(&ds, u.land_hi, u.water_lo, u.reference_length)?
    } else {
        let lat = sim.locations()[truth.mixed_id as usize].latitude;
        mixed_region_between(&ds, lat, lat, u.land_hi, u.water_lo, u.reference_length)?
    };
    let rows = unmix_region(&ds, &spec, u)?;
    let row = rows
        .iter()
        .find(|r| r.id == truth.mixed_id)
        .ok_or_else(|| Error::InsufficientData("mixed site was not unmixed".into()))?;
    Ok(ReplicateOutcome {
        alpha: truth.alpha,
        alpha_unmix: row.unmixing.fit.alpha,
        alpha_interp: row.interpolation.fit.alpha,
    })
}

/// Replicated unmixing study over a noise grid: trimmed-mean relative absolute
/// error of the mixed site's land fraction for both methods.
pub fn run_unmixing_study(rho_grid: &[f64], n_reps: usize, config: &StudyConfig) -> Result<Vec<StudyRow>> {
    if n_reps < 2 {
        return Err(Error::InvalidInput(format!("n_reps = {n_reps}; need at least 2")));
    }
    let mut rows = Vec::new();
    for (gi, &rho) in rho_grid.iter().enumerate() {
        let sim = TransectSimulator::new(
            TransectConfig {
                rho,
                ..config.transect.clone()
            },
            None,
        )?;
        let base = derive_seed(config.transect.seed, gi as u64);
        let outcomes: Vec<Result<ReplicateOutcome>> = (0..n_reps)
            .into_par_iter()
            .map(|r| run_unmixing_replicate(&sim, config, derive_seed(base, r as u64)))
            .collect();
        let ok: Vec<ReplicateOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
        let failures = n_reps - ok.len();
        if failures > 0 {
            log::warn!("rho {rho}: {failures} of {n_reps} replicates failed");
        }
        for (method, pick) in [
            (
                "unmixing",
                (|o: &ReplicateOutcome| o.alpha_unmix) as fn(&ReplicateOutcome) -> f64,
            ),
            ("interpolation", |o: &ReplicateOutcome| o.alpha_interp),
        ] {
            let errs: Vec<f64> = ok.iter().map(|o| (pick(o) - o.alpha).abs() / o.alpha).collect();
            rows.push(StudyRow {
                rho,
                method: method.into(),
                trimmed_mean_rel_abs_error: trimmed_mean(&errs, config.trim).unwrap_or(f64::NAN),
                n_reps,
                seed: config.transect.seed,
                failures,
            });
        }
    }
    Ok(rows)
}

/// `rho, method, trimmed_mean_rel_abs_error, n_reps, seed`.
pub fn write_study(rows: &[StudyRow], out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "rho,method,trimmed_mean_rel_abs_error,n_reps,seed")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.rho, r.method, r.trimmed_mean_rel_abs_error, r.n_reps, r.seed
        )?;
    }
    Ok(())
}

/// Layout and laws of a simulated eight-footprint orbit segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitConfig {
    pub n_tracks: usize,
    pub track_spacing_deg: f64,
    pub start: (f64, f64),
    /// Longitude change per degree of latitude along the track.
    pub lon_per_lat: f64,
    /// Offsets between adjacent footprints of one cross-track.
    pub footprint_dlat: f64,
    pub footprint_dlon: f64,
    pub n_wavelengths: usize,
    pub components: Vec<ComponentLaw>,
    pub rho: f64,
    /// Cross-track indices whose soundings carry no radiance.
    pub gap_tracks: Vec<usize>,
    pub seed: u64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            n_tracks: 60,
            track_spacing_deg: 0.02,
            start: (34.5, 23.9),
            lon_per_lat: -0.25,
            footprint_dlat: 0.0012,
            footprint_dlon: 0.0143,
            n_wavelengths: 100,
            components: vec![
                ComponentLaw::Exponential {
                    sill: 8.0,
                    range_km: 40.0,
                },
                ComponentLaw::Exponential {
                    sill: 4.0,
                    range_km: 30.0,
                },
                ComponentLaw::Exponential {
                    sill: 2.0,
                    range_km: 20.0,
                },
            ],
            rho: 0.01,
            gap_tracks: Vec::new(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitTruth {
    /// `scores[k][i]` in dataset row order.
    pub scores: Vec<Vec<f64>>,
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Relative scale of footprint `p`'s mean and noise.
fn footprint_factor(p: u8, spread: f64) -> f64 {
    1.0 + spread * (p as f64 - 4.5) / 3.5
}

/// Orbit simulator with the field factorizations built once.
#[derive(Debug, Clone)]
pub struct OrbitSimulator {
    config: OrbitConfig,
    profile: EndmemberProfile,
    locations: Vec<(GeoLocation, u8, usize)>,
    fields: Vec<FieldSampler>,
}

impl OrbitSimulator {
    pub fn new(config: OrbitConfig) -> Result<Self> {
        if config.n_tracks < 3 || !(config.rho >= 0.0) {
            return Err(Error::InvalidInput("orbit needs >= 3 tracks and rho >= 0".into()));
        }
        let profile = synthetic_endmembers(config.n_wavelengths).water;
        if config.components.len() > profile.eigenvectors.len() {
            return Err(Error::InvalidInput(format!(
                "at most {} components supported",
                profile.eigenvectors.len()
            )));
        }
        let mut locations = Vec::with_capacity(config.n_tracks * FOOTPRINT_COUNT as usize);
        for t in 0..config.n_tracks {
            let lat0 = config.start.0 + t as f64 * config.track_spacing_deg;
            let lon0 = config.start.1 + t as f64 * config.track_spacing_deg * config.lon_per_lat;
            for p in 1..=FOOTPRINT_COUNT {
                let o = p as f64 - 1.0;
                let loc = GeoLocation::new(lat0 + o * config.footprint_dlat, lon0 + o * config.footprint_dlon)?;
                locations.push((loc, p, t));
            }
        }
        let locs: Vec<GeoLocation> = locations.iter().map(|l| l.0).collect();
        let fields = config
            .components
            .iter()
            .map(|l| FieldSampler::new(l, &locs))
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            profile,
            locations,
            fields,
        })
    }

    pub fn config(&self) -> &OrbitConfig {
        &self.config
    }

    pub fn simulate(&self, seed: u64) -> Result<(SpectralDataset, OrbitTruth)> {
        let cfg = &self.config;
        let mut rng = rng_from_seed(seed);
        let m = self.profile.len();
        let wavelengths: Vec<usize> = (1..=m).collect();
        let scores: Vec<Vec<f64>> = self.fields.iter().map(|f| f.sample(&mut rng)).collect();
        let lat_mid = cfg.start.0 + 0.5 * (cfg.n_tracks - 1) as f64 * cfg.track_spacing_deg;
        let base_sigma: Vec<f64> = self.profile.intercept.iter().map(|b| cfg.rho * b).collect();
        let mut soundings = Vec::with_capacity(self.locations.len());
        for (i, &(loc, p, t)) in self.locations.iter().enumerate() {
            let scale = footprint_factor(p, 0.03);
            let mut f: Vec<f64> = self
                .profile
                .mean(loc.latitude - lat_mid)
                .iter()
                .map(|v| v * scale)
                .collect();
            for (phi, s) in self.profile.eigenvectors.iter().zip(&scores) {
                f.iter_mut().zip(phi).for_each(|(v, q)| *v += s[i] * q);
            }
            let sigma: Vec<f64> = base_sigma.iter().map(|s| s * footprint_factor(p, 0.1)).collect();
            let e = simulate_error_process(&mut rng, &wavelengths, &sigma);
            let radiance = if cfg.gap_tracks.contains(&t) {
                vec![None; m]
            } else {
                f.iter().zip(&e).map(|(a, b)| Some(a + b)).collect()
            };
            soundings.push(Sounding {
                id: (t * FOOTPRINT_COUNT as usize + p as usize - 1) as u64,
                location: loc,
                footprint: p,
                land_fraction: Some(0.0),
                radiance,
            });
        }
        let mut ds = SpectralDataset::new(soundings, m)?;
        ds.metadata.insert("simulation".into(), "orbit".into());
        let truth = OrbitTruth {
            scores,
            eigenvectors: self.profile.eigenvectors[..self.fields.len()].to_vec(),
        };
        Ok((ds, truth))
    }
}

pub fn simulate_orbit(config: &OrbitConfig) -> Result<(SpectralDataset, OrbitTruth)> {
    OrbitSimulator::new(config.clone())?.simulate(config.seed)
}
