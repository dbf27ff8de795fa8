//! Fitted geospatial functional model and spectral imputation.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{common_wavelengths, GeoLocation, Sounding, SpectralDataset, WavelengthSet};
use crate::error::{Error, Result, StageExt};
use crate::fpca::{
    compute_score_noise_variance, compute_scores, eigendecompose, estimate_error_covariance,
    estimate_signal_covariance, DifferencingOptions, FpcaBasis, ScoreField,
};
use crate::geostat::{
    empirical_semivariogram, fit_variogram_wls, spatial_dependence_test, BinningSpec, ComponentSpatialModel,
    KrigingPrediction, PermutationTestConfig, ScorePredictor, WeightScheme,
};
use crate::mean_model::{fit_mean_model, Covariate, MeanModel};

/// Every tunable of the fitting pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub fve: f64,
    pub min_coverage: f64,
    pub covariate: Covariate,
    pub binning: BinningSpec,
    pub weights: WeightScheme,
    pub permutation: PermutationTestConfig,
    /// Largest latitude span, degrees, accepted as one homogeneous region.
    pub max_lat_span: Option<f64>,
    pub differencing: DifferencingOptions,
    /// Restrict the model to these indices (intersected with the coverage filter).
    pub wavelengths: Option<WavelengthSet>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            fve: 0.99,
            min_coverage: 1.0,
            covariate: Covariate::Latitude,
            binning: BinningSpec::default(),
            weights: WeightScheme::default(),
            permutation: PermutationTestConfig::default(),
            max_lat_span: Some(0.6),
            differencing: DifferencingOptions::default(),
            wavelengths: None,
        }
    }
}

/// Mean, basis and scores: everything up to and including the score-noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalFit {
    pub mean: MeanModel,
    pub basis: FpcaBasis,
    pub scores: ScoreField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoFpcaModel {
    /// Latitude window of the training soundings.
    pub region: (f64, f64),
    pub wavelengths: WavelengthSet,
    pub mean: MeanModel,
    pub basis: FpcaBasis,
    pub scores: ScoreField,
    pub components: Vec<ComponentSpatialModel>,
    pub config: FitConfig,
}

fn latitude_window(ds: &SpectralDataset) -> Option<(f64, f64)> {
    ds.soundings()
        .iter()
        .filter(|s| s.has_radiance())
        .map(|s| s.location.latitude)
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

/// Mean model, error and signal covariances, eigendecomposition, scores and
/// score-noise variances.
pub fn fit_functional(ds: &SpectralDataset, config: &FitConfig) -> Result<FunctionalFit> {
    let (lo, hi) = latitude_window(ds)
        .ok_or_else(|| Error::InsufficientData("no sounding carries radiance".into()))
        .stage("region")?;
    if let Some(span) = config.max_lat_span {
        if hi - lo > span + 1e-9 {
            return Err(Error::InvalidInput(format!(
                "training data spans {:.4} degrees of latitude, above the {span} degree limit; \
                 split it into smaller regions",
                hi - lo
            )))
            .stage("region");
        }
    }
    let mut ws = common_wavelengths(ds, config.min_coverage).stage("wavelengths")?;
    if let Some(restrict) = &config.wavelengths {
        ws = ws.intersection(restrict).stage("wavelengths")?;
    }
    let mean = fit_mean_model(ds, &ws, config.covariate).stage("mean model")?;
    let errors = ds
        .footprints()
        .into_iter()
        .map(|p| estimate_error_covariance(ds, &ws, p, config.differencing).map(|e| (p, e.covariance)))
        .collect::<Result<BTreeMap<_, _>>>()
        .stage("error covariance")?;
    let signal = estimate_signal_covariance(ds, &mean, &errors).stage("signal covariance")?;
    let basis = eigendecompose(&signal, config.fve).stage("eigendecomposition")?;
    let mut scores = compute_scores(ds, &mean, &basis).stage("scores")?;
    let tau = errors
        .iter()
        .map(|(&p, e)| compute_score_noise_variance(e, &basis).map(|t| (p, t)))
        .collect::<Result<BTreeMap<_, _>>>()
        .stage("score noise")?;
    scores.set_noise_variances(tau).stage("score noise")?;
    info!(
        "fitted {} components (FVE {:.4}) over {} wavelengths from {} soundings",
        basis.k,
        basis.fve_curve[basis.k - 1],
        ws.len(),
        scores.len()
    );
    Ok(FunctionalFit { mean, basis, scores })
}

/// Permutation test and variogram fit for every component of `scores`.
///
/// Components with fewer than 20 soundings skip the test and are treated as
/// spatially dependent.
pub fn fit_spatial(scores: &ScoreField, eigenvalues: &[f64], config: &FitConfig) -> Result<Vec<ComponentSpatialModel>> {
    (0..scores.n_components())
        .into_par_iter()
        .map(|k| {
            let label = format!("component {}", k + 1);
            let test = if scores.len() >= 20 {
                Some(
                    spatial_dependence_test(scores, k, &config.permutation)
                        .stage(format!("{label} permutation test"))?,
                )
            } else {
                None
            };
            let dependent = test.is_none_or(|t| t.dependent);
            let variogram = if dependent {
                let ev = empirical_semivariogram(scores, k, &config.binning).stage(format!("{label} semivariogram"))?;
                Some(fit_variogram_wls(&ev, config.weights, None).stage(format!("{label} variogram fit"))?)
            } else {
                None
            };
            Ok(ComponentSpatialModel {
                component: k,
                eigenvalue: eigenvalues[k],
                variogram,
                test,
                dependent,
            })
        })
        .collect()
}

impl GeoFpcaModel {
    pub fn assemble(
        functional: FunctionalFit,
        components: Vec<ComponentSpatialModel>,
        region: (f64, f64),
        config: FitConfig,
    ) -> Result<Self> {
        let FunctionalFit { mean, basis, scores } = functional;
        if scores.n_components() != basis.k || components.len() != basis.k {
            return Err(Error::InvalidInput(format!(
                "basis has {} components, scores {}, spatial models {}",
                basis.k,
                scores.n_components(),
                components.len()
            )));
        }
        if mean.wavelengths() != &basis.wavelengths {
            return Err(Error::InvalidInput(
                "mean model and basis use different wavelength sets".into(),
            ));
        }
        Ok(Self {
            region,
            wavelengths: basis.wavelengths.clone(),
            mean,
            basis,
            scores,
            components,
            config,
        })
    }

    pub fn n_components(&self) -> usize {
        self.basis.k
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_reader(BufReader::new(file))?;
        if model.components.len() != model.basis.k || model.scores.n_components() != model.basis.k {
            return Err(Error::InvalidInput(format!(
                "{}: component counts disagree",
                path.display()
            )));
        }
        Ok(model)
    }
}

/// Full pipeline on one homogeneous region.
pub fn fit_geofpca(ds: &SpectralDataset, config: &FitConfig) -> Result<GeoFpcaModel> {
    let functional = fit_functional(ds, config)?;
    let components = fit_spatial(&functional.scores, &functional.basis.eigenvalues, config)?;
    let region = latitude_window(ds).expect("checked by fit_functional");
    GeoFpcaModel::assemble(functional, components, region, config.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputedSpectrum {
    pub values: Vec<f64>,
    pub scores: Vec<KrigingPrediction>,
}

/// Imputation engine with every component's kriging system factorized once.
#[derive(Debug, Clone)]
pub struct Imputer<'a> {
    model: &'a GeoFpcaModel,
    predictors: Vec<ScorePredictor>,
}

impl<'a> Imputer<'a> {
    pub fn new(model: &'a GeoFpcaModel) -> Result<Self> {
        let predictors = model
            .components
            .par_iter()
            .map(|c| {
                ScorePredictor::new(&model.scores, c).stage(format!("component {} kriging system", c.component + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model, predictors })
    }

    pub fn impute(&self, target: GeoLocation, footprint: u8) -> Result<ImputedSpectrum> {
        let mut values = self.model.mean.evaluate(target, footprint)?;
        let scores: Vec<KrigingPrediction> = self.predictors.iter().map(|p| p.predict(target)).collect();
        for (phi, s) in self.model.basis.eigenvectors.iter().zip(&scores) {
            for (v, p) in values.iter_mut().zip(phi) {
                *v += s.value * p;
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite imputation at ({}, {})",
                target.latitude, target.longitude
            )));
        }
        Ok(ImputedSpectrum { values, scores })
    }
}

/// Imputed radiance over the model's wavelength set at `target`.
pub fn impute_radiance(model: &GeoFpcaModel, target: GeoLocation, footprint: u8) -> Result<Vec<f64>> {
    Ok(Imputer::new(model)?.impute(target, footprint)?.values)
}

/// Baseline: per wavelength, linear interpolation in latitude between the
/// closest same-footprint soundings below and above the target, with the
/// nearest value used beyond the observed range.
pub fn interpolate_radiance(
    ds: &SpectralDataset,
    ws: &WavelengthSet,
    target: GeoLocation,
    footprint: u8,
) -> Result<Vec<f64>> {
    let mut members: Vec<&Sounding> = ds.footprint_soundings(footprint).collect();
    if members.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no soundings on footprint {footprint} to interpolate from"
        )));
    }
    // stable sort keeps the first of equal latitudes in front
    members.sort_by(|a, b| a.location.latitude.total_cmp(&b.location.latitude));
    let lat = target.latitude;
    ws.iter()
        .map(|w| {
            let obs = || {
                members
                    .iter()
                    .filter_map(|s| s.radiance_at(w).map(|v| (s.location.latitude, v)))
            };
            let below = obs()
                .filter(|(l, _)| *l <= lat)
                .fold(None, |acc: Option<(f64, f64)>, x| match acc {
                    Some(a) if a.0 >= x.0 => Some(a),
                    _ => Some(x),
                });
            let above = obs().find(|(l, _)| *l >= lat);
            match (below, above) {
                (Some((l0, v0)), Some((l1, v1))) => {
                    if l1 == l0 {
                        Ok(v0)
                    } else {
                        Ok(v0 + (v1 - v0) * (lat - l0) / (l1 - l0))
                    }
                }
                (Some((_, v)), None) | (None, Some((_, v))) => Ok(v),
                (None, None) => Err(Error::InsufficientData(format!(
                    "footprint {footprint} never observes wavelength {w}"
                ))),
            }
        })
        .collect()
}

/// Soundings carrying imputed spectra, laid out like the input dataset.
pub fn imputed_dataset(
    targets: &[(u64, GeoLocation, u8)],
    spectra: &[Vec<f64>],
    ws: &WavelengthSet,
    grid_length: usize,
) -> Result<SpectralDataset> {
    if targets.len() != spectra.len() {
        return Err(Error::InvalidInput(format!(
            "{} targets but {} spectra",
            targets.len(),
            spectra.len()
        )));
    }
    let soundings = targets
        .iter()
        .zip(spectra)
        .map(|(&(id, location, footprint), values)| {
            let mut radiance = vec![None; grid_length];
            for (w, &v) in ws.iter().zip(values) {
                radiance[w - 1] = Some(v);
            }
            Sounding {
                id,
                location,
                footprint,
                land_fraction: None,
                radiance,
            }
        })
        .collect();
    SpectralDataset::new(soundings, grid_length)
}
