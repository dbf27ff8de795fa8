//! Cross-track removal experiment: refit without the removed tracks, impute
//! them back, and score the imputations.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{cross_track_window, remove_cross_tracks, select_region, SpectralDataset};
use crate::error::{Error, Result};
use crate::fpca::FpcaBasis;
use crate::imputation::{fit_geofpca, interpolate_radiance, FitConfig, Imputer};

/// Root mean squared relative error of an imputed spectrum.
pub fn rrmse(imputed: &[f64], observed: &[f64]) -> Result<f64> {
    if imputed.len() != observed.len() || imputed.is_empty() {
        return Err(Error::InvalidInput(format!(
            "spectra of length {} and {} cannot be compared",
            imputed.len(),
            observed.len()
        )));
    }
    if observed.contains(&0.0) {
        return Err(Error::InvalidInput("observed radiance contains a zero".into()));
    }
    let ss: f64 = imputed.iter().zip(observed).map(|(f, r)| ((f - r) / r).powi(2)).sum();
    Ok((ss / observed.len() as f64).sqrt())
}

/// Root mean squared error of the score part of an imputation,
/// `sqrt(mean_w [sum_k (u_k - xi_k) phi_k(w)]^2)`.
pub fn rmspe(scores_obs: &[f64], scores_pred: &[f64], basis: &FpcaBasis) -> Result<f64> {
    if scores_obs.len() != basis.k || scores_pred.len() != basis.k {
        return Err(Error::InvalidInput(format!(
            "basis has {} components; got {} observed and {} predicted scores",
            basis.k,
            scores_obs.len(),
            scores_pred.len()
        )));
    }
    let diff: Vec<f64> = scores_obs.iter().zip(scores_pred).map(|(u, x)| u - x).collect();
    let err = basis.reconstruct(&diff);
    Ok((err.iter().map(|e| e * e).sum::<f64>() / err.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CenterConstraints {
    pub footprint: u8,
    pub half_window_deg: f64,
    pub min_soundings: usize,
    /// Largest number of removed cross-tracks whose window must be complete.
    pub r_max: usize,
}

impl Default for CenterConstraints {
    fn default() -> Self {
        Self {
            footprint: 4,
            half_window_deg: 0.25,
            min_soundings: 164,
            r_max: 8,
        }
    }
}

/// Soundings on the chosen footprint with enough observed data nearby and
/// a complete `r_max`-track window around them.
pub fn select_centers(ds: &SpectralDataset, c: &CenterConstraints) -> Vec<u64> {
    let observed_lat: Vec<f64> = ds
        .soundings()
        .iter()
        .filter(|s| s.has_radiance())
        .map(|s| s.location.latitude)
        .collect();
    let tracks = ds.cross_tracks();
    ds.footprint_soundings(c.footprint)
        .filter(|s| {
            let lat = s.location.latitude;
            let nearby = observed_lat
                .iter()
                .filter(|&&l| (l - lat).abs() <= c.half_window_deg)
                .count();
            if nearby < c.min_soundings {
                return false;
            }
            let Ok(window) = cross_track_window(ds, s.id, c.r_max) else {
                return false;
            };
            window.iter().all(|&t| {
                tracks[t].members.len() == crate::dataset::FOOTPRINT_COUNT as usize
                    && tracks[t]
                        .members
                        .iter()
                        .all(|&(_, id)| ds.get(id).is_some_and(|m| m.has_radiance()))
            })
        })
        .map(|s| s.id)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub fit: FitConfig,
    pub half_window_deg: f64,
    pub r_values: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            half_window_deg: 0.25,
            r_values: (1..=8).collect(),
        }
    }
}

/// Metrics of one held-out sounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundingResult {
    pub center: u64,
    pub r: usize,
    pub id: u64,
    pub footprint: u8,
    pub rrmse_functional: f64,
    pub rrmse_interpolation: f64,
    pub rmspe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub center: u64,
    pub r: usize,
    pub message: String,
}

/// Mean with a normal-theory 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MetricSummary {
    pub fn from_values(v: &[f64]) -> Self {
        let n = v.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / n as f64
        };
        let sd = if n < 2 {
            f64::NAN
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        let half = 1.96 * sd / (n as f64).sqrt();
        Self {
            n,
            mean,
            sd,
            ci_low: mean - half,
            ci_high: mean + half,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub r: usize,
    /// `None` pools all footprints.
    pub footprint: Option<u8>,
    pub functional: MetricSummary,
    pub interpolation: MetricSummary,
    pub rmspe: MetricSummary,
    /// Failed (center, r) cells at this `r`.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub results: Vec<SoundingResult>,
    pub failures: Vec<CellFailure>,
    pub by_r: Vec<Aggregate>,
    pub by_footprint: Vec<Aggregate>,
}

/// Training and held-out soundings for one cell.
pub fn experiment_split(
    ds: &SpectralDataset,
    center: u64,
    r: usize,
    half_window_deg: f64,
) -> Result<(SpectralDataset, SpectralDataset)> {
    let lat = ds
        .get(center)
        .ok_or_else(|| Error::InvalidInput(format!("center sounding {center} not found")))?
        .location
        .latitude;
    let (_, held) = remove_cross_tracks(ds, center, r)?;
    let held_ids: BTreeSet<u64> = held.soundings().iter().map(|s| s.id).collect();
    let region = select_region(ds, lat - half_window_deg, lat + half_window_deg)?;
    let train = region.filter(|s| !held_ids.contains(&s.id));
    if train.soundings().iter().any(|s| held_ids.contains(&s.id)) {
        return Err(Error::InvalidInput("held-out sounding leaked into training".into()));
    }
    Ok((train, held))
}

fn run_cell(ds: &SpectralDataset, center: u64, r: usize, cfg: &ExperimentConfig) -> Result<Vec<SoundingResult>> {
    let (train, held) = experiment_split(ds, center, r, cfg.half_window_deg)?;
    let model = fit_geofpca(&train, &cfg.fit)?;
    let imputer = Imputer::new(&model)?;
    let ws = &model.wavelengths;
    let mut out = Vec::new();
    for s in held.soundings() {
        let Some(obs) = s.spectrum(ws) else { continue };
        let imputed = imputer.impute(s.location, s.footprint)?;
        let interp = interpolate_radiance(&train, ws, s.location, s.footprint)?;
        let mu = model.mean.evaluate(s.location, s.footprint)?;
        let resid: Vec<f64> = obs.iter().zip(&mu).map(|(a, b)| a - b).collect();
        let u = model.basis.project(&resid);
        let xi: Vec<f64> = imputed.scores.iter().map(|p| p.value).collect();
        out.push(SoundingResult {
            center,
            r,
            id: s.id,
            footprint: s.footprint,
            rrmse_functional: rrmse(&imputed.values, &obs)?,
            rrmse_interpolation: rrmse(&interp, &obs)?,
            rmspe: rmspe(&u, &xi, &model.basis)?,
        });
    }
    Ok(out)
}

fn aggregate(results: &[SoundingResult], r: usize, footprint: Option<u8>, failures: usize) -> Aggregate {
    let sel: Vec<&SoundingResult> = results
        .iter()
        .filter(|x| x.r == r && footprint.is_none_or(|p| x.footprint == p))
        .collect();
    let col = |f: fn(&SoundingResult) -> f64| MetricSummary::from_values(&sel.iter().map(|x| f(x)).collect::<Vec<_>>());
    Aggregate {
        r,
        footprint,
        functional: col(|x| x.rrmse_functional),
        interpolation: col(|x| x.rrmse_interpolation),
        rmspe: col(|x| x.rmspe),
        failures,
    }
}

/// Run every (center, r) cell; failed cells are recorded and skipped.
pub fn run_imputation_experiment(ds: &SpectralDataset, centers: &[u64], cfg: &ExperimentConfig) -> ExperimentReport {
    let cells: Vec<(u64, usize)> = centers
        .iter()
        .flat_map(|&c| cfg.r_values.iter().map(move |&r| (c, r)))
        .collect();
    let outcomes: Vec<Result<Vec<SoundingResult>>> = cells.par_iter().map(|&(c, r)| run_cell(ds, c, r, cfg)).collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (&(center, r), o) in cells.iter().zip(outcomes) {
        match o {
            Ok(v) => results.extend(v),
            Err(e) => {
                log::warn!("center {center}, r = {r}: {e}");
                failures.push(CellFailure {
                    center,
                    r,
                    message: e.to_string(),
                });
            }
        }
    }
    let mut fail_count: BTreeMap<usize, usize> = BTreeMap::new();
    for f in &failures {
        *fail_count.entry(f.r).or_default() += 1;
    }
    let footprints: BTreeSet<u8> = results.iter().map(|x| x.footprint).collect();
    let by_r = cfg
        .r_values
        .iter()
        .map(|&r| aggregate(&results, r, None, fail_count.get(&r).copied().unwrap_or(0)))
        .collect();
    let by_footprint = footprints
        .iter()
        .flat_map(|&p| cfg.r_values.iter().map(move |&r| (p, r)))
        .map(|(p, r)| aggregate(&results, r, Some(p), fail_count.get(&r).copied().unwrap_or(0)))
        .collect();
    ExperimentReport {
        results,
        failures,
        by_r,
        by_footprint,
    }
}

/// Long format: `center, r, id, footprint, rrmse_functional, rrmse_interpolation, rmspe`.
pub fn write_report(report: &ExperimentReport, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "center,r,id,footprint,rrmse_functional,rrmse_interpolation,rmspe")?;
    for x in &report.results {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            x.center, x.r, x.id, x.footprint, x.rrmse_functional, x.rrmse_interpolation, x.rmspe
        )?;
    }
    Ok(())
}

/// One row per aggregate: `r, footprint` (`all` when pooled), then `n`, mean
/// and 95% interval bounds for each metric, then failed cells.
pub fn write_summary(aggregates: &[Aggregate], out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(
        out,
        "r,footprint,n,functional_mean,functional_ci_low,functional_ci_high,\
         interpolation_mean,interpolation_ci_low,interpolation_ci_high,\
         rmspe_mean,rmspe_ci_low,rmspe_ci_high,failures"
    )?;
    for a in aggregates {
        let fp = a.footprint.map_or_else(|| "all".to_string(), |p| p.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            a.r,
            fp,
            a.functional.n,
            a.functional.mean,
            a.functional.ci_low,
            a.functional.ci_high,
            a.interpolation.mean,
            a.interpolation.ci_low,
            a.interpolation.ci_high,
            a.rmspe.mean,
            a.rmspe.ci_low,
            a.rmspe.ci_high,
            a.failures
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::WavelengthSet;

    #[test]
    fn rrmse_identities() {
        let r = [2.0, 4.0, 8.0];
        assert_eq!(rrmse(&r, &r).unwrap(), 0.0);
        let f: Vec<f64> = r.iter().map(|v| 1.01 * v).collect();
        assert!((rrmse(&f, &r).unwrap() - 0.01).abs() < 1e-15);
        assert!(rrmse(&r, &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn rmspe_single_component() {
        let m = 4;
        let basis = FpcaBasis {
            wavelengths: WavelengthSet::full(m).unwrap(),
            eigenvalues: vec![1.0],
            eigenvectors: vec![vec![1.0, -1.0, 1.0, -1.0]],
            k: 1,
            fve_curve: vec![1.0],
        };
        assert_eq!(rmspe(&[2.0], &[2.0], &basis).unwrap(), 0.0);
        assert!((rmspe(&[2.5], &[2.0], &basis).unwrap() - 0.5).abs() < 1e-15);
        assert!(rmspe(&[1.0, 2.0], &[1.0], &basis).is_err());
    }

    #[test]
    fn summary_interval() {
        let s = MetricSummary::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((s.ci_high - 2.5 - 1.96 * sd / 2.0).abs() < 1e-12);
    }
}
