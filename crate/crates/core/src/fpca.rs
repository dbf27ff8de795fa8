//! Pointwise functional principal components with footprint-specific noise.
//!
//! The wavelength domain is a set of integer indices, so every integral over
//! wavelength is a plain sum with unit weights and eigenvectors have unit
//! Euclidean norm.

use std::collections::BTreeMap;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{great_circle_distance, GeoLocation, SpectralDataset, WavelengthSet};
use crate::error::{Error, Result};
use crate::mean_model::MeanModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CovarianceLabel {
    Error { footprint: u8 },
    Signal,
}

/// Symmetric covariance over a wavelength set.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub label: CovarianceLabel,
    wavelengths: WavelengthSet,
    matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(label: CovarianceLabel, wavelengths: WavelengthSet, matrix: DMatrix<f64>) -> Result<Self> {
        let m = wavelengths.len();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(Error::InvalidInput(format!(
                "covariance is {}x{}, expected {m}x{m}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("covariance has non-finite entries".into()));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if (&matrix - matrix.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidInput("covariance is not symmetric".into()));
        }
        Ok(Self {
            label,
            wavelengths,
            matrix,
        })
    }

    pub fn wavelengths(&self) -> &WavelengthSet {
        &self.wavelengths
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DifferencingOptions {
    /// Skip triples whose neighbor spacing exceeds this distance.
    pub max_gap_km: Option<f64>,
}

/// Error covariance for one footprint plus the sample sizes behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCovariance {
    pub covariance: CovarianceMatrix,
    /// Interior points entering the second differences.
    pub n_interior: usize,
}

fn sorted_footprint_spectra(ds: &SpectralDataset, ws: &WavelengthSet, footprint: u8) -> Vec<(GeoLocation, Vec<f64>)> {
    let mut rows: Vec<_> = ds
        .footprint_soundings(footprint)
        .filter_map(|s| s.spectrum(ws).map(|v| (s.location, v)))
        .collect();
    rows.sort_by(|a, b| a.0.latitude.total_cmp(&b.0.latitude));
    let before = rows.len();
    rows.dedup_by(|b, a| a.0.latitude == b.0.latitude);
    if rows.len() < before {
        warn!(
            "footprint {footprint}: {} soundings share a latitude with an earlier one; keeping first",
            before - rows.len()
        );
    }
    rows
}

/// Covariance of measurement error from second differences along latitude.
pub fn estimate_error_covariance(
    ds: &SpectralDataset,
    ws: &WavelengthSet,
    footprint: u8,
    options: DifferencingOptions,
) -> Result<ErrorCovariance> {
    let rows = sorted_footprint_spectra(ds, ws, footprint);
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "footprint {footprint} has {} usable soundings; second differences need 3",
            rows.len()
        )));
    }
    let m = ws.len();
    let gap_ok = |a: GeoLocation, b: GeoLocation| options.max_gap_km.is_none_or(|g| great_circle_distance(a, b) <= g);
    let deltas: Vec<Vec<f64>> = rows
        .windows(3)
        .filter(|t| gap_ok(t[0].0, t[1].0) && gap_ok(t[1].0, t[2].0))
        .map(|t| (0..m).map(|j| t[0].1[j] - 2.0 * t[1].1[j] + t[2].1[j]).collect())
        .collect();
    if deltas.is_empty() {
        return Err(Error::InsufficientData(format!(
            "footprint {footprint}: every neighbor triple exceeds the gap limit"
        )));
    }
    let n = deltas.len();
    let d = DMatrix::from_fn(n, m, |i, j| deltas[i][j]);
    let mut r = d.tr_mul(&d) / (6.0 * n as f64);
    symmetrize(&mut r);
    Ok(ErrorCovariance {
        covariance: CovarianceMatrix::new(CovarianceLabel::Error { footprint }, ws.clone(), r)?,
        n_interior: n,
    })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Demeaned radiance of every sounding observed on all of `ws`.
fn residual_rows(ds: &SpectralDataset, mean: &MeanModel) -> Result<Vec<(u64, u8, Vec<f64>)>> {
    let ws = mean.wavelengths();
    let mut out = Vec::new();
    for s in ds.soundings() {
        if let Some(r) = s.spectrum(ws) {
            let mu = mean.evaluate(s.location, s.footprint)?;
            out.push((s.id, s.footprint, r.iter().zip(&mu).map(|(a, b)| a - b).collect()));
        }
    }
    Ok(out)
}

/// Signal covariance: second moment of the demeaned radiance minus the
/// footprint-weighted error covariances.
pub fn estimate_signal_covariance(
    ds: &SpectralDataset,
    mean: &MeanModel,
    errors: &BTreeMap<u8, CovarianceMatrix>,
) -> Result<CovarianceMatrix> {
    let ws = mean.wavelengths();
    let rows = residual_rows(ds, mean)?;
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "signal covariance needs at least 2 complete soundings, found {n}"
        )));
    }
    let m = ws.len();
    let e = DMatrix::from_fn(n, m, |i, j| rows[i].2[j]);
    let mut r = e.tr_mul(&e);
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for (_, p, _) in &rows {
        *counts.entry(*p).or_default() += 1;
    }
    for (p, np) in counts {
        let err = errors
            .get(&p)
            .ok_or_else(|| Error::InvalidInput(format!("no error covariance supplied for footprint {p}")))?;
        if err.wavelengths() != ws {
            return Err(Error::InvalidInput(format!(
                "error covariance for footprint {p} uses a different wavelength set"
            )));
        }
        r -= err.matrix() * np as f64;
    }
    r /= (n - 1) as f64;
    symmetrize(&mut r);
    CovarianceMatrix::new(CovarianceLabel::Signal, ws.clone(), r)
}

/// Leading eigenpairs of the signal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcaBasis {
    pub wavelengths: WavelengthSet,
    /// All positive eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Unit-norm eigenvectors of the first `k` components.
    pub eigenvectors: Vec<Vec<f64>>,
    pub k: usize,
    /// Cumulative fraction of variance explained, one entry per positive eigenvalue.
    pub fve_curve: Vec<f64>,
}

impl FpcaBasis {
    /// Scores of a demeaned spectrum on the retained components.
    pub fn project(&self, residual: &[f64]) -> Vec<f64> {
        self.eigenvectors
            .iter()
            .map(|phi| phi.iter().zip(residual).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `sum_k scores[k] * phi_k` over the retained components.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.wavelengths.len()];
        for (phi, &u) in self.eigenvectors.iter().zip(scores) {
            for (o, p) in out.iter_mut().zip(phi) {
                *o += u * p;
            }
        }
        out
    }
}

/// Symmetric eigendecomposition with FVE truncation.
///
/// Non-positive eigenvalues are discarded before computing the FVE curve.
/// Each eigenvector's largest-magnitude coordinate is made positive.
pub fn eigendecompose(rf: &CovarianceMatrix, fve_threshold: f64) -> Result<FpcaBasis> {
    if !(fve_threshold > 0.0 && fve_threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "FVE threshold {fve_threshold} outside (0, 1]"
        )));
    }
    let eig = rf.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > 0.0)
        .collect();
    if order.is_empty() {
        return Err(Error::Numerical("signal covariance has no positive eigenvalue".into()));
    }
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let total: f64 = eigenvalues.iter().sum();
    let mut acc = 0.0;
    let fve_curve: Vec<f64> = eigenvalues
        .iter()
        .map(|l| {
            acc += l;
            acc / total
        })
        .collect();
    let k = fve_curve
        .iter()
        .position(|&f| f >= fve_threshold - 1e-12)
        .map_or(fve_curve.len(), |i| i + 1);
    let eigenvectors = order[..k]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(FpcaBasis {
        wavelengths: rf.wavelengths().clone(),
        eigenvalues,
        eigenvectors,
        k,
        fve_curve,
    })
}

/// Component scores per sounding, with footprint-specific score-noise variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScoreFieldRepr", into = "ScoreFieldRepr")]
pub struct ScoreField {
    ids: Vec<u64>,
    locations: Vec<GeoLocation>,
    footprints: Vec<u8>,
    /// `scores[k][i]` for component `k` and sounding `i`.
    scores: Vec<Vec<f64>>,
    tau: BTreeMap<u8, Vec<f64>>,
    excluded: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct ScoreEntry {
    id: u64,
    latitude: f64,
    longitude: f64,
    footprint: u8,
    scores: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScoreFieldRepr {
    components: usize,
    soundings: Vec<ScoreEntry>,
    tau: BTreeMap<u8, Vec<f64>>,
    excluded: Vec<u64>,
}

impl From<ScoreField> for ScoreFieldRepr {
    fn from(f: ScoreField) -> Self {
        let soundings = (0..f.ids.len())
            .map(|i| ScoreEntry {
                id: f.ids[i],
                latitude: f.locations[i].latitude,
                longitude: f.locations[i].longitude,
                footprint: f.footprints[i],
                scores: f.scores.iter().map(|c| c[i]).collect(),
            })
            .collect();
        Self {
            components: f.scores.len(),
            soundings,
            tau: f.tau,
            excluded: f.excluded,
        }
    }
}

impl TryFrom<ScoreFieldRepr> for ScoreField {
    type Error = Error;
    fn try_from(r: ScoreFieldRepr) -> Result<Self> {
        let k = r.components;
        let mut scores = vec![Vec::with_capacity(r.soundings.len()); k];
        let mut ids = Vec::new();
        let mut locations = Vec::new();
        let mut footprints = Vec::new();
        for e in r.soundings {
            if e.scores.len() != k {
                return Err(Error::InvalidInput(format!(
                    "sounding {} has {} scores, expected {k}",
                    e.id,
                    e.scores.len()
                )));
            }
            ids.push(e.id);
            locations.push(GeoLocation::new(e.latitude, e.longitude)?);
            footprints.push(e.footprint);
            for (c, v) in scores.iter_mut().zip(e.scores) {
                c.push(v);
            }
        }
        let mut field = ScoreField {
            ids,
            locations,
            footprints,
            scores,
            tau: BTreeMap::new(),
            excluded: r.excluded,
        };
        field.set_noise_variances(r.tau)?;
        Ok(field)
    }
}

impl ScoreField {
    pub fn new(ids: Vec<u64>, locations: Vec<GeoLocation>, footprints: Vec<u8>, scores: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if locations.len() != n || footprints.len() != n || scores.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("score field columns differ in length".into()));
        }
        Ok(Self {
            ids,
            locations,
            footprints,
            scores,
            tau: BTreeMap::new(),
            excluded: Vec::new(),
        })
    }

    pub fn n_components(&self) -> usize {
        self.scores.len()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn locations(&self) -> &[GeoLocation] {
        &self.locations
    }

    pub fn footprints(&self) -> &[u8] {
        &self.footprints
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.scores[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.scores[k]
    }

    /// Soundings skipped because they miss radiance on the basis wavelengths.
    pub fn excluded(&self) -> &[u64] {
        &self.excluded
    }

    pub fn noise_variances(&self) -> &BTreeMap<u8, Vec<f64>> {
        &self.tau
    }

    /// Score-noise variance of component `k` for a footprint (0 if unknown).
    pub fn tau(&self, k: usize, footprint: u8) -> f64 {
        self.tau.get(&footprint).and_then(|v| v.get(k)).copied().unwrap_or(0.0)
    }

    pub fn set_noise_variances(&mut self, tau: BTreeMap<u8, Vec<f64>>) -> Result<()> {
        for (p, v) in &tau {
            if v.len() != self.scores.len() || v.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "footprint {p}: expected {} finite non-negative noise variances",
                    self.scores.len()
                )));
            }
        }
        self.tau = tau;
        Ok(())
    }
}

/// Project every complete sounding's residual onto the retained eigenvectors.
pub fn compute_scores(ds: &SpectralDataset, mean: &MeanModel, basis: &FpcaBasis) -> Result<ScoreField> {
    if mean.wavelengths() != &basis.wavelengths {
        return Err(Error::InvalidInput(
            "mean model and basis use different wavelength sets".into(),
        ));
    }
    let ws = &basis.wavelengths;
    let mut ids = Vec::new();
    let mut locations = Vec::new();
    let mut footprints = Vec::new();
    let mut scores = vec![Vec::new(); basis.k];
    let mut excluded = Vec::new();
    for s in ds.soundings() {
        let Some(r) = s.spectrum(ws) else {
            excluded.push(s.id);
            continue;
        };
        let mu = mean.evaluate(s.location, s.footprint)?;
        let resid: Vec<f64> = r.iter().zip(&mu).map(|(a, b)| a - b).collect();
        for (c, u) in scores.iter_mut().zip(basis.project(&resid)) {
            c.push(u);
        }
        ids.push(s.id);
        locations.push(s.location);
        footprints.push(s.footprint);
    }
    let mut field = ScoreField::new(ids, locations, footprints, scores)?;
    field.excluded = excluded;
    Ok(field)
}

/// `phi_k' R phi_k` for each retained component, clamped at zero.
pub fn compute_score_noise_variance(err: &CovarianceMatrix, basis: &FpcaBasis) -> Result<Vec<f64>> {
    if err.dim() != basis.wavelengths.len() {
        return Err(Error::InvalidInput(format!(
            "error covariance has dimension {}, basis {}",
            err.dim(),
            basis.wavelengths.len()
        )));
    }
    let r = err.matrix();
    Ok(basis
        .eigenvectors
        .iter()
        .enumerate()
        .map(|(k, phi)| {
            let v = nalgebra::DVector::from_column_slice(phi);
            let t = v.dot(&(r * &v));
            if t < 0.0 {
                warn!(
                    "negative score-noise variance {t:.3e} for component {} clamped to 0",
                    k + 1
                );
                0.0
            } else {
                t
            }
        })
        .collect())
}
