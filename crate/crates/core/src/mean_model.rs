//! Footprint-specific linear mean radiance, fitted one wavelength at a time.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{GeoLocation, SpectralDataset, WavelengthSet};
use crate::error::{Error, Result};

/// Location covariates entering the mean regression.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    #[default]
    Latitude,
    LatitudeLongitude,
}

impl Covariate {
    pub fn n_slopes(self) -> usize {
        match self {
            Covariate::Latitude => 1,
            Covariate::LatitudeLongitude => 2,
        }
    }

    fn values(self, loc: GeoLocation) -> [f64; 2] {
        [loc.latitude, loc.longitude]
    }
}

/// Per-footprint intercepts and slopes over a wavelength set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeanModelRepr", into = "MeanModelRepr")]
pub struct MeanModel {
    covariate: Covariate,
    wavelengths: WavelengthSet,
    /// For each fitted footprint, `[b0, b1, ...]` per wavelength position.
    coefficients: BTreeMap<u8, Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct MeanModelRepr {
    covariate: Covariate,
    wavelengths: WavelengthSet,
    coefficients: BTreeMap<u8, BTreeMap<usize, Vec<f64>>>,
}

impl From<MeanModel> for MeanModelRepr {
    fn from(m: MeanModel) -> Self {
        let coefficients = m
            .coefficients
            .iter()
            .map(|(&p, rows)| (p, m.wavelengths.iter().zip(rows.iter().cloned()).collect()))
            .collect();
        Self {
            covariate: m.covariate,
            wavelengths: m.wavelengths,
            coefficients,
        }
    }
}

impl TryFrom<MeanModelRepr> for MeanModel {
    type Error = Error;
    fn try_from(r: MeanModelRepr) -> Result<Self> {
        let width = r.covariate.n_slopes() + 1;
        let mut coefficients = BTreeMap::new();
        for (p, by_w) in r.coefficients {
            let rows = r
                .wavelengths
                .iter()
                .map(|w| {
                    by_w.get(&w)
                        .filter(|c| c.len() == width && c.iter().all(|x| x.is_finite()))
                        .cloned()
                        .ok_or_else(|| {
                            Error::InvalidInput(format!(
                                "mean model lacks valid coefficients for footprint {p}, wavelength {w}"
                            ))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            coefficients.insert(p, rows);
        }
        Ok(Self {
            covariate: r.covariate,
            wavelengths: r.wavelengths,
            coefficients,
        })
    }
}

impl MeanModel {
    pub fn covariate(&self) -> Covariate {
        self.covariate
    }

    pub fn wavelengths(&self) -> &WavelengthSet {
        &self.wavelengths
    }

    pub fn footprints(&self) -> impl Iterator<Item = u8> + '_ {
        self.coefficients.keys().copied()
    }

    pub fn has_footprint(&self, footprint: u8) -> bool {
        self.coefficients.contains_key(&footprint)
    }

    /// Coefficients `[b0, b1, ...]` for a footprint at wavelength position `j`.
    pub fn coefficients(&self, footprint: u8, j: usize) -> Option<&[f64]> {
        self.coefficients
            .get(&footprint)
            .and_then(|rows| rows.get(j))
            .map(Vec::as_slice)
    }

    /// Mean spectrum over the model's wavelengths at a location.
    pub fn evaluate(&self, loc: GeoLocation, footprint: u8) -> Result<Vec<f64>> {
        let rows = self
            .coefficients
            .get(&footprint)
            .ok_or_else(|| Error::InvalidInput(format!("footprint {footprint} has no fitted mean")))?;
        let x = self.covariate.values(loc);
        Ok(rows
            .iter()
            .map(|c| c[0] + c[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
            .collect())
    }
}

/// Same as [`MeanModel::evaluate`].
pub fn evaluate_mean(m: &MeanModel, loc: GeoLocation, footprint: u8) -> Result<Vec<f64>> {
    m.evaluate(loc, footprint)
}

/// Ordinary least squares per (footprint, wavelength) on centered covariates.
///
/// Rows missing radiance at a wavelength are dropped from that wavelength's
/// fit only.
pub fn fit_mean_model(ds: &SpectralDataset, ws: &WavelengthSet, covariate: Covariate) -> Result<MeanModel> {
    if let Some(&w) = ws.indices().last() {
        if w > ds.grid_length() {
            return Err(Error::InvalidInput(format!(
                "wavelength {w} beyond grid length {}",
                ds.grid_length()
            )));
        }
    }
    let mut coefficients = BTreeMap::new();
    for p in ds.footprints() {
        let members: Vec<_> = ds.footprint_soundings(p).collect();
        let rows = ws
            .indices()
            .par_iter()
            .map(|&w| {
                let (xs, ys): (Vec<[f64; 2]>, Vec<f64>) = members
                    .iter()
                    .filter_map(|s| s.radiance_at(w).map(|y| (covariate.values(s.location), y)))
                    .unzip();
                fit_one(&xs, &ys, covariate.n_slopes()).ok_or_else(|| {
                    Error::Numerical(format!(
                        "mean regression rank deficient at footprint {p}, wavelength {w} ({} rows)",
                        ys.len()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        coefficients.insert(p, rows);
    }
    if coefficients.is_empty() {
        return Err(Error::InsufficientData("no footprint carries radiance".into()));
    }
    Ok(MeanModel {
        covariate,
        wavelengths: ws.clone(),
        coefficients,
    })
}

fn fit_one(xs: &[[f64; 2]], ys: &[f64], q: usize) -> Option<Vec<f64>> {
    let n = ys.len();
    if n < q + 1 {
        return None;
    }
    let nf = n as f64;
    let mut xbar = [0.0; 2];
    for x in xs {
        for c in 0..q {
            xbar[c] += x[c] / nf;
        }
    }
    let ybar = ys.iter().sum::<f64>() / nf;
    let mut sxx = DMatrix::<f64>::zeros(q, q);
    let mut sxy = DVector::<f64>::zeros(q);
    let mut scale = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        for a in 0..q {
            let da = x[a] - xbar[a];
            sxy[a] += da * (y - ybar);
            scale += x[a] * x[a];
            for b in 0..q {
                sxx[(a, b)] += da * (x[b] - xbar[b]);
            }
        }
    }
    let eig = sxx.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
        return None;
    }
    let slopes = sxx.cholesky()?.solve(&sxy);
    let intercept = ybar - (0..q).map(|c| slopes[c] * xbar[c]).sum::<f64>();
    let mut out = Vec::with_capacity(q + 1);
    out.push(intercept);
    out.extend(slopes.iter().copied());
    out.iter().all(|v| v.is_finite()).then_some(out)
}
