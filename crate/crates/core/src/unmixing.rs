//! Land/water mixed-region detection and land-fraction estimation by
//! least-squares unmixing against imputed endmember spectra.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dataset::{great_circle_distance, GeoLocation, Sounding, SpectralDataset, WavelengthSet};
use crate::error::{Error, Result, StageExt};
use crate::fpca::ScoreField;
use crate::imputation::{fit_functional, fit_spatial, FitConfig, GeoFpcaModel, Imputer};

/// Latitude tolerance used when testing window membership.
const WINDOW_TOL: f64 = 1e-9;
/// Consistency constant turning a MAD into a normal standard deviation.
const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLabel {
    Land,
    Water,
    Unidentified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedRegionSpec {
    /// Smallest and largest latitude of soundings with fractional land cover.
    pub l1: f64,
    pub l2: f64,
    pub delta0: f64,
    /// Open latitude window `(l1 - delta0, l2 + delta0)` whose soundings are unmixed.
    pub mixed: (f64, f64),
    pub lower: (f64, f64),
    pub upper: (f64, f64),
    pub lower_label: RegionLabel,
    pub upper_label: RegionLabel,
    pub lower_mean_fraction: Option<f64>,
    pub upper_mean_fraction: Option<f64>,
    pub qualified: bool,
}

impl MixedRegionSpec {
    pub fn contains_mixed(&self, lat: f64) -> bool {
        lat > self.mixed.0 + WINDOW_TOL && lat < self.mixed.1 - WINDOW_TOL
    }

    /// Lower and upper reference windows as (land, water).
    pub fn endmember_windows(&self) -> Option<((f64, f64), (f64, f64))> {
        match (self.lower_label, self.upper_label) {
            (RegionLabel::Water, RegionLabel::Land) => Some((self.upper, self.lower)),
            (RegionLabel::Land, RegionLabel::Water) => Some((self.lower, self.upper)),
            _ => None,
        }
    }
}

fn in_window(lat: f64, w: (f64, f64)) -> bool {
    lat >= w.0 - WINDOW_TOL && lat <= w.1 + WINDOW_TOL
}

/// Mean latitude gap between consecutive cross-tracks.
pub fn mean_track_spacing(ds: &SpectralDataset) -> Result<f64> {
    let lat: Vec<f64> = ds
        .cross_tracks()
        .iter()
        .map(|t| {
            t.members
                .iter()
                .map(|&(_, id)| ds.get(id).expect("track member exists").location.latitude)
                .sum::<f64>()
                / t.members.len() as f64
        })
        .collect();
    if lat.len() < 2 {
        return Err(Error::InsufficientData(
            "track spacing needs at least 2 cross-tracks".into(),
        ));
    }
    Ok(lat.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (lat.len() - 1) as f64)
}

/// Locate the transition window and classify the reference regions on either side.
pub fn detect_mixed_region(
    ds: &SpectralDataset,
    land_hi: f64,
    water_lo: f64,
    reference_length: f64,
) -> Result<MixedRegionSpec> {
    let mixed_lat: Vec<f64> = ds
        .soundings()
        .iter()
        .filter(|s| s.land_fraction.is_some_and(|a| a > 0.0 && a < 1.0))
        .map(|s| s.location.latitude)
        .collect();
    if mixed_lat.is_empty() {
        return Err(Error::InsufficientData(
            "no sounding has a fractional land cover".into(),
        ));
    }
    let l1 = mixed_lat.iter().copied().fold(f64::INFINITY, f64::min);
    let l2 = mixed_lat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mixed_region_between(ds, l1, l2, land_hi, water_lo, reference_length)
}

/// Windows and reference labels for a transition spanning latitudes `[l1, l2]`.
pub fn mixed_region_between(
    ds: &SpectralDataset,
    l1: f64,
    l2: f64,
    land_hi: f64,
    water_lo: f64,
    reference_length: f64,
) -> Result<MixedRegionSpec> {
    if !(l1 <= l2) {
        return Err(Error::InvalidInput(format!("transition bounds {l1} > {l2}")));
    }
    if !(0.0..=1.0).contains(&water_lo) || !(0.0..=1.0).contains(&land_hi) || water_lo > land_hi {
        return Err(Error::InvalidInput(format!(
            "thresholds water {water_lo} / land {land_hi} must satisfy 0 <= water <= land <= 1"
        )));
    }
    if !(reference_length > 0.0) {
        return Err(Error::InvalidInput(format!(
            "reference length {reference_length} must be positive"
        )));
    }
    let delta0 = mean_track_spacing(ds)?;
    let lower = (l1 - delta0 - reference_length, l1 - delta0);
    let upper = (l2 + delta0, l2 + delta0 + reference_length);
    let classify = |w: (f64, f64)| {
        let fr: Vec<f64> = ds
            .soundings()
            .iter()
            .filter(|s| in_window(s.location.latitude, w))
            .filter_map(|s| s.land_fraction)
            .collect();
        if fr.is_empty() {
            return (RegionLabel::Unidentified, None);
        }
        let m = fr.iter().sum::<f64>() / fr.len() as f64;
        let label = if m > land_hi {
            RegionLabel::Land
        } else if m < water_lo {
            RegionLabel::Water
        } else {
            RegionLabel::Unidentified
        };
        (label, Some(m))
    };
    let (lower_label, lower_mean_fraction) = classify(lower);
    let (upper_label, upper_mean_fraction) = classify(upper);
    let qualified = matches!(
        (lower_label, upper_label),
        (RegionLabel::Land, RegionLabel::Water) | (RegionLabel::Water, RegionLabel::Land)
    );
    Ok(MixedRegionSpec {
        l1,
        l2,
        delta0,
        mixed: (l1 - delta0, l2 + delta0),
        lower,
        upper,
        lower_label,
        upper_label,
        lower_mean_fraction,
        upper_mean_fraction,
        qualified,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandFractionFit {
    /// Estimate truncated to `[0, 1]`.
    pub alpha: f64,
    pub alpha_unclamped: f64,
    /// Euclidean norm of the residual at the truncated estimate.
    pub residual_norm: f64,
}

/// Least-squares `alpha` in `obs = alpha * land + (1 - alpha) * water`.
pub fn estimate_land_fraction(obs: &[f64], f_land: &[f64], f_water: &[f64]) -> Result<LandFractionFit> {
    if obs.len() != f_land.len() || obs.len() != f_water.len() || obs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "spectrum lengths differ or are empty: {} / {} / {}",
            obs.len(),
            f_land.len(),
            f_water.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut scale = 0.0;
    for ((r, l), w) in obs.iter().zip(f_land).zip(f_water) {
        let d = l - w;
        num += (r - w) * d;
        den += d * d;
        scale += l * l + w * w;
    }
    if !(den > 1e-24 * scale) || !num.is_finite() {
        return Err(Error::Numerical("land and water spectra are indistinguishable".into()));
    }
    let alpha_unclamped = num / den;
    let alpha = alpha_unclamped.clamp(0.0, 1.0);
    let residual_norm = obs
        .iter()
        .zip(f_land)
        .zip(f_water)
        .map(|((r, l), w)| (r - alpha * l - (1.0 - alpha) * w).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LandFractionFit {
        alpha,
        alpha_unclamped,
        residual_norm,
    })
}

/// Baseline estimate against the raw spectra of the nearest land and water soundings.
pub fn interpolation_land_fraction(
    obs: &[f64],
    nearest_land: &[f64],
    nearest_water: &[f64],
) -> Result<LandFractionFit> {
    estimate_land_fraction(obs, nearest_land, nearest_water)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingConfig {
    /// Fixed bandwidth in degrees; `None` selects it by leave-one-out CV.
    pub bandwidth: Option<f64>,
    /// Bandwidth used when an extreme score sits near the mixed window.
    pub fallback_bandwidth: f64,
    pub outlier_mads: f64,
    pub extreme_mads: f64,
    /// Extreme scores are looked for within this many `delta0` of the mixed window.
    pub extreme_reach: f64,
    pub n_grid: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            bandwidth: None,
            fallback_bandwidth: 0.1,
            outlier_mads: 3.0,
            extreme_mads: 4.0,
            extreme_reach: 3.0,
            n_grid: 25,
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Local linear fit with Epanechnikov weights at `x0`; `None` when the
/// weighted design is singular.
pub fn local_linear(x: &[f64], y: &[f64], x0: f64, h: f64) -> Option<f64> {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let d = xi - x0;
        let z = d / h;
        if z.abs() >= 1.0 {
            continue;
        }
        let k = 0.75 * (1.0 - z * z);
        s0 += k;
        s1 += k * d;
        s2 += k * d * d;
        t0 += k * yi;
        t1 += k * d * yi;
    }
    let det = s0 * s2 - s1 * s1;
    if !(s0 > 0.0) || !(det > 1e-12 * s0 * s2.max(f64::MIN_POSITIVE)) {
        return None;
    }
    Some((s2 * t0 - s1 * t1) / det)
}

/// Indices of points more than `mads` scaled MADs from a running median of
/// up to seven neighbors in latitude order. The spread is at least the
/// median absolute second difference over `sqrt(6)`.
pub fn detect_outliers(x: &[f64], y: &[f64], mads: f64) -> Vec<usize> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let resid: Vec<f64> = (0..n)
        .map(|r| {
            let half = 3.min(r).min(n - 1 - r);
            let mut win: Vec<f64> = order[r - half..=r + half].iter().map(|&i| y[i]).collect();
            y[order[r]] - median(&mut win)
        })
        .collect();
    let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
    // On steep monotone runs the running median equals the center value, so
    // the residual MAD can vanish; second differences keep a noise floor.
    let mut d2: Vec<f64> = (1..n.saturating_sub(1))
        .map(|r| (y[order[r - 1]] - 2.0 * y[order[r]] + y[order[r + 1]]).abs() / 6f64.sqrt())
        .collect();
    let floor = if d2.is_empty() { 0.0 } else { median(&mut d2) };
    let spread = MAD_SCALE * median(&mut abs).max(floor);
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let cut = if spread > 0.0 {
        mads * spread
    } else {
        1e-9 * scale.max(1.0)
    };
    (0..n).filter(|&r| resid[r].abs() > cut).map(|r| order[r]).collect()
}

fn loo_score(x: &[f64], y: &[f64], h: f64) -> f64 {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    let mut sse = 0.0;
    for i in 0..x.len() {
        let (xi, yi) = (xs.swap_remove(i), ys.swap_remove(i));
        let pred = local_linear(&xs, &ys, xi, h);
        xs.push(xi);
        ys.push(yi);
        let last = xs.len() - 1;
        xs.swap(i, last);
        ys.swap(i, last);
        match pred {
            Some(p) => sse += (p - yi).powi(2),
            None => return f64::INFINITY,
        }
    }
    sse
}

/// Bandwidth minimizing the leave-one-out squared error over a log grid
/// between twice the largest latitude gap and the latitude range.
pub fn select_bandwidth(x: &[f64], y: &[f64], n_grid: usize) -> Result<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let range = sorted[sorted.len() - 1] - sorted[0];
    let gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let lo = (2.0 * gap).min(range);
    if !(lo > 0.0) {
        return Err(Error::InsufficientData("all latitudes coincide".into()));
    }
    let hi = range.max(lo);
    let n_grid = n_grid.max(2);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n_grid {
        let h = (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n_grid - 1) as f64).exp();
        let s = loo_score(x, y, h);
        if s.is_finite() && best.is_none_or(|b| s < b.1) {
            best = Some((h, s));
        }
    }
    best.map(|b| b.0)
        .ok_or_else(|| Error::Numerical("every bandwidth on the grid gives a singular local fit".into()))
}

/// Smoothed value at each `x`, falling back to a kernel-weighted mean and then
/// the nearest point where the local linear design is singular.
fn smooth_at(x: &[f64], y: &[f64], targets: &[f64], h: f64) -> Vec<f64> {
    targets
        .iter()
        .map(|&x0| {
            local_linear(x, y, x0, h).unwrap_or_else(|| {
                let (mut sw, mut swy) = (0.0, 0.0);
                for (&xi, &yi) in x.iter().zip(y) {
                    let z = (xi - x0) / h;
                    if z.abs() < 1.0 {
                        sw += 1.0 - z * z;
                        swy += (1.0 - z * z) * yi;
                    }
                }
                if sw > 0.0 {
                    swy / sw
                } else {
                    let i = (0..x.len())
                        .min_by(|&a, &b| (x[a] - x0).abs().total_cmp(&(x[b] - x0).abs()))
                        .expect("non-empty");
                    y[i]
                }
            })
        })
        .collect()
}

/// Outlier removal and local linear smoothing of scores against latitude,
/// separately per component and footprint. Noise variances are kept.
///
/// `mixed` and `delta0` locate the transition window for the extreme-score check.
pub fn smooth_scores(
    scores: &ScoreField,
    config: &SmoothingConfig,
    mixed: (f64, f64),
    delta0: f64,
) -> Result<ScoreField> {
    let mut out = scores.clone();
    let mut footprints: Vec<u8> = scores.footprints().to_vec();
    footprints.sort_unstable();
    footprints.dedup();
    for p in footprints {
        let idx: Vec<usize> = (0..scores.len()).filter(|&i| scores.footprints()[i] == p).collect();
        if idx.len() < 5 {
            return Err(Error::InsufficientData(format!(
                "footprint {p} has {} scored soundings; smoothing needs 5",
                idx.len()
            )));
        }
        let lat: Vec<f64> = idx.iter().map(|&i| scores.locations()[i].latitude).collect();
        for k in 0..scores.n_components() {
            let y: Vec<f64> = idx.iter().map(|&i| scores.component(k)[i]).collect();
            let outliers = detect_outliers(&lat, &y, config.outlier_mads);
            let keep: Vec<usize> = (0..idx.len()).filter(|i| !outliers.contains(i)).collect();
            let xk: Vec<f64> = keep.iter().map(|&i| lat[i]).collect();
            let yk: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
            let h = match config.bandwidth {
                Some(h) => h,
                None if has_extreme(&lat, &y, config, mixed, delta0) => config.fallback_bandwidth,
                None => select_bandwidth(&xk, &yk, config.n_grid)
                    .stage(format!("footprint {p} component {} bandwidth", k + 1))?,
            };
            let smoothed = smooth_at(&xk, &yk, &lat, h);
            let col = out.component_mut(k);
            for (&i, v) in idx.iter().zip(smoothed) {
                col[i] = v;
            }
        }
    }
    Ok(out)
}

fn has_extreme(lat: &[f64], y: &[f64], config: &SmoothingConfig, mixed: (f64, f64), delta0: f64) -> bool {
    let mut v = y.to_vec();
    let med = median(&mut v);
    let mut dev: Vec<f64> = y.iter().map(|u| (u - med).abs()).collect();
    let spread = MAD_SCALE * median(&mut dev);
    if !(spread > 0.0) {
        return false;
    }
    let reach = config.extreme_reach * delta0;
    lat.iter().zip(y).any(|(&l, &u)| {
        let near = l >= mixed.0 - reach && l <= mixed.1 + reach;
        near && (u - med).abs() > config.extreme_mads * spread
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnmixConfig {
    pub fit: FitConfig,
    pub smoothing: SmoothingConfig,
    pub land_hi: f64,
    pub water_lo: f64,
    pub reference_length: f64,
}

impl Default for UnmixConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            smoothing: SmoothingConfig::default(),
            land_hi: 0.70,
            water_lo: 0.30,
            reference_length: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMethod {
    Unmixing,
    Interpolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandFractionEstimate {
    pub id: u64,
    pub method: EstimationMethod,
    pub fit: LandFractionFit,
}

/// Both estimates for one sounding of the mixed window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnmixedSounding {
    pub id: u64,
    pub location: GeoLocation,
    pub footprint: u8,
    pub reported: Option<f64>,
    pub unmixing: LandFractionEstimate,
    pub interpolation: LandFractionEstimate,
}

/// Endmember model fitted on one reference region, with smoothed scores.
pub fn fit_endmember_model(ds: &SpectralDataset, config: &UnmixConfig, spec: &MixedRegionSpec) -> Result<GeoFpcaModel> {
    let functional = fit_functional(ds, &config.fit)?;
    let mut functional = functional;
    functional.scores =
        smooth_scores(&functional.scores, &config.smoothing, spec.mixed, spec.delta0).stage("score smoothing")?;
    let components = fit_spatial(&functional.scores, &functional.basis.eigenvalues, &config.fit)?;
    let lat = ds.soundings().iter().map(|s| s.location.latitude);
    let region = (
        lat.clone().fold(f64::INFINITY, f64::min),
        lat.fold(f64::NEG_INFINITY, f64::max),
    );
    GeoFpcaModel::assemble(functional, components, region, config.fit.clone())
}

fn nearest_spectrum(ref_ds: &SpectralDataset, ws: &WavelengthSet, s: &Sounding) -> Option<Vec<f64>> {
    let candidates = || ref_ds.soundings().iter().filter_map(|c| c.spectrum(ws).map(|v| (c, v)));
    let pick = |same_fp: bool| {
        candidates()
            .filter(|(c, _)| !same_fp || c.footprint == s.footprint)
            .min_by(|a, b| {
                great_circle_distance(a.0.location, s.location)
                    .total_cmp(&great_circle_distance(b.0.location, s.location))
            })
            .map(|(_, v)| v)
    };
    pick(true).or_else(|| pick(false))
}

fn positions(sub: &WavelengthSet, of: &WavelengthSet) -> Vec<usize> {
    sub.iter()
        .map(|w| of.indices().binary_search(&w).expect("subset index"))
        .collect()
}

/// Fit land and water models on the reference regions and estimate the land
/// fraction of every sounding inside the mixed window by both methods.
pub fn unmix_region(
    ds: &SpectralDataset,
    spec: &MixedRegionSpec,
    config: &UnmixConfig,
) -> Result<Vec<UnmixedSounding>> {
    let (land_w, water_w) = spec.endmember_windows().ok_or_else(|| {
        Error::InvalidInput(format!(
            "mixed region is not qualified: lower reference {:?}, upper reference {:?}",
            spec.lower_label, spec.upper_label
        ))
    })?;
    let land_ds = ds.filter(|s| in_window(s.location.latitude, land_w));
    let water_ds = ds.filter(|s| in_window(s.location.latitude, water_w));
    let (land, water) = rayon::join(
        || fit_endmember_model(&land_ds, config, spec).stage("land reference region"),
        || fit_endmember_model(&water_ds, config, spec).stage("water reference region"),
    );
    let (land, water) = (land?, water?);
    let ws = land
        .wavelengths
        .intersection(&water.wavelengths)
        .stage("endmember wavelengths")?;
    let land_pos = positions(&ws, &land.wavelengths);
    let water_pos = positions(&ws, &water.wavelengths);
    let land_imp = Imputer::new(&land).stage("land reference region")?;
    let water_imp = Imputer::new(&water).stage("water reference region")?;

    let mut out = Vec::new();
    for s in ds
        .soundings()
        .iter()
        .filter(|s| spec.contains_mixed(s.location.latitude))
    {
        let Some(obs) = s.spectrum(&ws) else {
            warn!("sounding {} lacks radiance on the endmember wavelengths; skipped", s.id);
            continue;
        };
        if !land.mean.has_footprint(s.footprint) || !water.mean.has_footprint(s.footprint) {
            warn!(
                "footprint {} of sounding {} is not fitted in both references; skipped",
                s.footprint, s.id
            );
            continue;
        }
        let fl = land_imp.impute(s.location, s.footprint)?.values;
        let fw = water_imp.impute(s.location, s.footprint)?.values;
        let fl: Vec<f64> = land_pos.iter().map(|&i| fl[i]).collect();
        let fw: Vec<f64> = water_pos.iter().map(|&i| fw[i]).collect();
        let unmix = estimate_land_fraction(&obs, &fl, &fw).stage(format!("sounding {}", s.id))?;
        let (nl, nw) = nearest_spectrum(&land_ds, &ws, s)
            .zip(nearest_spectrum(&water_ds, &ws, s))
            .ok_or_else(|| Error::InsufficientData("reference region has no complete spectrum".into()))?;
        let interp = interpolation_land_fraction(&obs, &nl, &nw).stage(format!("sounding {}", s.id))?;
        out.push(UnmixedSounding {
            id: s.id,
            location: s.location,
            footprint: s.footprint,
            reported: s.land_fraction,
            unmixing: LandFractionEstimate {
                id: s.id,
                method: EstimationMethod::Unmixing,
                fit: unmix,
            },
            interpolation: LandFractionEstimate {
                id: s.id,
                method: EstimationMethod::Interpolation,
                fit: interp,
            },
        });
    }
    Ok(out)
}

/// `id, latitude, longitude, footprint, alpha_unmix, alpha_interp, alpha_reported`.
pub fn write_land_fractions(rows: &[UnmixedSounding], out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(
        out,
        "id,latitude,longitude,footprint,alpha_unmix,alpha_interp,alpha_reported"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.id,
            r.location.latitude,
            r.location.longitude,
            r.footprint,
            r.unmixing.fit.alpha,
            r.interpolation.fit.alpha,
            r.reported.map(|v| v.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmixSummary {
    pub region: MixedRegionSpec,
    pub n_soundings: usize,
    /// Mean squared error of each estimate against the supplied truth.
    pub mse_unmix: Option<f64>,
    pub mse_interp: Option<f64>,
    pub mse_reported: Option<f64>,
}

/// Summary against `truth` (sounding id to land fraction), when supplied.
pub fn summarize_unmixing(
    spec: &MixedRegionSpec,
    rows: &[UnmixedSounding],
    truth: Option<&std::collections::BTreeMap<u64, f64>>,
) -> UnmixSummary {
    let mse = |f: &dyn Fn(&UnmixedSounding) -> Option<f64>| -> Option<f64> {
        let truth = truth?;
        let errs: Vec<f64> = rows
            .iter()
            .filter_map(|r| Some((f(r)? - truth.get(&r.id)?).powi(2)))
            .collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    };
    UnmixSummary {
        region: *spec,
        n_soundings: rows.len(),
        mse_unmix: mse(&|r| Some(r.unmixing.fit.alpha)),
        mse_interp: mse(&|r| Some(r.interpolation.fit.alpha)),
        mse_reported: mse(&|r| r.reported),
    }
}
