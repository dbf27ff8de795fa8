//! Semivariograms of component scores, exponential WLS fits, a Moran's I
//! permutation screen, and plug-in ordinary kriging.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{great_circle_distance, GeoLocation};
use crate::error::{Error, Result};
use crate::fpca::ScoreField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinningSpec {
    pub n_bins: usize,
    /// Largest pair distance binned, km. `None` uses half the largest pairwise distance.
    pub max_distance_km: Option<f64>,
    pub min_pairs: usize,
}

impl Default for BinningSpec {
    fn default() -> Self {
        Self {
            n_bins: 15,
            max_distance_km: None,
            min_pairs: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramBin {
    /// Mean pair distance in the bin, km.
    pub distance: f64,
    pub pairs: usize,
    /// Nugget-corrected semivariance; may be negative.
    pub gamma: f64,
    /// Half the mean squared score difference, before the nugget correction.
    pub raw_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub bins: Vec<VariogramBin>,
}

/// Binned semivariogram of component `k`, with each pair's score-noise
/// variances subtracted.
pub fn empirical_semivariogram(scores: &ScoreField, k: usize, spec: &BinningSpec) -> Result<EmpiricalVariogram> {
    if k >= scores.n_components() {
        return Err(Error::InvalidInput(format!(
            "component {} not in score field with {} components",
            k + 1,
            scores.n_components()
        )));
    }
    let n = scores.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "semivariogram needs at least 2 soundings, found {n}"
        )));
    }
    if spec.n_bins == 0 {
        return Err(Error::InvalidInput("n_bins must be positive".into()));
    }
    let locs = scores.locations();
    let u = scores.component(k);
    let tau: Vec<f64> = scores.footprints().iter().map(|&p| scores.tau(k, p)).collect();

    let mut dist = Vec::with_capacity(n * (n - 1) / 2);
    let mut dmax: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = great_circle_distance(locs[i], locs[j]);
            dmax = dmax.max(d);
            dist.push(d);
        }
    }
    let cutoff = spec.max_distance_km.unwrap_or(dmax / 2.0);
    if !(cutoff > 0.0) {
        return Err(Error::InsufficientData("all soundings share one location".into()));
    }
    let width = cutoff / spec.n_bins as f64;
    let nb = spec.n_bins;
    let mut count = vec![0usize; nb];
    let mut dsum = vec![0.0; nb];
    let mut sq = vec![0.0; nb];
    let mut nug = vec![0.0; nb];
    let mut idx = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist[idx];
            idx += 1;
            if d > cutoff {
                continue;
            }
            let b = ((d / width) as usize).min(nb - 1);
            count[b] += 1;
            dsum[b] += d;
            sq[b] += (u[i] - u[j]).powi(2);
            nug[b] += tau[i] + tau[j];
        }
    }
    let bins: Vec<VariogramBin> = (0..nb)
        .filter(|&b| count[b] >= spec.min_pairs.max(1))
        .map(|b| {
            let c = count[b] as f64;
            let raw = sq[b] / (2.0 * c);
            VariogramBin {
                distance: dsum[b] / c,
                pairs: count[b],
                gamma: raw - nug[b] / (2.0 * c),
                raw_gamma: raw,
            }
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no distance bin holds {} pairs",
            spec.min_pairs
        )));
    }
    Ok(EmpiricalVariogram { bins })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `N(h) / h^2`
    #[default]
    PairsOverDistanceSquared,
    /// `N(h)`
    Pairs,
}

impl WeightScheme {
    fn weight(self, bin: &VariogramBin) -> f64 {
        match self {
            WeightScheme::PairsOverDistanceSquared => bin.pairs as f64 / bin.distance.max(1e-9).powi(2),
            WeightScheme::Pairs => bin.pairs as f64,
        }
    }
}

/// Box constraints on the exponential model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramBounds {
    pub sill: (f64, f64),
    pub range: (f64, f64),
}

impl VariogramBounds {
    /// `sill in [0, 10 * max bin value]`, `range in [h_1 / 10, 10 * h_L]`.
    pub fn from_bins(ev: &EmpiricalVariogram) -> Self {
        let gmax = ev.bins.iter().map(|b| b.gamma).fold(f64::NEG_INFINITY, f64::max);
        let h1 = ev.bins.first().map_or(1.0, |b| b.distance);
        let hl = ev.bins.last().map_or(1.0, |b| b.distance);
        let h1 = if h1 > 0.0 { h1 } else { hl.max(1e-6) / 100.0 };
        Self {
            sill: (0.0, (10.0 * gmax).max(0.0)),
            range: (h1 / 10.0, 10.0 * hl.max(h1)),
        }
    }
}

/// Exponential semivariogram `sill * (1 - exp(-h / range))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub model: String,
    pub sill: f64,
    pub range: f64,
    pub weights: WeightScheme,
    pub objective: f64,
    /// Set when the sill sits at its lower bound of zero.
    pub degenerate: bool,
    pub empirical: EmpiricalVariogram,
}

impl VariogramFit {
    pub fn semivariance(&self, h: f64) -> f64 {
        exponential_semivariance(self.sill, self.range, h)
    }

    /// Covariance of the latent score field at distance `h`.
    pub fn covariance(&self, h: f64) -> f64 {
        self.sill * (-h / self.range).exp()
    }
}

fn exponential_semivariance(sill: f64, range: f64, h: f64) -> f64 {
    sill * (1.0 - (-h / range).exp())
}

fn wls_objective(ev: &EmpiricalVariogram, weights: &[f64], sill: f64, range: f64) -> f64 {
    ev.bins
        .iter()
        .zip(weights)
        .map(|(b, w)| w * (b.gamma - exponential_semivariance(sill, range, b.distance)).powi(2))
        .sum()
}

/// Weighted least-squares fit of the exponential model: a coarse log grid
/// followed by bounded Nelder-Mead refinement.
pub fn fit_variogram_wls(
    ev: &EmpiricalVariogram,
    scheme: WeightScheme,
    bounds: Option<VariogramBounds>,
) -> Result<VariogramFit> {
    if ev.bins.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "variogram fit needs at least 2 bins, found {}",
            ev.bins.len()
        )));
    }
    let bounds = bounds.unwrap_or_else(|| VariogramBounds::from_bins(ev));
    let weights: Vec<f64> = ev.bins.iter().map(|b| scheme.weight(b)).collect();
    // normalize so the stopping tolerance is scale free
    let wsum: f64 = weights.iter().sum();
    let gscale = ev
        .bins
        .iter()
        .map(|b| b.gamma.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let weights: Vec<f64> = weights.iter().map(|w| w / wsum / (gscale * gscale)).collect();

    let (slo, shi) = bounds.sill;
    let (rlo, rhi) = (bounds.range.0.ln(), bounds.range.1.ln());
    let finish = |sill: f64, range: f64| -> Result<VariogramFit> {
        let objective = wls_objective(ev, &weights, sill, range) * gscale * gscale * wsum;
        if !objective.is_finite() {
            return Err(Error::Numerical("variogram objective is not finite".into()));
        }
        Ok(VariogramFit {
            model: "exponential".into(),
            sill,
            range,
            weights: scheme,
            objective,
            degenerate: sill <= slo,
            empirical: ev.clone(),
        })
    };
    if shi <= slo {
        return finish(slo, ((rlo + rhi) / 2.0).exp());
    }

    // parameters: x0 = sill / shi in [slo/shi, 1], x1 = ln(range)
    let lo = [slo / shi, rlo];
    let hi = [1.0, rhi];
    let clamp = |x: [f64; 2]| [x[0].clamp(lo[0], hi[0]), x[1].clamp(lo[1], hi[1])];
    let f = |x: [f64; 2]| {
        let x = clamp(x);
        wls_objective(ev, &weights, x[0] * shi, x[1].exp())
    };

    let n_grid = 30;
    let mut best = ([lo[0], lo[1]], f64::INFINITY);
    let sill_grid = std::iter::once(lo[0])
        .chain((0..n_grid).map(|i| (1e-4f64.ln() * (1.0 - i as f64 / (n_grid - 1) as f64)).exp().max(lo[0])));
    for s in sill_grid {
        for j in 0..n_grid {
            let r = lo[1] + (hi[1] - lo[1]) * j as f64 / (n_grid - 1) as f64;
            let v = f([s, r]);
            if v < best.1 {
                best = ([s, r], v);
            }
        }
    }
    let step = [0.1, 0.1 * (hi[1] - lo[1]).max(1e-3)];
    let mut x = nelder_mead(&f, best.0, step, 4000);
    x = nelder_mead(&f, clamp(x), [step[0] * 0.1, step[1] * 0.1], 4000);
    let x = clamp(x);
    finish(x[0] * shi, x[1].exp())
}

fn nelder_mead(f: &impl Fn([f64; 2]) -> f64, start: [f64; 2], step: [f64; 2], max_iter: usize) -> [f64; 2] {
    let mut simplex = [start, [start[0] + step[0], start[1]], [start[0], start[1] + step[1]]];
    let mut values = simplex.map(f);
    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        let spread = (values[2] - values[0]).abs();
        let size = (0..2)
            .map(|d| {
                (simplex[1][d] - simplex[0][d])
                    .abs()
                    .max((simplex[2][d] - simplex[0][d]).abs())
            })
            .fold(0.0, f64::max);
        if spread <= 1e-16 * (1.0 + values[0].abs()) && size < 1e-10 {
            break;
        }
        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(xe);
            if fe < fr {
                simplex[2] = xe;
                values[2] = fe;
            } else {
                simplex[2] = xr;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = xr;
            values[2] = fr;
        } else {
            let (xc, fc) = if fr < values[2] {
                let xc = along(-0.5);
                (xc, f(xc))
            } else {
                let xc = along(0.5);
                (xc, f(xc))
            };
            if fc < values[2].min(fr) {
                simplex[2] = xc;
                values[2] = fc;
            } else {
                let best = simplex[0];
                for i in 1..3 {
                    for (x, b) in simplex[i].iter_mut().zip(best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    simplex[best]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PermutationTestConfig {
    pub n_perm: usize,
    pub alpha: f64,
    pub neighbors: usize,
    pub seed: u64,
}

impl Default for PermutationTestConfig {
    fn default() -> Self {
        Self {
            n_perm: 999,
            alpha: 0.05,
            neighbors: 10,
            seed: 20_170_413,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialTestResult {
    pub component: usize,
    /// Moran's I.
    pub statistic: f64,
    pub expected: f64,
    pub p_value: f64,
    pub dependent: bool,
}

/// Row-wise k-nearest-neighbor inverse-distance weights.
struct NeighborWeights {
    neighbors: Vec<Vec<(usize, f64)>>,
    total: f64,
}

impl NeighborWeights {
    fn new(locs: &[GeoLocation], k: usize) -> Self {
        let n = locs.len();
        let k = k.min(n - 1);
        let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let mut d: Vec<(usize, f64)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (j, great_circle_distance(locs[i], locs[j])))
                    .collect();
                d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                d.truncate(k);
                d.into_iter().map(|(j, dist)| (j, 1.0 / dist.max(1e-6))).collect()
            })
            .collect();
        let total = neighbors.iter().flatten().map(|(_, w)| w).sum();
        Self { neighbors, total }
    }

    fn morans_i(&self, z: &[f64], zz: f64) -> f64 {
        let cross: f64 = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, nb)| z[i] * nb.iter().map(|&(j, w)| w * z[j]).sum::<f64>())
            .sum();
        z.len() as f64 / self.total * cross / zz
    }
}

/// Moran's I permutation test for spatial dependence of component `k`.
pub fn spatial_dependence_test(
    scores: &ScoreField,
    k: usize,
    config: &PermutationTestConfig,
) -> Result<SpatialTestResult> {
    let n = scores.len();
    if n < 20 {
        return Err(Error::InsufficientData(format!(
            "permutation test needs at least 20 soundings, found {n}"
        )));
    }
    if config.n_perm < 99 {
        return Err(Error::InvalidInput(format!(
            "n_perm = {} is below the minimum of 99",
            config.n_perm
        )));
    }
    let u = scores.component(k);
    let mean = u.iter().sum::<f64>() / n as f64;
    let mut z: Vec<f64> = u.iter().map(|v| v - mean).collect();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let scale = u.iter().map(|v| v * v).sum::<f64>();
    if !(zz > 1e-24 * scale.max(f64::MIN_POSITIVE)) || zz == 0.0 {
        return Err(Error::Numerical(format!(
            "component {} scores have zero variance",
            k + 1
        )));
    }
    let weights = NeighborWeights::new(scores.locations(), config.neighbors);
    let expected = -1.0 / (n as f64 - 1.0);
    let observed = weights.morans_i(&z, zz);
    let dev = (observed - expected).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(k as u64));
    let mut exceed = 0usize;
    for _ in 0..config.n_perm {
        z.shuffle(&mut rng);
        if (weights.morans_i(&z, zz) - expected).abs() >= dev - 1e-12 * dev.abs() {
            exceed += 1;
        }
    }
    let p_value = (1 + exceed) as f64 / (1 + config.n_perm) as f64;
    Ok(SpatialTestResult {
        component: k,
        statistic: observed,
        expected,
        p_value,
        dependent: p_value < config.alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrigingPrediction {
    pub value: f64,
    pub variance: f64,
}

/// Ordinary kriging system for one component, factorized once and reused
/// across targets.
#[derive(Debug, Clone)]
pub struct OrdinaryKriging {
    locations: Vec<GeoLocation>,
    sill: f64,
    range: f64,
    chol: Cholesky<f64, Dyn>,
    kappa: f64,
    /// `Sigma^-1 (u - 1 kappa)`
    resid_weights: DVector<f64>,
    /// `Sigma^-1 1`
    inv_one: DVector<f64>,
    one_inv_one: f64,
}

impl OrdinaryKriging {
    /// Covariance `sill * exp(-d / range)` between observations, plus the
    /// footprint nugget on the diagonal and a `1e-8 * sill` jitter.
    pub fn new(scores: &ScoreField, k: usize, fit: &VariogramFit) -> Result<Self> {
        let n = scores.len();
        if n == 0 {
            return Err(Error::InsufficientData("kriging needs at least one score".into()));
        }
        if !(fit.sill >= 0.0 && fit.range > 0.0) {
            return Err(Error::InvalidInput(format!(
                "invalid variogram parameters sill {} range {}",
                fit.sill, fit.range
            )));
        }
        let locs = scores.locations().to_vec();
        let u = DVector::from_column_slice(scores.component(k));
        let tau: Vec<f64> = scores.footprints().iter().map(|&p| scores.tau(k, p)).collect();
        let mut sigma = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                fit.sill + tau[i]
            } else {
                fit.covariance(great_circle_distance(locs[i], locs[j]))
            }
        });
        let mean_diag = sigma.diagonal().mean();
        let jitter = if fit.sill > 0.0 {
            1e-8 * fit.sill
        } else {
            1e-8 * mean_diag
        };
        for i in 0..n {
            sigma[(i, i)] += jitter;
        }
        let chol = sigma.cholesky().ok_or_else(|| {
            Error::Numerical(format!(
                "kriging covariance for component {} is not positive definite",
                k + 1
            ))
        })?;
        let ones = DVector::from_element(n, 1.0);
        let inv_one = chol.solve(&ones);
        let one_inv_one = inv_one.sum();
        let kappa = inv_one.dot(&u) / one_inv_one;
        let resid_weights = chol.solve(&(u - ones * kappa));
        if !kappa.is_finite() || resid_weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "kriging system for component {} is numerically singular",
                k + 1
            )));
        }
        Ok(Self {
            locations: locs,
            sill: fit.sill,
            range: fit.range,
            chol,
            kappa,
            resid_weights,
            inv_one,
            one_inv_one,
        })
    }

    /// Generalized least-squares estimate of the constant mean.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn nu(&self, target: GeoLocation) -> DVector<f64> {
        DVector::from_iterator(
            self.locations.len(),
            self.locations
                .iter()
                .map(|&s| self.sill * (-great_circle_distance(target, s) / self.range).exp()),
        )
    }

    pub fn predict(&self, target: GeoLocation) -> KrigingPrediction {
        let nu = self.nu(target);
        let value = self.kappa + nu.dot(&self.resid_weights);
        let inv_nu = self.chol.solve(&nu);
        let lagrange = 1.0 - self.inv_one.dot(&nu);
        let variance = self.sill - nu.dot(&inv_nu) + lagrange * lagrange / self.one_inv_one;
        KrigingPrediction {
            value,
            variance: variance.max(0.0),
        }
    }

    /// Weights applied to the observed scores; they sum to one.
    pub fn weights(&self, target: GeoLocation) -> Vec<f64> {
        let nu = self.nu(target);
        let inv_nu = self.chol.solve(&nu);
        let lagrange = (1.0 - self.inv_one.dot(&nu)) / self.one_inv_one;
        (&inv_nu + &self.inv_one * lagrange).iter().copied().collect()
    }
}

/// Spatial model of one component as used for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpatialModel {
    pub component: usize,
    pub eigenvalue: f64,
    pub variogram: Option<VariogramFit>,
    pub test: Option<SpatialTestResult>,
    /// When false the predictor is the plain score mean.
    pub dependent: bool,
}

/// Predictor for one component: kriging, or the score mean when the
/// component shows no spatial dependence.
#[derive(Debug, Clone)]
pub enum ScorePredictor {
    Kriging(Box<OrdinaryKriging>),
    Mean { mean: f64, variance: f64 },
}

impl ScorePredictor {
    pub fn new(scores: &ScoreField, model: &ComponentSpatialModel) -> Result<Self> {
        let k = model.component;
        match (&model.variogram, model.dependent) {
            (Some(fit), true) => Ok(Self::Kriging(Box::new(OrdinaryKriging::new(scores, k, fit)?))),
            (None, true) => Err(Error::InvalidInput(format!(
                "component {} is spatially dependent but has no variogram",
                k + 1
            ))),
            (_, false) => {
                let u = scores.component(k);
                if u.is_empty() {
                    return Err(Error::InsufficientData("no scores to average".into()));
                }
                Ok(Self::Mean {
                    mean: u.iter().sum::<f64>() / u.len() as f64,
                    variance: model.eigenvalue,
                })
            }
        }
    }

    pub fn predict(&self, target: GeoLocation) -> KrigingPrediction {
        match self {
            Self::Kriging(k) => k.predict(target),
            Self::Mean { mean, variance } => KrigingPrediction {
                value: *mean,
                variance: *variance,
            },
        }
    }
}

/// One-shot prediction of component `model.component` at `target`.
pub fn krige_score(
    target: GeoLocation,
    scores: &ScoreField,
    model: &ComponentSpatialModel,
) -> Result<KrigingPrediction> {
    Ok(ScorePredictor::new(scores, model)?.predict(target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn field(points: &[(f64, f64, f64)], tau: f64) -> ScoreField {
        let n = points.len();
        let mut f = ScoreField::new(
            (0..n as u64).collect(),
            points.iter().map(|p| GeoLocation::new(p.0, p.1).unwrap()).collect(),
            vec![1; n],
            vec![points.iter().map(|p| p.2).collect()],
        )
        .unwrap();
        f.set_noise_variances(BTreeMap::from([(1, vec![tau])])).unwrap();
        f
    }

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

    #[test]
    fn constant_scores_give_zero_variogram() {
        let pts: Vec<_> = (0..40).map(|i| (i as f64 * 0.01, 0.0, 3.0)).collect();
        let ev = empirical_semivariogram(
            &field(&pts, 0.0),
            0,
            &BinningSpec {
                min_pairs: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(ev.bins.iter().all(|b| b.gamma == 0.0));
        assert!(ev.bins.windows(2).all(|w| w[0].distance < w[1].distance));
    }

    #[test]
    fn exact_exponential_recovered() {
        let bins = (1..=10)
            .map(|l| {
                let h = 3.0 * l as f64;
                VariogramBin {
                    distance: h,
                    pairs: 50 + l,
                    gamma: exponential_semivariance(5.0, 10.0, h),
                    raw_gamma: 0.0,
                }
            })
            .collect();
        let ev = EmpiricalVariogram { bins };
        for scheme in [WeightScheme::PairsOverDistanceSquared, WeightScheme::Pairs] {
            let f = fit_variogram_wls(&ev, scheme, None).unwrap();
            assert!((f.sill - 5.0).abs() / 5.0 < 1e-4, "{f:?}");
            assert!((f.range - 10.0).abs() / 10.0 < 1e-4, "{f:?}");
            assert!(!f.degenerate);
        }
    }

    #[test]
    fn noise_dominated_fit_is_degenerate() {
        let bins = (1..=5)
            .map(|l| VariogramBin {
                distance: l as f64,
                pairs: 20,
                gamma: -0.1 * l as f64,
                raw_gamma: 0.0,
            })
            .collect();
        let f = fit_variogram_wls(&EmpiricalVariogram { bins }, WeightScheme::Pairs, None).unwrap();
        assert_eq!(f.sill, 0.0);
        assert!(f.degenerate);
        let one = EmpiricalVariogram {
            bins: vec![VariogramBin {
                distance: 1.0,
                pairs: 20,
                gamma: 1.0,
                raw_gamma: 1.0,
            }],
        };
        assert!(fit_variogram_wls(&one, WeightScheme::Pairs, None).is_err());
    }

    #[test]
    fn single_observation_prediction() {
        let f = field(&[(10.0, 10.0, 2.5)], 0.0);
        let p = OrdinaryKriging::new(&f, 0, &fit(1.0, 5.0))
            .unwrap()
            .predict(GeoLocation::new(10.3, 10.0).unwrap());
        assert!((p.value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_nugget_interpolates() {
        let pts: Vec<_> = (0..12)
            .map(|i| {
                (
                    30.0 + 0.03 * i as f64,
                    20.0 + 0.01 * (i % 3) as f64,
                    (i as f64 * 0.7).sin(),
                )
            })
            .collect();
        let f = field(&pts, 0.0);
        let ok = OrdinaryKriging::new(&f, 0, &fit(2.0, 8.0)).unwrap();
        for p in &pts {
            let pred = ok.predict(GeoLocation::new(p.0, p.1).unwrap());
            assert!((pred.value - p.2).abs() < 1e-8, "{} vs {}", pred.value, p.2);
            assert!(pred.variance < 1e-6);
        }
        let far = ok.predict(GeoLocation::new(31.0, 20.0).unwrap());
        assert!(far.variance > 0.0);
        let w = ok.weights(GeoLocation::new(30.05, 20.0).unwrap());
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mean_predictor_for_independent_component() {
        let f = field(&[(0.0, 0.0, 1.0), (0.1, 0.0, 3.0)], 0.0);
        let model = ComponentSpatialModel {
            component: 0,
            eigenvalue: 4.0,
            variogram: None,
            test: None,
            dependent: false,
        };
        let p = krige_score(GeoLocation::new(5.0, 5.0).unwrap(), &f, &model).unwrap();
        assert_eq!(
            p,
            KrigingPrediction {
                value: 2.0,
                variance: 4.0
            }
        );
        let dep = ComponentSpatialModel {
            dependent: true,
            ..model
        };
        assert!(krige_score(GeoLocation::new(5.0, 5.0).unwrap(), &f, &dep).is_err());
    }

    #[test]
    fn permutation_test_guards() {
        let pts: Vec<_> = (0..25).map(|i| (i as f64 * 0.01, 0.0, 1.0)).collect();
        let cfg = PermutationTestConfig::default();
        assert!(spatial_dependence_test(&field(&pts, 0.0), 0, &cfg).is_err());
        let short: Vec<_> = (0..10).map(|i| (i as f64 * 0.01, 0.0, i as f64)).collect();
        assert!(spatial_dependence_test(&field(&short, 0.0), 0, &cfg).is_err());
        let trend: Vec<_> = (0..30).map(|i| (i as f64 * 0.01, 0.0, i as f64)).collect();
        let few = PermutationTestConfig { n_perm: 50, ..cfg };
        assert!(spatial_dependence_test(&field(&trend, 0.0), 0, &few).is_err());
        let r = spatial_dependence_test(&field(&trend, 0.0), 0, &cfg).unwrap();
        assert!(r.dependent && r.p_value <= 0.01 && (0.0..=1.0).contains(&r.p_value));
    }
}
