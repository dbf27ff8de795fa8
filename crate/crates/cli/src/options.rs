//! Flag structs shared by the command line and `--config` JSON files.
//!
//! Every flag has a config key of the same name (dashes become underscores).
//! Flags given on the command line override the file.

use std::path::PathBuf;

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use geofpca::geostat::{BinningSpec, PermutationTestConfig, WeightScheme};
use geofpca::imputation::FitConfig;
use geofpca::mean_model::Covariate;

use crate::UsageError;

/// Overlay the explicitly given flags on the config file and deserialize.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&PathBuf>) -> Result<T, UsageError> {
    let mut base = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<Value>(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?
        }
        None => Value::Object(Default::default()),
    };
    let Value::Object(map) = &mut base else {
        return Err(UsageError("config file must hold a JSON object".into()));
    };
    let over = serde_json::to_value(flags).expect("flags serialize");
    if let Value::Object(o) = over {
        for (k, v) in o {
            if !v.is_null() {
                map.insert(k, v);
            }
        }
    }
    serde_json::from_value(base).map_err(|e| UsageError(format!("config: {e}")))
}

pub fn required<T: Clone>(v: &Option<T>, name: &str) -> Result<T, UsageError> {
    v.clone()
        .ok_or_else(|| UsageError(format!("missing --{name} (or config key {})", name.replace('-', "_"))))
}

/// `lo:hi` pair of numbers.
pub fn parse_range<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T), UsageError> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| UsageError(format!("{what} '{s}' must look like lo:hi")))?;
    let p = |x: &str| {
        x.trim()
            .parse::<T>()
            .map_err(|_| UsageError(format!("{what} '{s}': cannot parse '{x}'")))
    };
    Ok((p(a)?, p(b)?))
}

fn parse_enum<T: DeserializeOwned>(s: &str, what: &str) -> Result<T, UsageError> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| UsageError(format!("unknown {what} '{s}'")))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FitFlags {
    /// Fraction of variance explained that fixes the number of components.
    #[arg(long)]
    pub fve: Option<f64>,
    /// Minimum fraction of soundings observing a wavelength for it to be kept.
    #[arg(long)]
    pub min_coverage: Option<f64>,
    /// Mean-model covariate: latitude or latitude_longitude.
    #[arg(long)]
    pub covariate: Option<String>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Largest pair distance binned (km); default half the largest pairwise distance.
    #[arg(long)]
    pub max_distance_km: Option<f64>,
    #[arg(long)]
    pub min_pairs: Option<usize>,
    /// Variogram weights: pairs_over_distance_squared or pairs.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub n_perm: Option<usize>,
    /// Significance level of the spatial dependence test.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub neighbors: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest latitude span (degrees) fitted as one region; 0 disables the check.
    #[arg(long)]
    pub max_lat_span: Option<f64>,
    /// Drop second-difference triples with a neighbor gap above this (km).
    #[arg(long)]
    pub max_gap_km: Option<f64>,
}

impl FitFlags {
    pub fn to_config(&self) -> Result<FitConfig, UsageError> {
        let d = FitConfig::default();
        let binning = BinningSpec {
            n_bins: self.bins.unwrap_or(d.binning.n_bins),
            max_distance_km: self.max_distance_km.or(d.binning.max_distance_km),
            min_pairs: self.min_pairs.unwrap_or(d.binning.min_pairs),
        };
        let permutation = PermutationTestConfig {
            n_perm: self.n_perm.unwrap_or(d.permutation.n_perm),
            alpha: self.alpha.unwrap_or(d.permutation.alpha),
            neighbors: self.neighbors.unwrap_or(d.permutation.neighbors),
            seed: self.seed.unwrap_or(d.permutation.seed),
        };
        Ok(FitConfig {
            fve: self.fve.unwrap_or(d.fve),
            min_coverage: self.min_coverage.unwrap_or(d.min_coverage),
            covariate: match &self.covariate {
                Some(s) => parse_enum::<Covariate>(s, "covariate")?,
                None => d.covariate,
            },
            binning,
            weights: match &self.weights {
                Some(s) => parse_enum::<WeightScheme>(s, "weight scheme")?,
                None => d.weights,
            },
            permutation,
            max_lat_span: match self.max_lat_span {
                Some(v) if v <= 0.0 => None,
                Some(v) => Some(v),
                None => d.max_lat_span,
            },
            differencing: geofpca::fpca::DifferencingOptions {
                max_gap_km: self.max_gap_km,
            },
            wavelengths: None,
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct InputFlags {
    /// Dataset CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSON sidecar with grid_length, unit and orbit_id.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Latitude window lo:hi applied before fitting.
    #[arg(long)]
    pub region: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitFlags,
    /// Model JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional diagnostics JSON (FVE curve, tests, variograms).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CSV with columns id, latitude, longitude, footprint.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// functional (default) or interpolation.
    #[arg(long)]
    pub method: Option<String>,
    /// Dataset to interpolate from (interpolation method only).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Radiance columns in the output; default the largest modeled index.
    #[arg(long)]
    pub grid_length: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct UnmixArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitFlags,
    #[arg(long)]
    pub land_hi: Option<f64>,
    #[arg(long)]
    pub water_lo: Option<f64>,
    /// Length (degrees) of each reference region.
    #[arg(long)]
    pub reference_length: Option<f64>,
    /// Fixed smoothing bandwidth in degrees; default cross-validated.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// True land fractions: CSV with columns id, land_fraction, or a simulate truth JSON.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    /// transect (default) or orbit.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Land fraction of the transect's mixed site; default drawn from U(0, 1).
    #[arg(long)]
    pub mixed_alpha: Option<f64>,
    #[arg(long)]
    pub n_wavelengths: Option<usize>,
    /// Cross-tracks of a simulated orbit.
    #[arg(long)]
    pub n_tracks: Option<usize>,
    /// Endmember profile JSON replacing the built-in profiles (transect only).
    #[arg(long)]
    pub endmembers: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Truth JSON.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitFlags,
    /// Removed cross-track counts lo:hi.
    #[arg(long)]
    pub r: Option<String>,
    /// `auto` or a comma-separated list of sounding ids.
    #[arg(long)]
    pub centers: Option<String>,
    #[arg(long)]
    pub center_footprint: Option<u8>,
    #[arg(long)]
    pub half_window: Option<f64>,
    #[arg(long)]
    pub min_soundings: Option<usize>,
    /// Per-sounding report CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Aggregate CSV (per r, then per footprint and r).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyArgs {
    /// Comma-separated noise ratios.
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
