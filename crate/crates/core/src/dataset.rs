//! Spectral soundings, CSV ingest, and along-track geometry.
//!
//! A dataset is a table of soundings in orbit order: rows are grouped by
//! footprint and, within a footprint, ordered by sounding time. The
//! cross-track index of a sounding is its rank among the soundings of the same
//! footprint, so the file must keep that order. A location whose radiance is
//! entirely missing stays in the table as a placeholder for its cross-track.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius (IUGG) in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Number of cross-track detector positions.
pub const FOOTPRINT_COUNT: u8 = 8;

pub const DEFAULT_GRID_LENGTH: usize = 1016;

const FIXED_COLUMNS: [&str; 5] = ["id", "latitude", "longitude", "footprint", "land_fraction"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoLocation {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoLocation {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self> {
        if !latitude.is_finite() || !longitude.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite location ({latitude}, {longitude})"
            )));
        }
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::InvalidInput(format!("latitude {latitude} outside [-90, 90]")));
        }
        if longitude <= -180.0 || longitude > 180.0 {
            return Err(Error::InvalidInput(format!(
                "longitude {longitude} outside (-180, 180]"
            )));
        }
        Ok(Self { latitude, longitude })
    }
}

/// Haversine distance in kilometers.
pub fn great_circle_distance(a: GeoLocation, b: GeoLocation) -> f64 {
    let (phi1, phi2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.longitude - a.longitude).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sounding {
    pub id: u64,
    pub location: GeoLocation,
    pub footprint: u8,
    pub land_fraction: Option<f64>,
    /// Radiance by wavelength index; position `j` holds index `j + 1`.
    pub radiance: Vec<Option<f64>>,
}

impl Sounding {
    /// Radiance at a 1-based wavelength index.
    pub fn radiance_at(&self, w: usize) -> Option<f64> {
        w.checked_sub(1).and_then(|j| self.radiance.get(j).copied().flatten())
    }

    /// True when at least one radiance value is observed.
    pub fn has_radiance(&self) -> bool {
        self.radiance.iter().any(Option::is_some)
    }

    /// Radiance restricted to `ws`, or `None` if any of those values is missing.
    pub fn spectrum(&self, ws: &WavelengthSet) -> Option<Vec<f64>> {
        ws.iter().map(|w| self.radiance_at(w)).collect()
    }
}

/// Ordered set of 1-based wavelength indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct WavelengthSet {
    indices: Vec<usize>,
}

impl WavelengthSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("empty wavelength set".into()));
        }
        if indices[0] == 0 {
            return Err(Error::InvalidInput("wavelength indices are 1-based".into()));
        }
        if indices.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidInput(
                "wavelength indices must be strictly increasing".into(),
            ));
        }
        Ok(Self { indices })
    }

    /// All indices `1..=grid_length`.
    pub fn full(grid_length: usize) -> Result<Self> {
        Self::new((1..=grid_length).collect())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn intersection(&self, other: &WavelengthSet) -> Result<Self> {
        let theirs: HashSet<usize> = other.iter().collect();
        Self::new(self.iter().filter(|w| theirs.contains(w)).collect())
    }
}

impl TryFrom<Vec<usize>> for WavelengthSet {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WavelengthSet> for Vec<usize> {
    fn from(ws: WavelengthSet) -> Self {
        ws.indices
    }
}

/// Soundings of all footprints sharing one along-track position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossTrack {
    pub index: usize,
    /// `(footprint, sounding id)` pairs, ordered by footprint.
    pub members: Vec<(u8, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDataset {
    soundings: Vec<Sounding>,
    grid_length: usize,
    pub metadata: BTreeMap<String, String>,
}

impl SpectralDataset {
    pub fn new(soundings: Vec<Sounding>, grid_length: usize) -> Result<Self> {
        if grid_length == 0 {
            return Err(Error::InvalidInput("grid length must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(soundings.len());
        for s in &soundings {
            if !seen.insert(s.id) {
                return Err(Error::InvalidInput(format!("duplicate sounding id {}", s.id)));
            }
            validate_sounding(s, grid_length)?;
        }
        Ok(Self {
            soundings,
            grid_length,
            metadata: BTreeMap::new(),
        })
    }

    pub fn soundings(&self) -> &[Sounding] {
        &self.soundings
    }

    pub fn len(&self) -> usize {
        self.soundings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soundings.is_empty()
    }

    pub fn grid_length(&self) -> usize {
        self.grid_length
    }

    pub fn get(&self, id: u64) -> Option<&Sounding> {
        self.soundings.iter().find(|s| s.id == id)
    }

    /// Footprints with at least one sounding carrying radiance.
    pub fn footprints(&self) -> BTreeSet<u8> {
        self.soundings
            .iter()
            .filter(|s| s.has_radiance())
            .map(|s| s.footprint)
            .collect()
    }

    pub fn footprint_soundings(&self, footprint: u8) -> impl Iterator<Item = &Sounding> {
        self.soundings.iter().filter(move |s| s.footprint == footprint)
    }

    /// Subset keeping rows for which `keep` holds, in the original order.
    pub fn filter(&self, mut keep: impl FnMut(&Sounding) -> bool) -> Self {
        Self {
            soundings: self.soundings.iter().filter(|s| keep(s)).cloned().collect(),
            grid_length: self.grid_length,
            metadata: self.metadata.clone(),
        }
    }

    /// Cross-track index of every sounding: its rank within its footprint in row order.
    pub fn track_indices(&self) -> HashMap<u64, usize> {
        let mut counters = [0usize; FOOTPRINT_COUNT as usize + 1];
        self.soundings
            .iter()
            .map(|s| {
                let slot = &mut counters[s.footprint as usize];
                let idx = *slot;
                *slot += 1;
                (s.id, idx)
            })
            .collect()
    }

    pub fn cross_tracks(&self) -> Vec<CrossTrack> {
        let mut tracks: Vec<CrossTrack> = Vec::new();
        let index = self.track_indices();
        for s in &self.soundings {
            let t = index[&s.id];
            while tracks.len() <= t {
                tracks.push(CrossTrack {
                    index: tracks.len(),
                    members: Vec::new(),
                });
            }
            tracks[t].members.push((s.footprint, s.id));
        }
        for t in &mut tracks {
            t.members.sort_unstable();
        }
        tracks
    }
}

fn validate_sounding(s: &Sounding, grid_length: usize) -> Result<()> {
    GeoLocation::new(s.location.latitude, s.location.longitude)?;
    if !(1..=FOOTPRINT_COUNT).contains(&s.footprint) {
        return Err(Error::InvalidInput(format!(
            "sounding {}: footprint {} outside 1..={FOOTPRINT_COUNT}",
            s.id, s.footprint
        )));
    }
    if s.radiance.len() != grid_length {
        return Err(Error::InvalidInput(format!(
            "sounding {}: radiance length {} differs from grid length {grid_length}",
            s.id,
            s.radiance.len()
        )));
    }
    if let Some(a) = s.land_fraction {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidInput(format!(
                "sounding {}: land fraction {a} outside [0, 1]",
                s.id
            )));
        }
    }
    if s.radiance.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("sounding {}: non-finite radiance", s.id)));
    }
    Ok(())
}

/// Optional JSON sidecar accompanying a dataset CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_id: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub sidecar: Option<PathBuf>,
}

fn parse_cell(raw: &str) -> std::result::Result<Option<f64>, String> {
    let t = raw.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|e| format!("cannot parse '{t}' as a number: {e}"))
}

/// Read a dataset CSV with columns `id, latitude, longitude, footprint, land_fraction, w_1..w_W`.
pub fn load_dataset(path: &Path, options: &LoadOptions) -> Result<SpectralDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names.len() < FIXED_COLUMNS.len() + 1 || names[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header must start with {} followed by w_1..w_W",
                FIXED_COLUMNS.join(",")
            ),
        });
    }
    let grid_length = names.len() - FIXED_COLUMNS.len();
    for (j, name) in names[FIXED_COLUMNS.len()..].iter().enumerate() {
        if *name != format!("w_{}", j + 1) {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column w_{}, found '{name}'", j + 1),
            });
        }
    }

    let mut metadata = BTreeMap::new();
    if let Some(sidecar_path) = &options.sidecar {
        let text = std::fs::read_to_string(sidecar_path).map_err(|e| Error::io(sidecar_path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        if let Some(g) = sidecar.grid_length {
            if g != grid_length {
                return Err(Error::InvalidInput(format!(
                    "sidecar grid_length {g} disagrees with {grid_length} radiance columns"
                )));
            }
        }
        if let Some(unit) = sidecar.unit {
            metadata.insert("unit".to_string(), unit);
        }
        if let Some(orbit) = sidecar.orbit_id {
            metadata.insert("orbit_id".to_string(), orbit);
        }
    }

    let mut soundings = Vec::new();
    let mut seen_positions: HashSet<(u8, u64)> = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != names.len() {
            return Err(bad(format!("expected {} columns, found {}", names.len(), record.len())));
        }
        let id: u64 = record[0]
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad id '{}': {e}", &record[0])))?;
        let latitude = parse_cell(&record[1]).map_err(bad)?.ok_or_else(|| Error::Parse {
            line,
            message: "missing latitude".into(),
        })?;
        let longitude = parse_cell(&record[2])
            .map_err(|m| Error::Parse { line, message: m })?
            .ok_or_else(|| Error::Parse {
                line,
                message: "missing longitude".into(),
            })?;
        let footprint: u8 = record[3].trim().parse().map_err(|e| Error::Parse {
            line,
            message: format!("bad footprint '{}': {e}", &record[3]),
        })?;
        if !(1..=FOOTPRINT_COUNT).contains(&footprint) {
            return Err(Error::Parse {
                line,
                message: format!("footprint {footprint} outside 1..={FOOTPRINT_COUNT}"),
            });
        }
        let land_fraction = parse_cell(&record[4]).map_err(|m| Error::Parse { line, message: m })?;
        let radiance = record
            .iter()
            .skip(FIXED_COLUMNS.len())
            .map(parse_cell)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| Error::Parse { line, message: m })?;
        let location = GeoLocation::new(latitude, longitude).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if !seen_positions.insert((footprint, latitude.to_bits())) {
            warn!("line {line}: duplicate latitude {latitude} on footprint {footprint}; keeping first");
            continue;
        }
        let sounding = Sounding {
            id,
            location,
            footprint,
            land_fraction,
            radiance,
        };
        validate_sounding(&sounding, grid_length).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        soundings.push(sounding);
    }
    let mut ds = SpectralDataset::new(soundings, grid_length)?;
    ds.metadata = metadata;
    Ok(ds)
}

fn format_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write a dataset in the same CSV layout `load_dataset` reads.
pub fn save_dataset(ds: &SpectralDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_dataset(ds, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_dataset(ds: &SpectralDataset, out: &mut impl Write) -> std::io::Result<()> {
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=ds.grid_length).map(|j| format!("w_{j}")));
    writeln!(out, "{}", header.join(","))?;
    for s in &ds.soundings {
        let mut row = vec![
            s.id.to_string(),
            s.location.latitude.to_string(),
            s.location.longitude.to_string(),
            s.footprint.to_string(),
            format_cell(s.land_fraction),
        ];
        row.extend(s.radiance.iter().map(|v| format_cell(*v)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Soundings with latitude in `[lat_lo, lat_hi]`.
pub fn select_region(ds: &SpectralDataset, lat_lo: f64, lat_hi: f64) -> Result<SpectralDataset> {
    if !(lat_lo < lat_hi) {
        return Err(Error::InvalidInput(format!(
            "region window [{lat_lo}, {lat_hi}] is empty"
        )));
    }
    let mut region = ds.filter(|s| (lat_lo..=lat_hi).contains(&s.location.latitude));
    if region.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no soundings with latitude in [{lat_lo}, {lat_hi}]"
        )));
    }
    region
        .metadata
        .insert("region".to_string(), format!("{lat_lo}:{lat_hi}"));
    Ok(region)
}

/// Wavelength indices observed often enough to support estimation.
///
/// Coverage is counted over soundings that carry any radiance; fully missing
/// locations do not count against a wavelength. Every footprint must also
/// observe the index at least twice so its mean coefficients are estimable.
pub fn common_wavelengths(ds: &SpectralDataset, min_coverage: f64) -> Result<WavelengthSet> {
    if !(min_coverage > 0.0 && min_coverage <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "min_coverage {min_coverage} outside (0, 1]"
        )));
    }
    let observed: Vec<&Sounding> = ds.soundings.iter().filter(|s| s.has_radiance()).collect();
    if observed.is_empty() {
        return Err(Error::InsufficientData("no sounding carries radiance".into()));
    }
    let footprints = ds.footprints();
    let n = observed.len() as f64;
    let mut kept = Vec::new();
    for w in 1..=ds.grid_length {
        let mut total = 0usize;
        let mut per_fp = [0usize; FOOTPRINT_COUNT as usize + 1];
        for s in &observed {
            if s.radiance_at(w).is_some() {
                total += 1;
                per_fp[s.footprint as usize] += 1;
            }
        }
        let coverage_ok = total as f64 >= min_coverage * n - 1e-9 * n;
        if coverage_ok && footprints.iter().all(|&p| per_fp[p as usize] >= 2) {
            kept.push(w);
        }
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no wavelength reaches coverage {min_coverage}"
        )));
    }
    WavelengthSet::new(kept)
}

/// Cross-track indices forming the `r` tracks closest to the center sounding.
///
/// Odd `r` takes `(r-1)/2` tracks on each side; even `r` takes `r/2` tracks
/// before the center and `r/2 - 1` after it.
pub fn cross_track_window(ds: &SpectralDataset, center: u64, r: usize) -> Result<Vec<usize>> {
    if !(1..=FOOTPRINT_COUNT as usize).contains(&r) {
        return Err(Error::InvalidInput(format!("r = {r} outside 1..=8")));
    }
    let index = ds.track_indices();
    let t = *index
        .get(&center)
        .ok_or_else(|| Error::InvalidInput(format!("center sounding {center} not found")))?;
    let (before, after) = if r % 2 == 1 {
        ((r - 1) / 2, (r - 1) / 2)
    } else {
        (r / 2, r / 2 - 1)
    };
    let n_tracks = index.values().max().map_or(0, |m| m + 1);
    if t < before || t + after >= n_tracks {
        return Err(Error::InsufficientData(format!(
            "sounding {center} lacks {before} cross-tracks before and {after} after it"
        )));
    }
    Ok((t - before..=t + after).collect())
}

/// Split off the `r` closest cross-tracks around `center` as a held-out set.
pub fn remove_cross_tracks(ds: &SpectralDataset, center: u64, r: usize) -> Result<(SpectralDataset, SpectralDataset)> {
    let window = cross_track_window(ds, center, r)?;
    let (lo, hi) = (window[0], *window.last().unwrap());
    let index = ds.track_indices();
    let held = |s: &Sounding| (lo..=hi).contains(&index[&s.id]);
    Ok((ds.filter(|s| !held(s)), ds.filter(held)))
}
