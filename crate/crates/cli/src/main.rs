//! `geofpca` command-line driver.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

mod options;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use geofpca::dataset::{load_dataset, save_dataset, select_region, GeoLocation, LoadOptions, SpectralDataset};
use geofpca::imputation::{fit_geofpca, imputed_dataset, interpolate_radiance, GeoFpcaModel, Imputer};
use geofpca::simulation::{
    run_unmixing_study, simulate_orbit, write_study, EndmemberSet, OrbitConfig, StudyConfig, TransectConfig,
    TransectSimulator,
};
use geofpca::unmixing::{
    detect_mixed_region, summarize_unmixing, unmix_region, write_land_fractions, SmoothingConfig, UnmixConfig,
};
use geofpca::validation::{
    run_imputation_experiment, select_centers, write_report, write_summary, CenterConstraints, ExperimentConfig,
};
use geofpca::{Error, ErrorKind};

use options::{merge, parse_range, required, FitArgs, ImputeArgs, SimulateArgs, StudyArgs, UnmixArgs, ValidateArgs};

#[derive(Debug)]
pub struct UsageError(pub String);

enum Failure {
    Usage(UsageError),
    Run(Error),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "geofpca",
    version,
    about = "Geospatial functional modeling of hyperspectral radiance"
)]
struct Cli {
    /// Worker threads; default all available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file whose keys mirror the subcommand's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on one homogeneous region.
    Fit(FitArgs),
    /// Impute spectra at target locations.
    Impute(ImputeArgs),
    /// Estimate land fractions across a land/water transition.
    Unmix(UnmixArgs),
    /// Write a simulated dataset and its truth record.
    Simulate(SimulateArgs),
    /// Run the cross-track removal experiment.
    Validate(ValidateArgs),
    /// Replicated unmixing study over noise ratios.
    Study(StudyArgs),
}

fn echo<T: Serialize>(command: &str, cfg: &T) {
    let json = serde_json::to_string(cfg).expect("config serializes");
    eprintln!("geofpca {command} config: {json}");
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), Error> {
    let mut out = create(path)?;
    f(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    write_with(path, |o| writeln!(o, "{text}"))
}

fn load_input(input: &options::InputFlags) -> Result<SpectralDataset, Failure> {
    let path = required(&input.input, "input")?;
    let ds = load_dataset(
        &path,
        &LoadOptions {
            sidecar: input.sidecar.clone(),
        },
    )?;
    match &input.region {
        Some(r) => {
            let (lo, hi) = parse_range::<f64>(r, "region")?;
            Ok(select_region(&ds, lo, hi)?)
        }
        None => Ok(ds),
    }
}

fn cmd_fit(args: FitArgs) -> CmdResult {
    let cfg = args.fit.to_config()?;
    let out = required(&args.out, "out")?;
    let ds = load_input(&args.input)?;
    let model = fit_geofpca(&ds, &cfg)?;
    info!("{} components retained", model.n_components());
    model.save(&out)?;
    if let Some(path) = &args.diagnostics {
        let diag = serde_json::json!({
            "n_soundings": model.scores.len(),
            "n_wavelengths": model.wavelengths.len(),
            "k": model.basis.k,
            "eigenvalues": model.basis.eigenvalues,
            "fve_curve": model.basis.fve_curve,
            "components": model.components,
            "noise_variances": model.scores.noise_variances(),
        });
        write_json(path, &diag)?;
    }
    Ok(())
}

fn read_targets(path: &Path) -> Result<Vec<(u64, GeoLocation, u8)>, Error> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers != ["id", "latitude", "longitude", "footprint"] {
        return Err(Error::Parse {
            line: 1,
            message: "targets header must be id,latitude,longitude,footprint".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let field = |j: usize| rec.get(j).unwrap_or("").trim().to_string();
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("cannot parse {what}"),
        };
        let id = field(0).parse::<u64>().map_err(|_| bad("id"))?;
        let lat = field(1).parse::<f64>().map_err(|_| bad("latitude"))?;
        let lon = field(2).parse::<f64>().map_err(|_| bad("longitude"))?;
        let fp = field(3).parse::<u8>().map_err(|_| bad("footprint"))?;
        out.push((id, GeoLocation::new(lat, lon)?, fp));
    }
    Ok(out)
}

fn cmd_impute(args: ImputeArgs) -> CmdResult {
    let model_path = required(&args.model, "model")?;
    let targets_path = required(&args.targets, "targets")?;
    let out = required(&args.out, "out")?;
    let method = args.method.clone().unwrap_or_else(|| "functional".into());
    let model = GeoFpcaModel::load(&model_path)?;
    let targets = read_targets(&targets_path)?;
    let ws = &model.wavelengths;
    let spectra = match method.as_str() {
        "functional" => {
            let imputer = Imputer::new(&model)?;
            targets
                .iter()
                .map(|&(_, loc, fp)| imputer.impute(loc, fp).map(|s| s.values))
                .collect::<Result<Vec<_>, _>>()?
        }
        "interpolation" => {
            let input = required(&args.input, "input")?;
            let ds = load_dataset(&input, &LoadOptions::default())?;
            targets
                .iter()
                .map(|&(_, loc, fp)| interpolate_radiance(&ds, ws, loc, fp))
                .collect::<Result<Vec<_>, _>>()?
        }
        other => return Err(UsageError(format!("unknown method '{other}'")).into()),
    };
    let grid = args
        .grid_length
        .unwrap_or_else(|| *ws.indices().last().expect("non-empty wavelength set"));
    let ds = imputed_dataset(&targets, &spectra, ws, grid)?;
    save_dataset(&ds, &out)?;
    Ok(())
}

/// True land fractions from a CSV (`id, land_fraction`) or the truth JSON
/// written by `simulate`.
fn read_truth(path: &Path) -> Result<BTreeMap<u64, f64>, Error> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let t = v.get("truth").unwrap_or(&v);
        return match (
            t.get("mixed_id").and_then(|x| x.as_u64()),
            t.get("alpha").and_then(|x| x.as_f64()),
        ) {
            (Some(id), Some(a)) => Ok(BTreeMap::from([(id, a)])),
            _ => Err(Error::Parse {
                line: 1,
                message: "truth JSON lacks mixed_id and alpha".into(),
            }),
        };
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse =
            || -> Option<(u64, f64)> { Some((rec.get(0)?.trim().parse().ok()?, rec.get(1)?.trim().parse().ok()?)) };
        let (id, a) = parse().ok_or_else(|| Error::Parse {
            line: i as u64 + 2,
            message: "expected id,land_fraction".into(),
        })?;
        out.insert(id, a);
    }
    Ok(out)
}

fn cmd_unmix(args: UnmixArgs) -> CmdResult {
    let d = UnmixConfig::default();
    let cfg = UnmixConfig {
        fit: args.fit.to_config()?,
        smoothing: SmoothingConfig {
            bandwidth: args.bandwidth,
            ..SmoothingConfig::default()
        },
        land_hi: args.land_hi.unwrap_or(d.land_hi),
        water_lo: args.water_lo.unwrap_or(d.water_lo),
        reference_length: args.reference_length.unwrap_or(d.reference_length),
    };
    let out = required(&args.out, "out")?;
    let ds = load_input(&args.input)?;
    let spec = detect_mixed_region(&ds, cfg.land_hi, cfg.water_lo, cfg.reference_length)?;
    info!(
        "mixed window ({:.5}, {:.5}); lower {:?}, upper {:?}",
        spec.mixed.0, spec.mixed.1, spec.lower_label, spec.upper_label
    );
    let rows = unmix_region(&ds, &spec, &cfg)?;
    write_with(&out, |o| write_land_fractions(&rows, o))?;
    if let Some(path) = &args.summary {
        let truth = args.truth.as_deref().map(read_truth).transpose()?;
        write_json(path, &summarize_unmixing(&spec, &rows, truth.as_ref()))?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult {
    let out = required(&args.out, "out")?;
    let kind = args.kind.clone().unwrap_or_else(|| "transect".into());
    match kind.as_str() {
        "transect" => {
            let d = TransectConfig::default();
            let cfg = TransectConfig {
                rho: args.rho.unwrap_or(d.rho),
                seed: args.seed.unwrap_or(d.seed),
                alpha: args.mixed_alpha,
                n_wavelengths: args.n_wavelengths.unwrap_or(d.n_wavelengths),
                ..d
            };
            let endmembers = args.endmembers.as_deref().map(EndmemberSet::load).transpose()?;
            let (ds, truth) = TransectSimulator::new(cfg.clone(), endmembers)?.simulate(cfg.seed)?;
            save_dataset(&ds, &out)?;
            if let Some(path) = &args.truth {
                write_json(path, &serde_json::json!({ "config": cfg, "truth": truth }))?;
            }
        }
        "orbit" => {
            let d = OrbitConfig::default();
            let cfg = OrbitConfig {
                rho: args.rho.unwrap_or(d.rho),
                seed: args.seed.unwrap_or(d.seed),
                n_tracks: args.n_tracks.unwrap_or(d.n_tracks),
                n_wavelengths: args.n_wavelengths.unwrap_or(d.n_wavelengths),
                ..d
            };
            let (ds, truth) = simulate_orbit(&cfg)?;
            save_dataset(&ds, &out)?;
            if let Some(path) = &args.truth {
                write_json(path, &serde_json::json!({ "config": cfg, "truth": truth }))?;
            }
        }
        other => return Err(UsageError(format!("unknown simulation kind '{other}'")).into()),
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> CmdResult {
    let fit = args.fit.to_config()?;
    let out = required(&args.out, "out")?;
    let (r_lo, r_hi) = match &args.r {
        Some(s) => parse_range::<usize>(s, "r")?,
        None => (1, 8),
    };
    if r_lo < 1 || r_hi > 8 || r_lo > r_hi {
        return Err(UsageError(format!("r range {r_lo}:{r_hi} must lie within 1:8")).into());
    }
    let ds = load_input(&args.input)?;
    let dc = CenterConstraints::default();
    let constraints = CenterConstraints {
        footprint: args.center_footprint.unwrap_or(dc.footprint),
        half_window_deg: args.half_window.unwrap_or(dc.half_window_deg),
        min_soundings: args.min_soundings.unwrap_or(dc.min_soundings),
        r_max: r_hi,
    };
    let centers: Vec<u64> = match args.centers.as_deref().unwrap_or("auto") {
        "auto" => select_centers(&ds, &constraints),
        list => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| UsageError(format!("bad center id '{s}'")))
            })
            .collect::<Result<_, _>>()?,
    };
    info!("{} centers", centers.len());
    let cfg = ExperimentConfig {
        fit,
        half_window_deg: constraints.half_window_deg,
        r_values: (r_lo..=r_hi).collect(),
    };
    let report = run_imputation_experiment(&ds, &centers, &cfg);
    write_with(&out, |o| write_report(&report, o))?;
    if let Some(path) = &args.summary {
        let mut all = report.by_r.clone();
        all.extend(report.by_footprint.iter().cloned());
        write_with(path, |o| write_summary(&all, o))?;
    }
    Ok(())
}

fn cmd_study(args: StudyArgs) -> CmdResult {
    let out = required(&args.out, "out")?;
    let grid: Vec<f64> = match &args.rho {
        Some(s) => s
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| UsageError(format!("bad rho '{x}'")))
            })
            .collect::<Result<_, _>>()?,
        None => vec![0.01, 0.05, 0.1, 0.15, 0.2],
    };
    let mut cfg = StudyConfig::default();
    if let Some(seed) = args.seed {
        cfg.transect.seed = seed;
    }
    let rows = run_unmixing_study(&grid, args.reps.unwrap_or(200), &cfg)?;
    write_with(&out, |o| write_study(&rows, o))?;
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| UsageError(format!("cannot start {n} threads: {e}")))?;
    }
    let config = cli.config.as_ref();
    match cli.command {
        Command::Fit(a) => {
            let a = merge(&a, config)?;
            echo("fit", &a);
            cmd_fit(a)
        }
        Command::Impute(a) => {
            let a = merge(&a, config)?;
            echo("impute", &a);
            cmd_impute(a)
        }
        Command::Unmix(a) => {
            let a = merge(&a, config)?;
            echo("unmix", &a);
            cmd_unmix(a)
        }
        Command::Simulate(a) => {
            let a = merge(&a, config)?;
            echo("simulate", &a);
            cmd_simulate(a)
        }
        Command::Validate(a) => {
            let a = merge(&a, config)?;
            echo("validate", &a);
            cmd_validate(a)
        }
        Command::Study(a) => {
            let a = merge(&a, config)?;
            echo("study", &a);
            cmd_study(a)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(UsageError(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Data => ExitCode::from(3),
                ErrorKind::Numerical => ExitCode::from(4),
            }
        }
    }
}
