use std::path::Path;
use std::process::{Command, Output};

use geofpca::dataset::{load_dataset, LoadOptions};
use geofpca::imputation::{GeoFpcaModel, Imputer};
use geofpca::validation::{run_imputation_experiment, select_centers, CenterConstraints, ExperimentConfig};

fn geofpca(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geofpca"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = geofpca(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn orbit(dir: &Path) {
    ok(
        dir,
        &[
            "simulate",
            "--kind",
            "orbit",
            "--n-tracks",
            "30",
            "--seed",
            "5",
            "--out",
            "orbit.csv",
        ],
    );
}

#[test]
fn fit_with_region_and_fve_writes_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    orbit(d);
    ok(
        d,
        &[
            "fit",
            "--input",
            "orbit.csv",
            "--region",
            "34.6:34.9",
            "--fve",
            "0.95",
            "--out",
            "model.json",
        ],
    );
    let model = GeoFpcaModel::load(&d.join("model.json")).unwrap();
    assert!(model.region.0 >= 34.6 && model.region.1 <= 34.9);
    assert_eq!(model.config.fve, 0.95);
}

#[test]
fn functional_imputation_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    orbit(d);
    ok(d, &["fit", "--input", "orbit.csv", "--out", "model.json"]);
    std::fs::write(
        d.join("targets.csv"),
        "id,latitude,longitude,footprint\n7,34.66,23.88,2\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "impute",
            "--model",
            "model.json",
            "--targets",
            "targets.csv",
            "--out",
            "imputed.csv",
        ],
    );

    let model = GeoFpcaModel::load(&d.join("model.json")).unwrap();
    let want = Imputer::new(&model)
        .unwrap()
        .impute(geofpca::dataset::GeoLocation::new(34.66, 23.88).unwrap(), 2)
        .unwrap()
        .values;
    let got = load_dataset(&d.join("imputed.csv"), &LoadOptions::default()).unwrap();
    let s = got.get(7).unwrap();
    assert_eq!(s.spectrum(&model.wavelengths).unwrap(), want);
}

#[test]
fn simulate_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--seed", "3", "--out", "a.csv", "--truth", "a.json"]);
    ok(d, &["simulate", "--seed", "3", "--out", "b.csv", "--truth", "b.json"]);
    ok(d, &["simulate", "--seed", "4", "--out", "c.csv"]);
    let read = |n: &str| std::fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.json"), read("b.json"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn validate_summary_matches_a_library_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    orbit(d);
    let ds = load_dataset(&d.join("orbit.csv"), &LoadOptions::default()).unwrap();
    let constraints = CenterConstraints {
        min_soundings: 100,
        ..CenterConstraints::default()
    };
    let centers: Vec<u64> = select_centers(&ds, &constraints).into_iter().take(2).collect();
    assert_eq!(centers.len(), 2);
    let list = centers.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    ok(
        d,
        &[
            "validate",
            "--input",
            "orbit.csv",
            "--r",
            "1:2",
            "--centers",
            &list,
            "--out",
            "report.csv",
            "--summary",
            "summary.csv",
        ],
    );

    let cfg = ExperimentConfig {
        r_values: vec![1, 2],
        ..ExperimentConfig::default()
    };
    let report = run_imputation_experiment(&ds, &centers, &cfg);
    let mut rows = csv::Reader::from_path(d.join("summary.csv")).unwrap();
    let header = rows.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let records: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    let aggregates: Vec<_> = report.by_r.iter().chain(&report.by_footprint).collect();
    assert_eq!(records.len(), aggregates.len());
    for (rec, agg) in records.iter().zip(aggregates) {
        let num = |name: &str| rec[col(name)].parse::<f64>().unwrap();
        assert_eq!(num("r") as usize, agg.r);
        assert_eq!(num("n") as usize, agg.functional.n);
        for (name, want) in [
            ("functional_mean", agg.functional.mean),
            ("functional_ci_high", agg.functional.ci_high),
            ("interpolation_mean", agg.interpolation.mean),
            ("rmspe_ci_low", agg.rmspe.ci_low),
        ] {
            assert!((num(name) - want).abs() <= 1e-12, "{name}: {} vs {want}", num(name));
        }
    }
}

#[test]
fn config_file_is_merged_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), r#"{"rho": 0.05, "seed": 1, "mixed_alpha": 0.3}"#).unwrap();
    ok(
        d,
        &["--config", "cfg.json", "simulate", "--seed", "2", "--out", "merged.csv"],
    );
    ok(
        d,
        &[
            "simulate",
            "--rho",
            "0.05",
            "--seed",
            "2",
            "--mixed-alpha",
            "0.3",
            "--out",
            "flags.csv",
        ],
    );
    ok(
        d,
        &[
            "simulate",
            "--rho",
            "0.05",
            "--seed",
            "1",
            "--mixed-alpha",
            "0.3",
            "--out",
            "file_seed.csv",
        ],
    );
    let read = |n: &str| std::fs::read(d.join(n)).unwrap();
    assert_eq!(read("merged.csv"), read("flags.csv"));
    assert_ne!(read("merged.csv"), read("file_seed.csv"));
}

#[test]
fn exit_codes_separate_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(geofpca(d, &["fit", "--out", "m.json"]).status.code(), Some(2));
    assert_eq!(geofpca(d, &["fit", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(geofpca(d, &["--config", "missing.json", "fit"]).status.code(), Some(2));
    let missing = geofpca(d, &["fit", "--input", "missing.csv", "--out", "m.json"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.csv"));
    std::fs::write(d.join("bad.csv"), "id,latitude\n1,not-a-number\n").unwrap();
    assert_eq!(
        geofpca(d, &["fit", "--input", "bad.csv", "--out", "m.json"])
            .status
            .code(),
        Some(3)
    );
}
