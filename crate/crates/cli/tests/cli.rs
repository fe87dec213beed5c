use std::path::Path;
use std::process::Command;

use twolevel_cli::config::{ExperimentSpec, FileConfig, Variant};
use twolevel_cli::report::{compare, MuReport, RunReport};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twolevel"))
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn flags_override_file_values() {
    let file: FileConfig = toml::from_str("days = 14\nseed = 3\nbuildings = [\"office\"]\npreset = \"paper\"\n").unwrap();
    let flags = FileConfig { days: Some(7), ..Default::default() };
    let spec = ExperimentSpec::resolve(flags.or(file)).unwrap();
    assert_eq!(spec.days, 7);
    assert_eq!(spec.seed, 3);
    assert_eq!(spec.buildings.len(), 1);
    assert_eq!(spec.settings.time_limit_s, 3.0 * 3600.0);
    assert_eq!(spec.variants, vec![Variant::Full]);
}

#[test]
fn bad_values_are_usage_errors() {
    for text in ["days = 0", "preset = \"fast\"", "rel_gap = 1.5", "buildings = [\"castle\"]", "production = \"median\""] {
        let file: FileConfig = toml::from_str(text).unwrap();
        let err = ExperimentSpec::resolve(file).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}");
    }
    assert!(toml::from_str::<FileConfig>("dayz = 3").is_err());
}

#[test]
fn all_expands_to_five_buildings() {
    let spec = ExperimentSpec::resolve(FileConfig::default()).unwrap();
    assert_eq!(spec.buildings.len(), 5);
}

#[test]
fn mu_flag_follows_target() {
    assert!(MuReport::new(100.0, 97.0).within_target);
    assert!(!MuReport::new(100.0, 90.0).within_target);
}

#[test]
fn generate_data_writes_one_file_pair_per_year() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate-data", "--building", "office", "--building", "retail", "--years", "2", "--seed", "11", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csvs = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")).count();
    assert_eq!(csvs, 4);
    let meta: serde_json::Value = serde_json::from_str(&read(&dir.path().join("office_year2.json"))).unwrap();
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["hours"], 8736);
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "generate-data");
    assert_eq!(manifest["backend"], "highs");
}

#[test]
fn unknown_backend_and_bad_flags_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["solve", "--backend", "gurobi", "--building", "office", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["solve", "--variant", "quantum"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["solve", "--building", "castle", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn backend_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("TWOLEVEL_BACKEND", "cplex")
        .args(["solve", "--building", "office", "--days", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_and_compare_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "solve", "--building", "hospital", "--days", "2", "--window", "1", "--variant", "full", "--variant", "semi",
            "--variant", "two-level", "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b = dir.path().join("hospital");
    let table = read(&b.join("table.csv"));
    assert!(table.starts_with("Model,Days,Time,Nodes,LP-iter,Bat,Boil,Chp,Pow,Stor"));
    assert_eq!(table.lines().count(), 4);
    assert!(read(&b.join("history_two-level.csv")).lines().count() >= 2);
    let mu: MuReport = serde_json::from_str(&read(&b.join("mu.json"))).unwrap();
    assert!(mu.mu.is_finite());

    let reports: Vec<RunReport> =
        ["full", "semi", "two-level"].iter().map(|v| RunReport::load(&b.join(format!("report_{v}.json"))).unwrap()).collect();
    assert!(reports[0].objective <= reports[1].objective * (1.0 + 1e-2));
    let c = reports[0].breakdown().total();
    assert!((c - reports[0].objective).abs() <= 1e-6 * c.abs());
    assert_eq!(compare(&reports).len(), 3);

    let out = bin()
        .arg("compare")
        .arg(b.join("report_semi.json"))
        .arg(b.join("report_two-level.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&dir.path().join("compare.csv")).lines().count(), 2);
}

#[test]
fn saved_library_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["profiles", "--building", "supermarket", "--days", "2", "--window", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lib = dir.path().join("supermarket/library.json");
    let validation: serde_json::Value = serde_json::from_str(&read(&dir.path().join("supermarket/validation.json"))).unwrap();
    assert_eq!(validation["failures"].as_array().unwrap().len(), 0);
    let solved = dir.path().join("solved");
    let out = bin()
        .args(["solve", "--building", "supermarket", "--days", "2", "--variant", "semi", "--library"])
        .arg(&lib)
        .arg("--out")
        .arg(&solved)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(solved.join("supermarket/report_semi.json").exists());
    assert!(!solved.join("supermarket/pool.json").exists());
}

#[test]
fn compare_needs_readable_reports() {
    let out = bin().args(["compare", "/nonexistent/report.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
