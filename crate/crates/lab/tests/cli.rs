use std::fs;
use std::path::Path;

use lab::cli::{run, EXIT_FAIL, EXIT_OK, EXIT_USAGE};

fn run_cmd(cmd: &str, config: &str, dir: &Path, extra: &[&str]) -> (i32, String) {
    fs::create_dir_all(dir).unwrap();
    let cfg = dir.join("input.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let mut args = vec!["tiletower".to_string(), cmd.to_string(), "--config".into(), cfg.display().to_string(), "--out".into(), out.display().to_string()];
    args.extend(extra.iter().map(|s| s.to_string()));
    let mut err = Vec::new();
    let code = run(args, &mut err);
    (code, String::from_utf8(err).unwrap())
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir).unwrap().map(|e| e.unwrap()).map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())).collect();
    v.sort();
    v
}

#[test]
fn build_default_profile_passes_and_writes_manifest() {
    let t = tempfile::tempdir().unwrap();
    let (code, _) = run_cmd("build", "{}", t.path(), &[]);
    assert_eq!(code, EXIT_OK);
    let out = t.path().join("out");
    for f in ["manifest.json", "n_runs.csv", "ledger.csv", "config.json", "meta.json"] {
        assert!(out.join(f).exists(), "{}", f);
    }
    let meta = fs::read_to_string(out.join("meta.json")).unwrap();
    assert!(meta.contains(lab::VERSION));
    let csv = fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert!(csv.starts_with("# ledger schema=1"));
}

#[test]
fn build_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_cmd("build", "{}", a.path(), &[]).0, EXIT_OK);
    assert_eq!(run_cmd("build", "{}", b.path(), &[]).0, EXIT_OK);
    assert_eq!(tree(&a.path().join("out")), tree(&b.path().join("out")));
}

#[test]
fn infeasible_subdivision_exits_with_validation_failure() {
    let t = tempfile::tempdir().unwrap();
    let cfg = r#"{"profile": {"levels": 2, "height": 2, "gen": [[1, 6], [7, 8]], "subdiv": 0}}"#;
    let (code, err) = run_cmd("build", cfg, t.path(), &[]);
    assert_eq!(code, EXIT_FAIL);
    assert!(err.contains("subdivision infeasible"), "{}", err);
    assert!(err.contains("ledger.csv"));
}

#[test]
fn empty_norms_input_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run_cmd("norms", "", t.path(), &[]).0, EXIT_USAGE);
}

#[test]
fn bad_arguments_are_usage_errors() {
    let mut err = Vec::new();
    assert_eq!(run(["tiletower", "frobnicate"], &mut err), EXIT_USAGE);
    assert_eq!(run(["tiletower", "build", "--out", "x"], &mut err), EXIT_USAGE);
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run_cmd("build", "{}", t.path(), &["--mode", "fuzzy"]).0, EXIT_USAGE);
    assert_eq!(run_cmd("build", r#"{"profile": "toy_z"}"#, t.path(), &[]).0, EXIT_USAGE);
    assert_eq!(run_cmd("build", r#"{"unknown_field": 1}"#, t.path(), &[]).0, EXIT_USAGE);
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let mut err = Vec::new();
    let args = ["tiletower", "walsh", "--config", "/nonexistent/c.json", "--out", t.path().to_str().unwrap()];
    assert_eq!(run(args, &mut err), EXIT_USAGE);
}

#[test]
fn seed_and_mode_overrides_are_recorded() {
    let t = tempfile::tempdir().unwrap();
    let (code, _) = run_cmd("reconstruct", "{}", t.path(), &["--seed", "7", "--mode", "exact"]);
    assert_eq!(code, EXIT_OK);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("out/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["mode"], "exact");
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("out/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 7);
}

#[test]
fn walsh_suite_passes_on_a_small_corpus() {
    let t = tempfile::tempdir().unwrap();
    let cfg = r#"{"walsh": {"resolution": 8, "random_functions": 5, "max_n": 20, "column_height": 8}}"#;
    let (code, err) = run_cmd("walsh", cfg, t.path(), &["--svg"]);
    assert_eq!(code, EXIT_OK, "{}", err);
    assert!(t.path().join("out/columns.svg").exists());
    let svg = fs::read_to_string(t.path().join("out/columns.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}

#[test]
fn svg_only_on_request() {
    let t = tempfile::tempdir().unwrap();
    let cfg = r#"{"walsh": {"resolution": 6, "random_functions": 2, "max_n": 8, "column_height": 4}}"#;
    assert_eq!(run_cmd("walsh", cfg, t.path(), &[]).0, EXIT_OK);
    assert!(!t.path().join("out/columns.svg").exists());
}

#[test]
fn warmup_lower_bound_sum_is_exact() {
    let t = tempfile::tempdir().unwrap();
    let (code, err) = run_cmd("warmup", r#"{"profile": "warmup"}"#, t.path(), &[]);
    assert_eq!(code, EXIT_OK, "{}", err);
    let csv = fs::read_to_string(t.path().join("out/warmup.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[0], "6.000000");
    assert_eq!(row[4], "1.000000");
}

#[test]
fn warmup_generation_width_one() {
    let t = tempfile::tempdir().unwrap();
    let cfg = r#"{"profile": {"levels": 1, "height": 1, "gen": [[6, 6]], "subdiv": 0, "floor_gen": 6}, "mode": "exact"}"#;
    let (code, err) = run_cmd("warmup", cfg, t.path(), &[]);
    assert_eq!(code, EXIT_OK, "{}", err);
    let csv = fs::read_to_string(t.path().join("out/warmup.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[0], "1.000000");
    assert_eq!(row[4], "1.000000");
}

#[test]
fn warmup_rejects_taller_profiles() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run_cmd("warmup", "{}", t.path(), &[]).0, EXIT_USAGE);
}

#[test]
fn blowup_sweep_point() {
    let t = tempfile::tempdir().unwrap();
    let cfg = r#"{"profiles": [], "sweep": [2]}"#;
    let (code, err) = run_cmd("blowup", cfg, t.path(), &[]);
    assert_eq!(code, EXIT_OK, "{}", err);
    let csv = fs::read_to_string(t.path().join("out/blowup.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().starts_with("sweep2,2,1,true,1.000000"));
    assert_eq!(run_cmd("blowup", cfg, t.path(), &["--mode", "exact"]).0, EXIT_USAGE);
}

#[test]
fn counting_and_verify_pass_on_toy_profile() {
    let t = tempfile::tempdir().unwrap();
    let cfg = r#"{"profiles": ["toy_a"], "sweep": [2]}"#;
    let (code, err) = run_cmd("counting", cfg, &t.path().join("c"), &[]);
    assert_eq!(code, EXIT_OK, "{}", err);
    let (code, err) = run_cmd("verify", cfg, &t.path().join("v"), &[]);
    assert_eq!(code, EXIT_OK, "{}", err);
}

#[test]
fn norms_band_on_toy_profile() {
    let t = tempfile::tempdir().unwrap();
    let (code, err) = run_cmd("norms", r#"{"mode": "exact"}"#, t.path(), &[]);
    assert_eq!(code, EXIT_OK, "{}", err);
    let csv = fs::read_to_string(t.path().join("out/band.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn failing_tolerance_gives_exit_two() {
    let t = tempfile::tempdir().unwrap();
    let cfg = r#"{"tolerances": {"recon_spread": 1e-9}}"#;
    let (code, err) = run_cmd("reconstruct", cfg, t.path(), &[]);
    assert_eq!(code, EXIT_FAIL);
    assert!(err.contains("FAIL spread"));
}
