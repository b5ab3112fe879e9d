use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bnsl::fitting::FitResult;
use bnsl::forms::{FunctionalForm, PowerLawSegment};
use bnsl::simulate::SweepResult;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn bnsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnsl"))
        .args(args)
        .env_remove("BNSL_SEED")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn pow_csv() -> PathBuf {
    fixtures().join("pow.csv")
}

#[test]
fn fit_square_root_fixture() {
    let out = bnsl(&["fit", "--data", path(&pow_csv()), "--form", "m1"]);
    let result: FitResult = serde_json::from_str(&stdout(&out)).unwrap();
    let FunctionalForm::M1 { a, b } = result.form else {
        panic!("{:?}", result.form)
    };
    assert!((a - 2.0).abs() < 1e-8 && (b - 0.5).abs() < 1e-8, "a = {a}, b = {b}");
}

#[test]
fn fit_output_round_trips_exactly() {
    let text = stdout(&bnsl(&["fit", "--data", path(&pow_csv()), "--form", "m3"]));
    let result: FitResult = serde_json::from_str(&text).unwrap();
    assert_eq!(bnsl::json::to_string(&result).unwrap(), text);
}

#[test]
fn missing_data_flag_is_usage_error() {
    let out = bnsl(&["fit", "--form", "m1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_form_is_usage_error() {
    let out = bnsl(&["fit", "--data", path(&pow_csv()), "--form", "m9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn breaks_conflict_with_auto_breaks() {
    let out = bnsl(&[
        "fit",
        "--data",
        path(&pow_csv()),
        "--form",
        "bnsl",
        "--breaks",
        "1",
        "--auto-breaks",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn three_points_cannot_fit_one_break() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("three.csv");
    std::fs::write(&data, "x,y,split\n1,2,train\n2,1.5,train\n4,1.2,train\n").unwrap();
    let out = bnsl(&["fit", "--data", path(&data), "--form", "bnsl", "--breaks", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient data"));
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_file_and_bad_rows_are_data_errors() {
    let out = bnsl(&["fit", "--data", "/nonexistent/series.csv", "--form", "m1"]);
    assert_eq!(out.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("neg.csv");
    std::fs::write(&data, "x,y,split\n1,2,train\n2,-1,train\n4,1,train\n").unwrap();
    let out = bnsl(&["fit", "--data", path(&data), "--form", "m1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"multiStart": "many"}"#).unwrap();
    let out = bnsl(&[
        "fit",
        "--data",
        path(&pow_csv()),
        "--form",
        "m1",
        "--config",
        path(&cfg),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_flag_and_environment_agree() {
    let data = pow_csv();
    let args = ["fit", "--data", path(&data), "--form", "bnsl", "--breaks", "1"];
    let flag = stdout(&bnsl(&[&args[..], &["--seed", "9"]].concat()));
    let env = Command::new(env!("CARGO_BIN_EXE_bnsl"))
        .args(args)
        .env("BNSL_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(flag, stdout(&env));
}

#[test]
fn auto_breaks_prefers_no_break_on_a_power_law() {
    let text = stdout(&bnsl(&[
        "fit",
        "--data",
        path(&pow_csv()),
        "--form",
        "bnsl",
        "--auto-breaks",
        "1",
    ]));
    let result: FitResult = serde_json::from_str(&text).unwrap();
    assert_eq!(result.form.breaks(), 0);
}

#[test]
fn decompose_power_law_gives_one_segment() {
    let text = stdout(&bnsl(&["decompose", "--params", r#"{"a": 0.1, "b": 2, "c0": 0.5}"#]));
    let segments: Vec<PowerLawSegment> = serde_json::from_str(&text).unwrap();
    assert_eq!(segments.len(), 1);
    assert_eq!(segments[0].coefficient, 2.0);
    assert_eq!(segments[0].exponent, -0.5);
}

#[test]
fn decompose_accepts_fit_output() {
    let dir = tempfile::tempdir().unwrap();
    let fit_json = dir.path().join("fit.json");
    let text = stdout(&bnsl(&[
        "fit",
        "--data",
        path(&pow_csv()),
        "--form",
        "bnsl",
        "--breaks",
        "1",
    ]));
    std::fs::write(&fit_json, text).unwrap();
    let segments: Vec<PowerLawSegment> =
        serde_json::from_str(&stdout(&bnsl(&["decompose", "--params", path(&fit_json)]))).unwrap();
    assert_eq!(segments.len(), 2);
}

#[test]
fn decompose_rejects_other_forms_and_bad_params() {
    let out = bnsl(&["decompose", "--params", r#"{"kind": "m1", "a": 1, "b": 2}"#]);
    assert_eq!(out.status.code(), Some(3));
    let out = bnsl(&["decompose", "--params", r#"{"a": 0, "b": -1, "c0": 0.5}"#]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn plot_without_rows_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("empty.csv");
    std::fs::write(&data, "x,y,split\n").unwrap();
    let svg = dir.path().join("out.svg");
    let out = bnsl(&["plot", "--data", path(&data), "--out", path(&svg)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!svg.exists());
}

#[test]
fn plot_draws_points_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let fit_json = dir.path().join("fit.json");
    std::fs::write(
        &fit_json,
        stdout(&bnsl(&["fit", "--data", path(&pow_csv()), "--form", "m1"])),
    )
    .unwrap();
    let svg = dir.path().join("out.svg");
    let out = bnsl(&[
        "plot",
        "--data",
        path(&pow_csv()),
        "--fit",
        path(&fit_json),
        "--out",
        path(&svg),
    ]);
    stdout(&out);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("<polyline"));
    assert_eq!(text.matches("<circle").count(), 12);
}

#[test]
fn plot_rejects_bad_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("out.svg");
    let out = bnsl(&["plot", "--data", path(&pow_csv()), "--out", path(&svg), "--width", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_sweep_result() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"truth": {"a": 0, "b": 2, "c0": 0.5},
            "xGrid": [1, 2, 4, 8, 16, 32, 64],
            "fitMaxCandidates": [4, 64],
            "testRange": {"xLow": 100, "xHigh": 1000, "count": 4}}"#,
    )
    .unwrap();
    let out_path = dir.path().join("sweep.json");
    let out = bnsl(&["simulate", "--spec", path(&spec), "--out", path(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let result: SweepResult = serde_json::from_str(&text).unwrap();
    assert_eq!(result.per_threshold.len(), 2);
    assert_eq!(result.minimal_successful_t, Some(4.0));
    assert_eq!(bnsl::json::to_string(&result).unwrap(), text);
}

#[test]
fn simulate_rejects_probes_inside_fit_range() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"truth": {"a": 0, "b": 2, "c0": 0.5}, "xGrid": [1, 2, 4, 8],
            "fitMaxCandidates": [8], "testRange": {"xLow": 5, "xHigh": 10, "count": 2}}"#,
    )
    .unwrap();
    let out = bnsl(&[
        "simulate",
        "--spec",
        path(&spec),
        "--out",
        path(&dir.path().join("o.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn empty_manifest_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    std::fs::write(&manifest, r#"{"tasks": []}"#).unwrap();
    let out = bnsl(&[
        "bench",
        "--manifest",
        path(&manifest),
        "--out",
        path(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_writes_reports_for_selected_forms() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    std::fs::write(
        &manifest,
        format!(
            r#"{{"tasks": [{{"name": "sqrt law", "domain": "demo", "path": "{}"}}]}}"#,
            path(&pow_csv())
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bnsl(&[
        "bench",
        "--manifest",
        path(&manifest),
        "--out",
        path(&out_dir),
        "--forms",
        "m1,m2",
    ]);
    let summary = stdout(&out);
    assert!(summary.contains("\"demo\""));
    let report = std::fs::read_to_string(out_dir.join("sqrt_law.json")).unwrap();
    assert!(report.contains("\"m1\"") && !report.contains("\"bnsl\""));
    let table = std::fs::read_to_string(out_dir.join("table.md")).unwrap();
    assert!(table.starts_with("| Task | M1 | M2 | M3 | M4 | BNSL |"));
    let md = std::fs::read_to_string(out_dir.join("summary.md")).unwrap();
    assert!(md.contains("| demo | 1 |"));
}

#[test]
fn bench_with_missing_task_file_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    std::fs::write(
        &manifest,
        r#"{"tasks": [{"name": "gone", "domain": "x", "path": "gone.csv"}]}"#,
    )
    .unwrap();
    let out = bnsl(&[
        "bench",
        "--manifest",
        path(&manifest),
        "--out",
        path(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
