use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use durations::cli::{analyze_dataset, read_dataset_csv, AnalysisOptions, AnalysisReport};
use durations::inference::round_up_strict;
use durations::{BootstrapConfig, EstimationTarget, Method};

fn durations(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_durations")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn emit_dataset(dir: &Path, scenario: &str, seed: &str) {
    let o = durations(&["scenarios", "--emit", "dataset", "--scenarios", scenario, "--n", "500", "--seed", seed, "--out", "data.csv"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn optima_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = durations(&["scenarios", "--emit", "optima", "--target", "risk-diff:0.10"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let row = |id: &str| text.lines().find(|l| l.starts_with(&format!("{id},"))).unwrap().to_string();
    assert!(row("1").contains(",13.08"), "{}", row("1"));
    assert!(row("4").contains(",8.0000,"), "{}", row("4"));

    let o = durations(&["scenarios", "--emit", "optima", "--target", "max-grad:0.02"], dir.path());
    let text = stdout(&o);
    let row14 = text.lines().find(|l| l.starts_with("14,")).unwrap();
    assert!(row14.contains("not-attained"), "{row14}");
}

#[test]
fn truth_grid_of_twelve_days_has_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let o = durations(&["scenarios", "--emit", "truth", "--grid", "12", "--out", "truth.csv"], dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("truth.csv")).unwrap();
    for id in 1..=16 {
        assert_eq!(text.lines().filter(|l| l.starts_with(&format!("{id},"))).count(), 2);
    }
}

#[test]
fn bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(durations(&["simulate", "--reps", "many"], dir.path()).status.code(), Some(2));
    assert_eq!(durations(&["simulate", "--scenarios", "17"], dir.path()).status.code(), Some(2));
    assert_eq!(durations(&["simulate", "--method", "delta", "--target", "risk-ratio:0.9"], dir.path()).status.code(), Some(2));
    assert_eq!(durations(&["scenarios", "--emit", "everything"], dir.path()).status.code(), Some(2));
}

fn analyze(dir: &Path, method: &str, out: &str) -> (Output, AnalysisReport) {
    let o = durations(&["analyze", "--data", "data.csv", "--method", method, "--target", "risk-diff:0.10", "--boot-m", "200", "--seed", "5", "--out", out], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: AnalysisReport = serde_json::from_str(&fs::read_to_string(dir.join(out).join("report.json")).unwrap()).unwrap();
    (o, report)
}

#[test]
fn analyze_boot_duration_report_is_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    emit_dataset(dir.path(), "1", "42");
    let (o, report) = analyze(dir.path(), "boot-duration", "out");
    let d = report.recommended_duration;
    assert!((8..=20).contains(&d));
    assert_eq!(stdout(&o).trim(), format!("recommended_duration={d}"));
    // Rule: smallest whole day strictly above the CI upper limit.
    assert_eq!(round_up_strict(report.recommendation.ci.1, 8.0, 20.0).0, d);
    assert!(report.is_consistent());

    let curve = fs::read_to_string(dir.path().join("out/curve.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "duration,fitted,lower,upper,threshold,frontier");
    assert_eq!(curve.lines().count(), 1 + 121);
}

#[test]
fn analyze_boot_diff_report_is_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    emit_dataset(dir.path(), "9", "3");
    let (_, report) = analyze(dir.path(), "boot-diff", "out");
    let rows = &report.recommendation.per_duration;
    assert_eq!(rows.len(), 13);
    let first = rows.iter().find(|r| r.upper < r.bound && r.duration < 20).map_or(20, |r| r.duration);
    assert_eq!(report.recommended_duration, first);
}

#[test]
fn analyze_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    emit_dataset(dir.path(), "12", "8");
    analyze(dir.path(), "boot-diff", "a");
    analyze(dir.path(), "boot-diff", "b");
    for f in ["report.json", "curve.csv"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
}

#[test]
fn csv_round_trip_matches_in_memory_analysis() {
    let dir = tempfile::tempdir().unwrap();
    emit_dataset(dir.path(), "1", "11");
    let (_, from_cli) = analyze(dir.path(), "boot-duration", "out");

    let design = durations::TrialDesign::standard();
    let data = durations::generate_dataset(durations::ScenarioId::new(1).unwrap(), &design, durations::RngStream::new(11)).unwrap();
    assert_eq!(read_dataset_csv(&dir.path().join("data.csv"), false).unwrap(), data);
    let opts = AnalysisOptions {
        method: Method::BootDuration,
        target: EstimationTarget::risk_difference(0.10),
        bootstrap: BootstrapConfig { m: 200, ..BootstrapConfig::default() },
        seed: 5,
        frontier: None,
    };
    let in_memory = analyze_dataset(&data, &opts).unwrap();
    assert_eq!(in_memory.recommended_duration, from_cli.recommended_duration);
    let written = fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    assert_eq!(serde_json::to_string_pretty(&in_memory).unwrap() + "\n", written);
}

#[test]
fn negative_duration_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("duration,cure\n");
    for i in 1..=30 {
        let d = if i == 17 { -10 } else { 8 + 2 * (i % 7) };
        text.push_str(&format!("{d},{}\n", i % 2));
    }
    fs::write(dir.path().join("data.csv"), text).unwrap();
    let o = durations(&["analyze", "--data", "data.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 17"), "{}", stderr(&o));
}

#[test]
fn single_arm_is_a_fit_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = std::iter::once("duration,cure\n".to_string()).chain((0..40).map(|i| format!("14,{}\n", i % 2))).collect();
    fs::write(dir.path().join("data.csv"), text).unwrap();
    assert_eq!(durations(&["analyze", "--data", "data.csv"], dir.path()).status.code(), Some(4));
}

#[test]
fn extra_columns_need_lax() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("id,duration,cure\n");
    for i in 0..140 {
        text.push_str(&format!("{i},{},{}\n", 8 + 2 * (i % 7), u8::from(i % 5 != 0)));
    }
    fs::write(dir.path().join("data.csv"), text).unwrap();
    let strict = durations(&["analyze", "--data", "data.csv", "--method", "delta"], dir.path());
    assert_eq!(strict.status.code(), Some(2));
    let lax = durations(&["analyze", "--data", "data.csv", "--method", "delta", "--lax"], dir.path());
    assert!(lax.status.success(), "{}", stderr(&lax));
}

#[test]
fn frontier_overlay_is_written() {
    let dir = tempfile::tempdir().unwrap();
    emit_dataset(dir.path(), "2", "1");
    let o = durations(&["analyze", "--data", "data.csv", "--method", "delta", "--frontier", "8=0.10,18=0.05", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: AnalysisReport = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report.provenance.target, "frontier:8=0.1,18=0.05");
    assert_eq!(report.frontier_overlay.len(), report.curve.len());
    assert!(report.is_consistent());
}

#[test]
fn flat_scenario_simulation_has_zero_type1() {
    let dir = tempfile::tempdir().unwrap();
    let o = durations(&["simulate", "--scenarios", "4", "--method", "boot-duration", "--target", "risk-diff:0.10", "--reps", "50", "--seed", "1", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        &header[..13],
        ["scenario", "method", "target", "reps", "partial_power", "full_power", "type1", "type1_ci_lo", "type1_ci_hi", "true_min_duration", "rec_min", "rec_p2_5", "rec_median"]
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[6], "0.00");
    assert!(dir.path().join("out/summary.json").exists());
    assert!(dir.path().join("out/config.json").exists());
}

#[test]
fn simulate_outputs_are_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["simulate", "--scenarios", "1,9", "--method", "delta,boot-diff", "--reps", "8", "--boot-m", "40", "--seed", "3"];
    let run = |out: &str, workers: &str| {
        let mut args = base.to_vec();
        args.extend(["--workers", workers, "--out", out]);
        let o = durations(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    };
    run("a", "1");
    run("b", "1");
    run("c", "4");
    for f in ["summary.csv", "summary.json", "config.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(dir.path().join("c").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("sim.json"),
        r#"{"scenarios": "4", "method": "delta", "reps": 5, "seed": 9, "target": "risk-diff:0.05"}"#,
    )
    .unwrap();
    let o = durations(&["simulate", "--config", "sim.json", "--reps", "7", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[0], row[1], row[2], row[3]), ("4", "delta", "risk-diff:0.05", "7"));

    fs::write(dir.path().join("bad.json"), r#"{"replicates": 5}"#).unwrap();
    assert_eq!(durations(&["simulate", "--config", "bad.json"], dir.path()).status.code(), Some(2));
}
