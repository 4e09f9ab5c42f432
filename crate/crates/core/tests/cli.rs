use std::path::Path;
use std::process::{Command, Output};

use phev_sim::config;
use phev_sim::cycle::CycleStats;
use phev_sim::sim::Summary;
use tempfile::TempDir;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phev-sim"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn simulate_outputs_round_trip() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let trace = config::trace_from_csv(&read(dir.path(), "trace.csv")).unwrap();
    let summary = config::summary_from_json(&read(dir.path(), "summary.json")).unwrap();
    assert_eq!(trace.len(), 1800);
    assert_eq!(summary.cycle, "WLTC");
    assert!((summary.final_soc - trace.last().unwrap().soc).abs() < 1e-9);
    assert!(stdout(&o).contains("WLTC"));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["--seed", "7", "simulate", "--cycle", "tehran3"];
    let (oa, ob) = (run(a.path(), &args), run(b.path(), &args));
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert_eq!(oa.stdout, ob.stdout);
    for f in ["trace.csv", "summary.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn missing_cycle_file_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["simulate", "--cycle", "no/such/cycle.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no/such/cycle.csv"), "{}", stderr(&o));
}

#[test]
fn empty_cycle_file_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("empty.csv");
    std::fs::write(&path, "").unwrap();
    let o = run(dir.path(), &["stats", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn unknown_set_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["--set", "vehicle.wings=2", "simulate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("vehicle.wings"), "{}", stderr(&o));
}

#[test]
fn stats_of_the_reference_cycle() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["stats", "wltc"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s: CycleStats = serde_json::from_str(&read(dir.path(), "stats.json")).unwrap();
    assert!((s.total_distance - 23266.0).abs() / 23266.0 < 0.01);
    assert!((s.avg_speed - 46.5).abs() < 0.5);
    assert!((s.max_speed - 131.3).abs() < 0.5);
    assert_eq!(s.total_time, 1800.0);
}

#[test]
fn stop_threshold_moves_stop_time() {
    let dir = TempDir::new().unwrap();
    let stop_time = |extra: &[&str]| {
        let mut args = extra.to_vec();
        args.extend(["stats", "wltc"]);
        assert_eq!(run(dir.path(), &args).status.code(), Some(0));
        serde_json::from_str::<CycleStats>(&read(dir.path(), "stats.json")).unwrap().stop_time
    };
    assert!(stop_time(&["--stop-threshold", "2"]) > stop_time(&[]));
}

#[test]
fn sweep_keeps_the_given_order() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["--set", "predictor.kind=off", "sweep", "--init-soc", "90,70,50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<Summary> = serde_json::from_str(&read(dir.path(), "sweep.json")).unwrap();
    let socs: Vec<f64> = rows.iter().map(|s| s.init_soc).collect();
    assert_eq!(socs, [90.0, 70.0, 50.0]);
    assert_eq!(read(dir.path(), "sweep.csv").lines().count(), 4);
}

#[test]
fn sweep_needs_exactly_one_parameter() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["sweep"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["sweep", "--soh", "100", "--init-soc", "90"]).status.code(), Some(1));
}

#[test]
fn synth_writes_a_route() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["--seed", "4", "synth", "--route", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("tehran2.csv").exists());
}

#[test]
fn train_reports_fit() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["--seed", "3", "train"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("R2 test"));
    let model: serde_json::Value = serde_json::from_str(&read(dir.path(), "model.json")).unwrap();
    assert!(model.is_object());
    assert!(read(dir.path(), "predictions.csv").starts_with("source,start,split,label,predicted"));
}

#[test]
fn range_prints_kilometres() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["range"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains(" km"), "{}", stdout(&o));
    let r: serde_json::Value = serde_json::from_str(&read(dir.path(), "range.json")).unwrap();
    assert!(r["range_km"].as_f64().unwrap() > 0.0);
}

#[test]
fn saturation_above_threshold_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &[
            "--set",
            "scenario.forced_mode=EV",
            "--set",
            "battery.pack.n_parallel=1",
            "--set",
            "scenario.init_soc=30",
            "--set",
            "predictor.kind=off",
            "simulate",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("saturated"));
}

#[test]
fn help_and_version_succeed() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["--version"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
}
