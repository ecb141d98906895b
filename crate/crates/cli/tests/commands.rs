use std::fs;
use std::path::Path;
use std::process::Command;

use conetrack_cli::commands::{cmd_evaluate, cmd_export_map, cmd_run, cmd_simulate, MAP, ODOMETRY, REPORT};
use conetrack_cli::dataset::{scan_file, DiskDataset, SimulatedDataset, GNSS, TRUTH};
use conetrack_cli::formats::{
    from_json, poses_from_text, poses_to_text, scan_from_text, scan_to_text, to_json, Manifest, MapDocument,
    TruthDocument, MANIFEST,
};
use conetrack_cli::pipeline::ScanSource;
use conetrack_cli::{run_pipeline, CliError, PipelineConfig};
use conetrack_core::mapping::MidlineConfig;
use conetrack_sim::TrackShape;

/// A few seconds of driving, enough to exercise every stage.
fn short_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default().with_seed(seed);
    cfg.simulation.laps = 0.05;
    cfg
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap()
}

#[test]
fn simulating_twice_writes_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_config(5);
    let a = cmd_simulate(&cfg, &tmp.path().join("a")).unwrap();
    let b = cmd_simulate(&cfg, &tmp.path().join("b")).unwrap();
    assert_eq!(a, b);
    assert!(a.scans.len() >= 15);
    for entry in &a.files {
        assert_eq!(fs::read(tmp.path().join("a").join(&entry.path)).unwrap(), fs::read(tmp.path().join("b").join(&entry.path)).unwrap());
    }
    assert_eq!(read(&tmp.path().join("a"), MANIFEST), read(&tmp.path().join("b"), MANIFEST));
}

#[test]
fn scans_are_spaced_at_ten_hertz() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    let manifest = cmd_simulate(&short_config(6), &dir).unwrap();
    let stamps: Vec<f64> =
        manifest.scans.iter().map(|rel| scan_from_text(&read(&dir, rel), rel).unwrap().stamp).collect();
    for w in stamps.windows(2) {
        assert!((w[1] - w[0] - 0.1).abs() < 1e-9, "{w:?}");
    }
    assert_eq!(manifest.config_hash, short_config(6).hash());
}

#[test]
fn infeasible_track_names_the_parameter() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = short_config(1);
    cfg.simulation.track.shape = TrackShape::Circle { radius: 3.0 };
    let err = cmd_simulate(&cfg, tmp.path()).unwrap_err();
    assert!(matches!(&err, CliError::InvalidConfig(m) if m.contains("radius")), "{err}");
    assert_eq!(err.kind(), "invalid_config");
}

#[test]
fn empty_dataset_directory_is_a_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    let err = cmd_run(tmp.path(), None, &tmp.path().join("out")).err().unwrap();
    assert!(matches!(&err, CliError::MissingFile(p) if p.ends_with(MANIFEST)), "{err}");
}

#[test]
fn tampered_scan_fails_its_digest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    cmd_simulate(&short_config(2), &dir).unwrap();
    let rel = scan_file(3);
    let text = read(&dir, &rel).replacen("stamp", "stamp ", 1);
    fs::write(dir.join(&rel), text).unwrap();
    let ds = DiskDataset::open(&dir).unwrap();
    assert!(ds.scan(3).is_err());
    assert!(ds.scan(2).is_ok());
}

#[test]
fn removing_gnss_forces_lidar_only_odometry() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    cmd_simulate(&short_config(3), &dir).unwrap();
    fs::remove_file(dir.join(GNSS)).unwrap();
    let report = cmd_run(&dir, None, &tmp.path().join("out")).unwrap();
    assert!(!report.gnss_used);
    assert!(report.notes.iter().any(|n| n.contains("alpha forced to 0")), "{:?}", report.notes);
    let poses = poses_from_text(&read(&tmp.path().join("out"), ODOMETRY), ODOMETRY).unwrap();
    assert!(poses.iter().all(|p| p.source.as_str() == "lidar"));
}

#[test]
fn disk_and_memory_runs_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_config(4);
    let dir = tmp.path().join("data");
    cmd_simulate(&cfg, &dir).unwrap();
    let disk = cmd_run(&dir, None, &tmp.path().join("out")).unwrap();
    let ds = SimulatedDataset::new(&cfg).unwrap();
    let memory = run_pipeline(&ds, &ds.sidecar, &cfg).unwrap();
    assert_eq!(to_json(&disk), to_json(&memory.report));
    assert_eq!(read(&tmp.path().join("out"), MAP), to_json(&memory.map));
}

#[test]
fn written_files_reserialize_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    let out = tmp.path().join("out");
    cmd_simulate(&short_config(8), &dir).unwrap();
    cmd_run(&dir, None, &out).unwrap();

    let rel = scan_file(0);
    let scan = read(&dir, &rel);
    assert_eq!(scan_to_text(&scan_from_text(&scan, &rel).unwrap()), scan);
    let gnss = read(&dir, GNSS);
    assert_eq!(poses_to_text(&poses_from_text(&gnss, GNSS).unwrap()), gnss);
    let truth = read(&dir, TRUTH);
    assert_eq!(to_json(&from_json::<TruthDocument>(&truth, TRUTH).unwrap()), truth);
    let manifest = read(&dir, MANIFEST);
    assert_eq!(to_json(&from_json::<Manifest>(&manifest, MANIFEST).unwrap()), manifest);
    let map = read(&out, MAP);
    assert_eq!(to_json(&from_json::<MapDocument>(&map, MAP).unwrap()), map);
    let odometry = read(&out, ODOMETRY);
    assert_eq!(poses_to_text(&poses_from_text(&odometry, ODOMETRY).unwrap()), odometry);
}

#[test]
fn truth_evaluated_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    cmd_simulate(&short_config(9), &dir).unwrap();
    let truth: TruthDocument = from_json(&read(&dir, TRUTH), TRUTH).unwrap();
    let map = MapDocument {
        config_hash: truth.config_hash.clone(),
        landmarks: truth
            .landmarks
            .iter()
            .map(|c| conetrack_core::mapping::Landmark { position: c.position, color: c.color, count: 1, votes: [0; 4] })
            .collect(),
        trajectory: truth.trajectory.clone(),
    };
    let path = tmp.path().join("map.json");
    fs::write(&path, to_json(&map)).unwrap();
    let m = cmd_evaluate(&path, &dir.join(TRUTH), 1.0).unwrap();
    assert_eq!((m.precision, m.recall, m.rmse, m.color_accuracy), (1.0, 1.0, 0.0, 1.0));

    let csv = tmp.path().join("csv");
    cmd_export_map(&path, &MidlineConfig::default(), &csv).unwrap();
    let landmarks = read(&csv, "landmarks.csv");
    assert_eq!(landmarks.lines().count(), truth.landmarks.len() + 1);
    assert!(read(&csv, "midline.csv").lines().count() > 10);
}

#[test]
fn unparsable_map_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("map.json");
    fs::write(&path, "{ \"landmarks\": [").unwrap();
    let err = cmd_evaluate(&path, &path, 1.0).unwrap_err();
    assert_eq!(err.kind(), "parse_error");
}

#[test]
fn default_loop_completes_the_first_lap() {
    let cfg = PipelineConfig::default();
    let ds = SimulatedDataset::new(&cfg).unwrap();
    let run = run_pipeline(&ds, &ds.sidecar, &cfg).unwrap();
    assert!(run.report.lap1_complete);
    // feature-poor stretches may leave a scan or two on an extrapolated pose
    assert!(run.diagnostics.iter().all(|d| d.stage == "odometry"), "{:?}", run.diagnostics);
    assert!(run.diagnostics.len() * 100 <= ds.len(), "{:?}", run.diagnostics);
    assert_eq!(run.report.scans, ds.len());
}

fn conetrack(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_conetrack")).args(args).output().unwrap()
}

#[test]
fn binary_runs_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_owned();
    let mut cfg = short_config(0);
    cfg.simulation.laps = 0.03;
    fs::write(p("config.toml"), cfg.to_toml()).unwrap();

    let sim = conetrack(&["simulate", "--config", &p("config.toml"), "--seed", "12", "--out", &p("data")]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let run = conetrack(&["run", "--dataset", &p("data"), "--out", &p("run")]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report, serde_json::from_str::<serde_json::Value>(&read(&tmp.path().join("run"), REPORT)).unwrap());

    let map = tmp.path().join("run").join(MAP);
    let eval = conetrack(&["evaluate", "--map", map.to_str().unwrap(), "--dataset", &p("data"), "--out", &p("eval")]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(tmp.path().join("eval/evaluation.json").exists());

    // too few cones for a midline is an error record, not a crash
    let export = conetrack(&["export-map", "--map", map.to_str().unwrap(), "--out", &p("csv")]);
    if !export.status.success() {
        let record: serde_json::Value = serde_json::from_slice(&export.stderr).unwrap();
        assert_eq!(record["error"], "stage_error");
    }
    assert!(tmp.path().join("csv/landmarks.csv").exists());
}

#[test]
fn binary_failures_emit_one_json_record() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = conetrack(&["run", "--dataset", tmp.path().to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!missing.status.success());
    let record: serde_json::Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert_eq!(record["error"], "missing_file");

    let config = tmp.path().join("bad.toml");
    fs::write(&config, "[simulation]\nbogus = 1\n").unwrap();
    let bad = conetrack(&["simulate", "--config", config.to_str().unwrap(), "--out", tmp.path().join("d").to_str().unwrap()]);
    assert!(!bad.status.success());
    let record: serde_json::Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(record["error"], "invalid_config");
    assert!(record["message"].as_str().unwrap().contains("bogus"));
}
