//! The four subcommands as library functions.

use std::path::Path;

use conetrack_core::mapping::{generate_midline, ConeMap, MidlineConfig};

use crate::config::PipelineConfig;
use crate::dataset::{DiskDataset, SimulatedDataset, TRUTH};
use crate::evaluate::{evaluate_map, MapMetrics};
use crate::formats::{self, load_json, poses_to_text, to_json, Manifest, MapDocument, TruthDocument, MANIFEST};
use crate::pipeline::{run_pipeline, MetricsReport, MissionRecord, RunOutput};
use crate::CliError;

pub const MAP: &str = "map.json";
pub const ODOMETRY: &str = "odometry.txt";
pub const MISSION: &str = "mission.txt";
pub const REPORT: &str = "report.json";
pub const DIAGNOSTICS: &str = "diagnostics.json";
pub const TIMINGS: &str = "timings.json";

/// Simulates a dataset into `out`.
pub fn cmd_simulate(config: &PipelineConfig, out: &Path) -> Result<Manifest, CliError> {
    SimulatedDataset::new(config)?.write(out)
}

pub fn mission_to_text(records: &[MissionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let state = serde_json::to_value(r.state).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        s.push_str(&format!("{:?} {} {} {}\n", r.stamp, state, r.loop_closed as u8, r.gate_crossings));
    }
    s
}

/// Writes the run outputs and a manifest of the reproducible ones.
/// Timings vary between runs and are left out of the manifest.
pub fn write_run(run: &RunOutput, out: &Path) -> Result<Manifest, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let files = vec![
        formats::write_entry(out, MAP, &to_json(&run.map))?,
        formats::write_entry(out, ODOMETRY, &poses_to_text(&run.odometry))?,
        formats::write_entry(out, MISSION, &mission_to_text(&run.mission))?,
        formats::write_entry(out, REPORT, &to_json(&run.report))?,
        formats::write_entry(out, DIAGNOSTICS, &to_json(&run.diagnostics))?,
    ];
    formats::write_text(&out.join(TIMINGS), &to_json(&run.timings))?;
    let manifest = Manifest { config_hash: run.report.config_hash.clone(), scans: Vec::new(), files };
    formats::write_text(&out.join(MANIFEST), &to_json(&manifest))?;
    Ok(manifest)
}

/// Runs the pipeline over a dataset directory. Without a configuration
/// the one stored with the dataset is used.
pub fn cmd_run(dataset: &Path, config: Option<&PipelineConfig>, out: &Path) -> Result<MetricsReport, CliError> {
    let ds = DiskDataset::open(dataset)?;
    let cfg = config.unwrap_or(&ds.config);
    let run = run_pipeline(&ds, &ds.sidecar, cfg)?;
    write_run(&run, out)?;
    Ok(run.report)
}

pub fn cmd_evaluate(map: &Path, truth: &Path, gate: f64) -> Result<MapMetrics, CliError> {
    let map: MapDocument = load_json(map)?;
    let truth: TruthDocument = load_json(truth)?;
    Ok(evaluate_map(&map, &truth, gate))
}

/// The truth file of a dataset directory.
pub fn truth_path(dataset: &Path) -> std::path::PathBuf {
    dataset.join(TRUTH)
}

/// Writes `landmarks.csv` and, when the map has enough boundary cones,
/// `midline.csv`. Returns the number of midline waypoints.
pub fn cmd_export_map(map: &Path, midline: &MidlineConfig, out: &Path) -> Result<usize, CliError> {
    let doc: MapDocument = load_json(map)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut csv = String::from("id,x,y,color,count\n");
    for (i, l) in doc.landmarks.iter().enumerate() {
        csv.push_str(&format!("{i},{:?},{:?},{},{}\n", l.position[0], l.position[1], l.color.as_str(), l.count));
    }
    formats::write_text(&out.join("landmarks.csv"), &csv)?;

    let cone_map = ConeMap { gate: 1.0, landmarks: doc.landmarks, trajectory: doc.trajectory };
    let line = generate_midline(&cone_map, midline).map_err(|e| CliError::Stage { stage: "midline", message: e.to_string() })?;
    let mut csv = String::from("index,x,y,red,blue\n");
    for (i, w) in line.waypoints.iter().enumerate() {
        csv.push_str(&format!("{i},{:?},{:?},{},{}\n", w.position[0], w.position[1], w.red, w.blue));
    }
    formats::write_text(&out.join("midline.csv"), &csv)?;
    Ok(line.waypoints.len())
}
