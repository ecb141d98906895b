//! Per-scan pipeline: crop, ground split, odometry, accumulation,
//! clustering, camera verification and map update.
//!
//! Stage failures are recorded as diagnostics and the run moves on to the
//! next scan.

use std::collections::BTreeSet;
use std::time::Instant;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use conetrack_core::accumulation::AccumulatorWindow;
use conetrack_core::clustering::{euclidean_cluster, filter_cone_candidates};
use conetrack_core::geometry::{PointCloud, Pose};
use conetrack_core::ground::{crop_roi, fit_ground_ransac, split_ground_obstacles};
use conetrack_core::mapping::{finish_gate, ConeMap, Detection, MissionState, MissionTracker};
use conetrack_core::odometry::{Odometer, OdometryEstimate, SCAN_PERIOD};
use conetrack_core::vision::{verify_candidates, ConeColor};
use conetrack_sim::PatchSource;

use crate::config::PipelineConfig;
use crate::dataset::{object_in_sensor, Sidecar};
use crate::evaluate::{color_hits, evaluate_map, match_points, MapMetrics};
use crate::formats::MapDocument;
use crate::CliError;

pub trait ScanSource {
    fn len(&self) -> usize;
    fn scan(&self, k: usize) -> Result<PointCloud, CliError>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A stage problem at one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub scan: usize,
    pub stamp: Option<f64>,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionRecord {
    pub stamp: f64,
    pub state: MissionState,
    pub loop_closed: bool,
    pub gate_crossings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// Verified cones within range, summed over scans.
    pub detections: usize,
    /// Truth cones within range and in view, summed over scans.
    pub visible: usize,
    /// Detections lying on a truth cone.
    pub true_detections: usize,
    /// Visible cones with a detection.
    pub found: usize,
    pub precision: f64,
    pub recall: f64,
    /// Detections on a truth cone whose colour matches it.
    pub color_correct: usize,
    pub color_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometryMetrics {
    /// Length of the true path (m).
    pub path_length: f64,
    /// Distance between the final estimated and true positions (m).
    pub endpoint_drift: f64,
    pub drift_percent: f64,
    /// Scans whose pose was extrapolated.
    pub gaps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub scans: usize,
    pub gnss_used: bool,
    pub notes: Vec<String>,
    pub lap1_complete: bool,
    pub mission_state: MissionState,
    pub loop_closures: usize,
    pub landmarks: usize,
    pub odometry: OdometryMetrics,
    pub detection: DetectionMetrics,
    pub map: MapMetrics,
    pub diagnostics: usize,
}

/// Wall-clock time per stage (s). Kept apart from the report, which must
/// be reproducible.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub load: f64,
    pub crop: f64,
    pub ground: f64,
    pub odometry: f64,
    pub accumulate: f64,
    pub cluster: f64,
    pub verify: f64,
    pub map: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub map: MapDocument,
    pub odometry: Vec<OdometryEstimate>,
    pub mission: Vec<MissionRecord>,
    pub report: MetricsReport,
    pub diagnostics: Vec<Diagnostic>,
    pub timings: StageTimings,
    /// Verified cones per scan in the vehicle frame.
    pub detections: Vec<Vec<Detection>>,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed().as_secs_f64();
    out
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Nearest GNSS record within one scan period of `stamp`.
fn gnss_at(gnss: &[OdometryEstimate], stamp: f64) -> Option<&OdometryEstimate> {
    let i = gnss.partition_point(|g| g.stamp < stamp);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter_map(|j| gnss.get(j))
        .filter(|g| (g.stamp - stamp).abs() <= SCAN_PERIOD)
        .min_by(|a, b| (a.stamp - stamp).abs().total_cmp(&(b.stamp - stamp).abs()))
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    side: &'a Sidecar,
    diagnostics: Vec<Diagnostic>,
    detection: DetectionMetrics,
}

impl Run<'_> {
    fn diagnose(&mut self, scan: usize, stamp: Option<f64>, stage: &str, message: impl ToString) {
        self.diagnostics.push(Diagnostic { scan, stamp, stage: stage.to_owned(), message: message.to_string() });
    }

    /// Camera frame for scan `k`, rendered from the truth objects.
    fn camera(&self, k: usize) -> Option<PatchSource> {
        let pose = self.side.truth.trajectory.get(k)?.pose;
        let objects = self
            .side
            .truth
            .objects
            .iter()
            .map(|o| (object_in_sensor(o, &pose).xy(), o.kind))
            .collect();
        let seed = self.cfg.simulation.scan_seed ^ (k as u64).wrapping_mul(0x2545_F491_4F6C_DD1D);
        Some(PatchSource::new(objects, self.cfg.simulation.lighting, seed))
    }

    /// Scores one scan's detections against the cones visible in it.
    fn score(&mut self, k: usize, detections: &[Detection]) {
        let (Some(tp), Some(ts)) = (self.side.truth.trajectory.get(k), self.side.truth.scans.get(k)) else {
            return;
        };
        let range = self.cfg.evaluation.detection_range;
        let gate = self.cfg.evaluation.match_gate;
        let cones = &self.side.truth.landmarks;
        let all: Vec<[f64; 2]> = cones.iter().map(|c| c.position).collect();
        let all_colors: Vec<ConeColor> = cones.iter().map(|c| c.color).collect();

        let near: Vec<&Detection> = detections.iter().filter(|d| d.position.coords.xy().norm() <= range).collect();
        let placed: Vec<[f64; 2]> = near
            .iter()
            .map(|d| {
                let w = tp.pose.to_world(&d.position);
                [w.x, w.y]
            })
            .collect();
        let colors: Vec<ConeColor> = near.iter().map(|d| d.color).collect();
        let hits = match_points(&placed, &all, gate);
        self.detection.detections += near.len();
        self.detection.true_detections += hits.len();
        self.detection.color_correct += color_hits(&hits, &colors, &all_colors);

        let visible: BTreeSet<usize> = ts.visible.iter().copied().collect();
        let every: Vec<[f64; 2]> = detections
            .iter()
            .map(|d| {
                let w = tp.pose.to_world(&d.position);
                [w.x, w.y]
            })
            .collect();
        let seen: Vec<[f64; 2]> = cones.iter().filter(|c| visible.contains(&c.id)).map(|c| c.position).collect();
        self.detection.visible += seen.len();
        self.detection.found += match_points(&seen, &every, gate).len();
    }
}

fn path_length(points: &[Vector2<f64>]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Runs every stage over every scan. Fails only on unusable inputs; stage
/// errors become diagnostics.
pub fn run_pipeline(scans: &dyn ScanSource, side: &Sidecar, config: &PipelineConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    if scans.is_empty() {
        return Err(CliError::Stage { stage: "load", message: "dataset has no scans".into() });
    }
    let started = Instant::now();
    let mut cfg = config.clone();
    let mut notes = Vec::new();
    let gnss: &[OdometryEstimate] = match &side.gnss {
        Some(g) if !g.is_empty() => g,
        _ => {
            cfg.odometry.alpha = 0.0;
            notes.push("no GNSS records: odometry runs on LIDAR alone (alpha forced to 0)".to_owned());
            &[]
        }
    };
    let stage = |stage: &'static str| move |e: String| CliError::Stage { stage, message: e };
    let projector = side.calibration.projector().map_err(|e| stage("calibration")(e.to_string()))?;
    side.model.check_hash(&cfg.vision.hog.config_hash()).map_err(|e| stage("svm")(e.to_string()))?;
    let roi = cfg.ground.roi(cfg.simulation.lidar.mount_height)?;
    let ransac = cfg.ground.ransac();
    let mut odometer = Odometer::new(cfg.odometry).map_err(|e| stage("odometry")(e.to_string()))?;
    let mut window = AccumulatorWindow::new(cfg.accumulation.frames).map_err(|e| stage("accumulation")(e.to_string()))?;
    let mut map = ConeMap::new(cfg.mapping.gate).map_err(|e| stage("mapping")(e.to_string()))?;
    let mut tracker = MissionTracker::new(cfg.mapping.loop_closure);

    let mut run = Run {
        cfg: &cfg,
        side,
        diagnostics: Vec::new(),
        detection: DetectionMetrics::default(),
    };
    let mut t = StageTimings::default();
    let mut estimates = Vec::new();
    let mut mission = Vec::new();
    let mut per_scan = Vec::new();
    let mut gaps = 0;
    let mut loop_closures = 0;
    let mut was_closed = false;
    let mut start: Option<Vector2<f64>> = None;

    for k in 0..scans.len() {
        let scan = match timed(&mut t.load, || scans.scan(k)) {
            Ok(s) => s,
            Err(e) => {
                run.diagnose(k, None, "load", e);
                per_scan.push(Vec::new());
                continue;
            }
        };
        let stamp = scan.stamp;

        let step = timed(&mut t.odometry, || odometer.process(&scan, gnss_at(gnss, stamp)));
        let cropped = timed(&mut t.crop, || crop_roi(&scan, &roi));
        let split = timed(&mut t.ground, || {
            fit_ground_ransac(&cropped, &ransac).map(|(plane, _)| split_ground_obstacles(&cropped, &plane, &ransac).1)
        });
        let step = match step {
            Ok(s) => s,
            Err(e) => {
                run.diagnose(k, Some(stamp), "odometry", e);
                per_scan.push(Vec::new());
                continue;
            }
        };
        if let Some(reason) = step.gap {
            gaps += 1;
            run.diagnose(k, Some(stamp), "odometry", format!("pose extrapolated: {reason:?}"));
        }
        let pose: Pose = step.estimate.pose;
        estimates.push(step.estimate);

        let obstacles = split.unwrap_or_else(|e| {
            run.diagnose(k, Some(stamp), "ground", e);
            PointCloud::empty(stamp)
        });
        let accumulated = timed(&mut t.accumulate, || window.push(obstacles, pose).and_then(|_| window.accumulate(&pose)));
        let detections = match accumulated {
            Err(e) => {
                run.diagnose(k, Some(stamp), "accumulation", e);
                Vec::new()
            }
            Ok(cloud) => {
                        let clusters = timed(&mut t.cluster, || {
                    euclidean_cluster(&cloud, &cfg.clustering).map(|c| filter_cone_candidates(c, &cfg.clustering))
                });
                match clusters {
                    Err(e) => {
                        run.diagnose(k, Some(stamp), "clustering", e);
                        Vec::new()
                    }
                    Ok(candidates) => match run.camera(k) {
                        None => {
                            run.diagnose(k, Some(stamp), "verification", "no camera frame for this scan");
                            Vec::new()
                        }
                        Some(camera) => {
                                                let verified = timed(&mut t.verify, || {
                                verify_candidates(&candidates, &camera, &projector, &side.model, &cfg.vision)
                            });
                            match verified {
                                Ok(v) => v
                                    .verified
                                    .iter()
                                    .map(|c| Detection { position: c.position, color: c.color })
                                    .collect(),
                                Err(e) => {
                                    run.diagnose(k, Some(stamp), "verification", e);
                                    Vec::new()
                                }
                            }
                        }
                    },
                }
            }
        };
        run.score(k, &detections);

        timed(&mut t.map, || {
            map.update(stamp, &detections, &pose);
            let position = pose.position().xy();
            let origin = *start.get_or_insert(position);
            let gate = finish_gate(&map);
            let state = tracker.step(position, gate.as_ref());
            let lc = &cfg.mapping.loop_closure;
            let closed = tracker.path_length() >= lc.min_path_length && (position - origin).norm() <= lc.radius;
            if closed && !was_closed {
                loop_closures += 1;
            }
            was_closed = closed;
            mission.push(MissionRecord { stamp, state, loop_closed: closed, gate_crossings: tracker.crossings });
        });
        per_scan.push(detections);
    }

    let truth_path: Vec<Vector2<f64>> = side.truth.trajectory.iter().map(|t| t.pose.position().xy()).collect();
    let path = path_length(&truth_path);
    let endpoint_drift = match (estimates.last(), side.truth.trajectory.last()) {
        (Some(e), Some(t)) => (e.pose.position() - t.pose.position()).norm(),
        _ => 0.0,
    };
    let mut detection = run.detection;
    detection.precision = ratio(detection.true_detections, detection.detections);
    detection.recall = ratio(detection.found, detection.visible);
    detection.color_accuracy = ratio(detection.color_correct, detection.true_detections);

    let map_doc = MapDocument { config_hash: config.hash(), landmarks: map.landmarks.clone(), trajectory: map.trajectory.clone() };
    let map_metrics = evaluate_map(&map_doc, &side.truth, cfg.evaluation.match_gate);
    let report = MetricsReport {
        config_hash: config.hash(),
        scans: scans.len(),
        gnss_used: !gnss.is_empty(),
        notes,
        lap1_complete: tracker.state != MissionState::Lap1Perception,
        mission_state: tracker.state,
        loop_closures,
        landmarks: map.landmarks.len(),
        odometry: OdometryMetrics {
            path_length: path,
            endpoint_drift,
            drift_percent: if path > 0.0 { 100.0 * endpoint_drift / path } else { 0.0 },
            gaps,
        },
        detection,
        map: map_metrics,
        diagnostics: run.diagnostics.len(),
    };
    t.total = started.elapsed().as_secs_f64();
    Ok(RunOutput {
        map: map_doc,
        odometry: estimates,
        mission,
        report,
        diagnostics: run.diagnostics,
        timings: t,
        detections: per_scan,
    })
}
