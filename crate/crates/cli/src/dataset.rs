//! Datasets: simulated in memory, or read back from a directory.
//!
//! Layout of a dataset directory:
//!
//! ```text
//! manifest.json        file list with digests and the config hash
//! config.toml          configuration the dataset was simulated with
//! scans/scan_NNNNNN.txt
//! gnss.txt             optional GNSS-INS pose records
//! truth.json           ground truth in the initial frame
//! calibration.txt      camera/ground homography pairs
//! svm.txt              cone classifier
//! ```

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rayon::prelude::*;

use conetrack_core::geometry::{Point3, PointCloud};
use conetrack_core::mapping::TrajectoryPoint;
use conetrack_core::odometry::OdometryEstimate;
use conetrack_core::vision::{Calibration, SvmModel};
use conetrack_sim::track::ObjectKind;
use conetrack_sim::{train_reference_model, PatchKind, Scenario};

use crate::config::PipelineConfig;
use crate::formats::{
    self, poses_from_text, poses_to_text, scan_from_text, scan_to_text, to_json, Manifest, TruthDocument,
    TruthObject, TruthScan, MANIFEST,
};
use crate::pipeline::ScanSource;
use crate::CliError;

pub const CONFIG: &str = "config.toml";
pub const GNSS: &str = "gnss.txt";
pub const TRUTH: &str = "truth.json";
pub const CALIBRATION: &str = "calibration.txt";
pub const SVM: &str = "svm.txt";

pub fn scan_file(k: usize) -> String {
    format!("scans/scan_{k:06}.txt")
}

/// Everything the pipeline consumes besides the scans.
#[derive(Debug, Clone)]
pub struct Sidecar {
    pub truth: TruthDocument,
    pub calibration: Calibration,
    pub model: SvmModel,
    pub gnss: Option<Vec<OdometryEstimate>>,
}

fn truth_document(sc: &Scenario, cfg: &PipelineConfig) -> TruthDocument {
    let initial = sc.world_sensor(0);
    let ground = &sc.config.ground;
    let objects = sc
        .track
        .objects
        .iter()
        .map(|o| {
            let c = o.center();
            let p = initial.from_world(&Point3::new(c.x, c.y, ground.height(c.x, c.y)));
            let kind = match o.kind {
                ObjectKind::Cone(color) => PatchKind::Cone(color),
                ObjectKind::TyreStack => PatchKind::TyreStack,
                ObjectKind::Wall => PatchKind::Wall,
            };
            TruthObject { kind, position: [p.x, p.y, p.z] }
        })
        .collect();
    let range = cfg.evaluation.detection_range;
    let scans: Vec<TruthScan> =
        (0..sc.len()).map(|k| TruthScan { stamp: sc.stamp(k), visible: sc.cones_in_view(k, range) }).collect();
    let mut observed: Vec<usize> = scans.iter().flat_map(|s| s.visible.iter().copied()).collect();
    observed.sort_unstable();
    observed.dedup();
    TruthDocument {
        config_hash: cfg.hash(),
        landmarks: sc.truth_cones(),
        objects,
        trajectory: sc.truth_poses().into_iter().map(|(stamp, pose)| TrajectoryPoint { stamp, pose }).collect(),
        scans,
        observed,
    }
}

/// A dataset generated from a configuration, scans produced on demand.
pub struct SimulatedDataset {
    pub config: PipelineConfig,
    pub scenario: Scenario,
    pub sidecar: Sidecar,
}

impl SimulatedDataset {
    pub fn new(config: &PipelineConfig) -> Result<Self, CliError> {
        config.validate()?;
        let scenario = Scenario::new(config.simulation.clone())?;
        let model = train_reference_model(&config.vision.hog, &config.training)
            .map_err(|e| CliError::Stage { stage: "training", message: e.to_string() })?;
        let calibration = scenario.calibration()?;
        let gnss = config.simulation.gnss_enabled.then(|| scenario.gnss());
        let truth = truth_document(&scenario, config);
        Ok(Self { config: config.clone(), scenario, sidecar: Sidecar { truth, calibration, model, gnss } })
    }

    /// Writes the dataset under `dir` and returns its manifest.
    pub fn write(&self, dir: &Path) -> Result<Manifest, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut files = vec![
            formats::write_entry(dir, CONFIG, &self.config.to_toml())?,
            formats::write_entry(dir, TRUTH, &to_json(&self.sidecar.truth))?,
            formats::write_entry(dir, CALIBRATION, &self.sidecar.calibration.to_text())?,
            formats::write_entry(dir, SVM, &self.sidecar.model.to_text())?,
        ];
        if let Some(g) = &self.sidecar.gnss {
            files.push(formats::write_entry(dir, GNSS, &poses_to_text(g))?);
        }
        let scans: Vec<String> = (0..self.scenario.len()).map(scan_file).collect();
        let entries = scans
            .par_iter()
            .enumerate()
            .map(|(k, rel)| formats::write_entry(dir, rel, &scan_to_text(&self.scenario.scan(k))))
            .collect::<Result<Vec<_>, _>>()?;
        files.extend(entries);
        let manifest = Manifest { config_hash: self.config.hash(), scans, files };
        formats::write_text(&dir.join(MANIFEST), &to_json(&manifest))?;
        Ok(manifest)
    }
}

impl ScanSource for SimulatedDataset {
    fn len(&self) -> usize {
        self.scenario.len()
    }

    /// Scans pass through the file precision so in-memory runs match runs
    /// over the written dataset.
    fn scan(&self, k: usize) -> Result<PointCloud, CliError> {
        Ok(formats::quantize_scan(&self.scenario.scan(k)))
    }
}

/// A dataset directory written by [`SimulatedDataset::write`].
pub struct DiskDataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub config: PipelineConfig,
    pub sidecar: Sidecar,
}

impl DiskDataset {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let manifest = Manifest::load(dir)?;
        let config = PipelineConfig::from_toml(&manifest.read(dir, CONFIG)?)?;
        let truth = formats::from_json(&manifest.read(dir, TRUTH)?, TRUTH)?;
        let calibration = Calibration::from_text(&manifest.read(dir, CALIBRATION)?)
            .map_err(|e| CliError::Parse { file: CALIBRATION.into(), line: 0, message: e.to_string() })?;
        let model = SvmModel::from_text(&manifest.read(dir, SVM)?)
            .map_err(|e| CliError::Parse { file: SVM.into(), line: 0, message: e.to_string() })?;
        let gnss = match manifest.read(dir, GNSS) {
            Ok(text) => Some(poses_from_text(&text, GNSS)?),
            Err(CliError::MissingFile(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { dir: dir.to_owned(), manifest, config, sidecar: Sidecar { truth, calibration, model, gnss } })
    }
}

impl ScanSource for DiskDataset {
    fn len(&self) -> usize {
        self.manifest.scans.len()
    }

    fn scan(&self, k: usize) -> Result<PointCloud, CliError> {
        let rel = &self.manifest.scans[k];
        scan_from_text(&self.manifest.read(&self.dir, rel)?, rel)
    }
}

/// Position of a truth object in a scan's sensor frame.
pub fn object_in_sensor(o: &TruthObject, pose: &conetrack_core::geometry::Pose) -> Vector3<f64> {
    pose.from_world(&Point3::from(o.position)).coords
}
