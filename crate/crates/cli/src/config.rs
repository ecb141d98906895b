//! Pipeline configuration: every tunable of the simulator and the pipeline
//! stages in one TOML document.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use conetrack_core::accumulation::AccumulationConfig;
use conetrack_core::clustering::ClusterConfig;
use conetrack_core::ground::{ErrorMetric, HeightAxis, RansacConfig, RoiBox};
use conetrack_core::mapping::{LoopClosureConfig, MidlineConfig};
use conetrack_core::odometry::OdometryConfig;
use conetrack_core::vision::VisionConfig;
use conetrack_sim::{ScenarioConfig, TrainingConfig};

use crate::CliError;

/// Box kept around the sensor before ground fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropConfig {
    /// Half side of the square footprint (m).
    pub half_extent: f64,
    /// Depth kept under the nominal ground (m).
    pub below: f64,
    /// Height kept over the nominal ground (m).
    pub above: f64,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self { half_extent: 10.0, below: 0.5, above: 1.0 }
    }
}

/// Ground fit of the pipeline. Height is always the sensor's z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStage {
    pub crop: CropConfig,
    pub iterations: usize,
    /// Inlier distance (m).
    pub tau: f64,
    pub seed: u64,
    pub max_tilt_deg: f64,
    pub metric: ErrorMetric,
}

impl Default for GroundStage {
    fn default() -> Self {
        let r = RansacConfig::default();
        Self {
            crop: CropConfig::default(),
            iterations: r.iterations,
            tau: r.tau,
            seed: r.seed,
            max_tilt_deg: r.max_tilt_deg,
            metric: r.metric,
        }
    }
}

impl GroundStage {
    pub fn ransac(&self) -> RansacConfig {
        RansacConfig {
            iterations: self.iterations,
            tau: self.tau,
            seed: self.seed,
            height_axis: HeightAxis::Z,
            metric: self.metric,
            max_tilt_deg: self.max_tilt_deg,
        }
    }

    /// Crop box for a sensor mounted `mount_height` over the ground.
    pub fn roi(&self, mount_height: f64) -> Result<RoiBox, CliError> {
        let c = &self.crop;
        RoiBox::around_sensor(HeightAxis::Z, c.half_extent, -mount_height, c.below, c.above)
            .map_err(|e| CliError::InvalidConfig(format!("ground.crop: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingStage {
    /// Landmark association gate (m).
    pub gate: f64,
    pub loop_closure: LoopClosureConfig,
    pub midline: MidlineConfig,
}

impl Default for MappingStage {
    fn default() -> Self {
        Self { gate: 0.5, loop_closure: LoopClosureConfig::default(), midline: MidlineConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Largest landmark-to-truth distance counted as a match (m).
    pub match_gate: f64,
    /// Per-scan detection scoring only counts cones this close (m).
    pub detection_range: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { match_gate: 1.0, detection_range: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub simulation: ScenarioConfig,
    pub training: TrainingConfig,
    pub ground: GroundStage,
    pub odometry: OdometryConfig,
    pub accumulation: AccumulationConfig,
    pub clustering: ClusterConfig,
    pub vision: VisionConfig,
    pub mapping: MappingStage,
    pub evaluation: EvaluationConfig,
}

fn invalid(section: &str, e: impl std::fmt::Display) -> CliError {
    CliError::InvalidConfig(format!("{section}: {e}"))
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::InvalidConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        Self::from_toml(&crate::formats::read_text(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Derives every seed from one number.
    pub fn with_seed(mut self, seed: u64) -> Self {
        let s = &mut self.simulation;
        s.track_seed = seed;
        s.scan_seed = seed.wrapping_add(1);
        s.gnss.seed = seed.wrapping_add(2);
        self.training.seed = seed.wrapping_add(3);
        self.ground.seed = seed.wrapping_add(4);
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.simulation;
        s.lidar.validate().map_err(|e| invalid("simulation.lidar", e))?;
        s.camera.validate().map_err(|e| invalid("simulation.camera", e))?;
        s.gnss.validate().map_err(|e| invalid("simulation.gnss", e))?;
        if !(s.speed >= 0.0) {
            return Err(invalid("simulation.speed", "must be non-negative"));
        }
        if !(s.laps > 0.0) {
            return Err(invalid("simulation.laps", "must be positive"));
        }
        if !(s.lighting > 0.0) {
            return Err(invalid("simulation.lighting", "must be positive"));
        }
        let t = &self.training;
        if !(t.lambda > 0.0) || t.epochs == 0 || t.ranges.is_empty() || t.lightings.is_empty() {
            return Err(invalid("training", "needs positive lambda, epochs, ranges and lightings"));
        }
        self.ground.ransac().validate().map_err(|e| invalid("ground", e))?;
        self.ground.roi(s.lidar.mount_height)?;
        self.odometry.validate().map_err(|e| invalid("odometry", e))?;
        if self.accumulation.frames == 0 {
            return Err(invalid("accumulation.frames", "must be at least 1"));
        }
        self.clustering.validate().map_err(|e| invalid("clustering", e))?;
        self.vision.hog.validate().map_err(|e| invalid("vision.hog", e))?;
        let d = &self.vision.cone;
        if !(d.width > 0.0 && d.height > 0.0 && d.padding >= 0.0) {
            return Err(invalid("vision.cone", "sizes must be positive"));
        }
        let m = &self.mapping;
        if !(m.gate > 0.0) {
            return Err(invalid("mapping.gate", "must be positive"));
        }
        if !(m.loop_closure.radius > 0.0 && m.loop_closure.min_path_length >= 0.0) {
            return Err(invalid("mapping.loop_closure", "radius must be positive"));
        }
        if !(m.midline.pairing_gate > 0.0) {
            return Err(invalid("mapping.midline.pairing_gate", "must be positive"));
        }
        let e = &self.evaluation;
        if !(e.match_gate > 0.0 && e.detection_range > 0.0) {
            return Err(invalid("evaluation", "gates must be positive"));
        }
        Ok(())
    }
}
