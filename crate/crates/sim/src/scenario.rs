//! A complete simulated run together with its ground truth.
//!
//! Truth is reported in the initial frame, the LIDAR frame at the first
//! scan, which is the frame the odometry integrates in.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use conetrack_core::geometry::{Point3, PointCloud, Pose};
use conetrack_core::odometry::OdometryEstimate;
use conetrack_core::vision::Calibration;

use crate::camera::CameraModel;
use crate::drive::{drive_laps, TruthPose};
use crate::gnss::{gnss_stream, NoiseModel};
use crate::lidar::{sensor_pose, simulate_scan, GroundSurface, LidarModel};
use crate::patch::{PatchKind, PatchSource};
use crate::track::{generate_track, ObjectKind, TrackDefinition, TrackParams, TruthCone};
use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub track: TrackParams,
    pub track_seed: u64,
    pub lidar: LidarModel,
    pub ground: GroundSurface,
    pub camera: CameraModel,
    pub gnss: NoiseModel,
    pub gnss_enabled: bool,
    /// Constant driving speed (m/s).
    pub speed: f64,
    pub laps: f64,
    pub scan_seed: u64,
    /// Scales patch brightness.
    pub lighting: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            track: TrackParams::default(),
            track_seed: 1,
            lidar: LidarModel::default(),
            ground: GroundSurface::default(),
            camera: CameraModel::default(),
            gnss: NoiseModel::default(),
            gnss_enabled: true,
            speed: 5.0,
            laps: 1.0,
            scan_seed: 3,
            lighting: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub track: TrackDefinition,
    pub truth: Vec<TruthPose>,
    initial: Pose,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        config.lidar.validate()?;
        config.camera.validate()?;
        config.gnss.validate()?;
        if !(config.lighting > 0.0) {
            return Err(SimError::InvalidConfig("lighting: must be positive".into()));
        }
        let track = generate_track(&config.track, config.track_seed)?;
        let truth = drive_laps(&track, config.speed, 1.0 / config.lidar.rate_hz, config.laps)?;
        let t0 = truth[0];
        let initial = sensor_pose(t0.position[0], t0.position[1], t0.heading, &config.lidar, &config.ground);
        Ok(Self { config, track, truth, initial })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn stamp(&self, k: usize) -> f64 {
        self.truth[k].stamp
    }

    /// World → sensor pose at scan `k`.
    pub fn world_sensor(&self, k: usize) -> Pose {
        let t = &self.truth[k];
        sensor_pose(t.position[0], t.position[1], t.heading, &self.config.lidar, &self.config.ground)
    }

    /// Initial frame → sensor pose at scan `k`.
    pub fn truth_pose(&self, k: usize) -> Pose {
        self.world_sensor(k).compose(&self.initial.inverse())
    }

    pub fn truth_poses(&self) -> Vec<(f64, Pose)> {
        (0..self.len()).map(|k| (self.stamp(k), self.truth_pose(k))).collect()
    }

    /// Generated on demand; scans are never held in memory together.
    pub fn scan(&self, k: usize) -> PointCloud {
        let c = &self.config;
        simulate_scan(&self.track.objects, &c.ground, &self.world_sensor(k), &c.lidar, self.stamp(k), c.scan_seed, k as u64)
    }

    pub fn gnss(&self) -> Vec<OdometryEstimate> {
        gnss_stream(&self.truth_poses(), &self.config.gnss)
    }

    fn ground_point(&self, xy: Vector2<f64>) -> Point3 {
        Point3::new(xy.x, xy.y, self.config.ground.height(xy.x, xy.y))
    }

    /// Truth cones with positions in the initial frame.
    pub fn truth_cones(&self) -> Vec<TruthCone> {
        self.track
            .cones
            .iter()
            .map(|c| {
                let p = self.initial.from_world(&self.ground_point(Vector2::from(c.position)));
                TruthCone { position: [p.x, p.y], ..*c }
            })
            .collect()
    }

    /// Vehicle positions in the initial frame.
    pub fn truth_trajectory(&self) -> Vec<Vector2<f64>> {
        (0..self.len()).map(|k| self.truth_pose(k).position().xy()).collect()
    }

    /// Ids of cones within `range` of the sensor at scan `k` whose base is
    /// inside the camera image.
    pub fn cones_in_view(&self, k: usize, range: f64) -> Vec<usize> {
        let s = self.world_sensor(k);
        let h = self.config.lidar.mount_height;
        self.track
            .cones
            .iter()
            .filter(|c| {
                let p = s.from_world(&self.ground_point(Vector2::from(c.position)));
                p.coords.xy().norm() <= range && self.config.camera.in_view(&Vector3::new(p.x, p.y, -h), h)
            })
            .map(|c| c.id)
            .collect()
    }

    /// Objects around the sensor at scan `k`, in its frame, for patch rendering.
    pub fn patch_source(&self, k: usize, lighting: f64) -> PatchSource {
        let s = self.world_sensor(k);
        let objects = self
            .track
            .objects
            .iter()
            .map(|o| {
                let p = s.from_world(&self.ground_point(o.center()));
                let kind = match o.kind {
                    ObjectKind::Cone(c) => PatchKind::Cone(c),
                    ObjectKind::TyreStack => PatchKind::TyreStack,
                    ObjectKind::Wall => PatchKind::Wall,
                };
                (p.coords.xy(), kind)
            })
            .collect();
        PatchSource::new(objects, lighting, self.config.scan_seed ^ (k as u64).wrapping_mul(0x2545_F491_4F6C_DD1D))
    }

    pub fn calibration(&self) -> Result<Calibration, SimError> {
        self.config.camera.calibration(self.config.lidar.mount_height)
    }
}
