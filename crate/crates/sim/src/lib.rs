//! Deterministic synthetic world for exercising the cone-track pipeline.
//! Tracks are generated procedurally and sensed by a ray-cast 16-ring LIDAR,
//! with noisy GNSS-INS poses and rendered camera patches alongside.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod drive;
pub mod gnss;
pub mod lidar;
pub mod patch;
pub mod scenario;
pub mod track;
pub mod training;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("infeasible track parameters: {0}")]
    InfeasibleParams(String),
    #[error("invalid simulator configuration: {0}")]
    InvalidConfig(String),
}

pub use camera::CameraModel;
pub use drive::{drive, drive_laps, TruthPose};
pub use gnss::{gnss_stream, simulate_gnss, NoiseModel};
pub use lidar::{sensor_pose, simulate_scan, GroundSurface, LidarModel};
pub use patch::{render_cone_patch, render_patch, PatchKind, PatchSource};
pub use scenario::{Scenario, ScenarioConfig};
pub use track::{generate_track, Distractor, TrackDefinition, TrackParams, TrackShape, TruthCone};
pub use training::{train_reference_model, TrainingConfig};
