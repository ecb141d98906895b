//! GNSS-INS pose source with seeded Gaussian errors.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use conetrack_core::geometry::{Pose, Quaternion};
use conetrack_core::odometry::{OdometryEstimate, PoseSource};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Per-axis horizontal position error (m).
    pub position_sigma: f64,
    /// Heading error (rad).
    pub heading_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { position_sigma: 0.02, heading_sigma: 0.002, seed: 17 }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.position_sigma >= 0.0 && self.heading_sigma >= 0.0 {
            Ok(())
        } else {
            Err(SimError::InvalidConfig("gnss sigmas must be non-negative".into()))
        }
    }
}

/// Perturbs the vehicle's horizontal position and heading; height, roll and
/// pitch pass through.
pub fn simulate_gnss<R: Rng>(true_pose: &Pose, stamp: f64, noise: &NoiseModel, rng: &mut R) -> OdometryEstimate {
    let pos = Normal::new(0.0, noise.position_sigma).expect("finite sigma");
    let yaw = Normal::new(0.0, noise.heading_sigma).expect("finite sigma");
    let (dx, dy, dyaw) = (pos.sample(rng), pos.sample(rng), yaw.sample(rng));
    let pose = if noise.position_sigma == 0.0 && noise.heading_sigma == 0.0 {
        *true_pose
    } else {
        let position = true_pose.position() + Vector3::new(dx, dy, 0.0);
        let attitude = Quaternion::from_yaw(dyaw).mul(&true_pose.attitude());
        Pose::from_placement(position, attitude)
    };
    OdometryEstimate { pose, stamp, source: PoseSource::Gnss }
}

/// One GNSS record per truth pose, drawn from a single seeded stream.
pub fn gnss_stream(truth: &[(f64, Pose)], noise: &NoiseModel) -> Vec<OdometryEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    truth.iter().map(|(stamp, pose)| simulate_gnss(pose, *stamp, noise, &mut rng)).collect()
}
