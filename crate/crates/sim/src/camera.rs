//! Forward-looking pinhole camera rigidly mounted above the LIDAR.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use conetrack_core::vision::{Calibration, Correspondence};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    /// Focal length (px).
    pub focal: f64,
    pub width: u32,
    pub height: u32,
    /// Optical centre above the ground (m).
    pub mount_height: f64,
    /// Downward tilt (degrees).
    pub pitch_deg: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self { focal: 600.0, width: 1280, height: 720, mount_height: 1.0, pitch_deg: 10.0 }
    }
}

/// Ground points used to calibrate the homography, in the LIDAR frame.
pub const CALIBRATION_POINTS: [[f64; 2]; 4] = [[4.0, 1.5], [4.0, -1.5], [12.0, 3.0], [12.0, -3.0]];

impl CameraModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.focal > 0.0 && self.width > 0 && self.height > 0 && self.mount_height > 0.0) {
            return Err(SimError::InvalidConfig("camera: focal, size and mount_height must be positive".into()));
        }
        if !(self.pitch_deg > 0.0 && self.pitch_deg < 60.0) {
            return Err(SimError::InvalidConfig("camera.pitch_deg: must be in (0, 60)".into()));
        }
        Ok(())
    }

    /// Pixel of a point given in the LIDAR frame, `None` behind the image
    /// plane. `lidar_height` is the LIDAR's height above the ground.
    pub fn project(&self, p: &Vector3<f64>, lidar_height: f64) -> Option<[f64; 2]> {
        let pitch = self.pitch_deg.to_radians();
        let up = p.z - (self.mount_height - lidar_height);
        let depth = p.x * pitch.cos() - up * pitch.sin();
        if depth <= 1e-9 {
            return None;
        }
        let down = -up * pitch.cos() - p.x * pitch.sin();
        let cu = self.width as f64 / 2.0;
        let cv = self.height as f64 / 2.0;
        Some([cu - self.focal * p.y / depth, cv + self.focal * down / depth])
    }

    pub fn in_view(&self, p: &Vector3<f64>, lidar_height: f64) -> bool {
        self.project(p, lidar_height)
            .is_some_and(|[u, v]| u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64)
    }

    /// Image/ground pairs for the calibration points on a flat ground.
    pub fn calibration(&self, lidar_height: f64) -> Result<Calibration, SimError> {
        let pairs = CALIBRATION_POINTS.map(|g| {
            let image = self.project(&Vector3::new(g[0], g[1], -lidar_height), lidar_height).expect("calibration points lie ahead");
            Correspondence { image, ground: g }
        });
        Calibration::new(pairs, self.width, self.height).map_err(|e| SimError::InvalidConfig(format!("camera: {e}")))
    }
}
