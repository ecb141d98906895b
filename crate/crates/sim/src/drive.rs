//! Kinematic driving along the track centerline.

use serde::{Deserialize, Serialize};

use crate::track::TrackDefinition;
use crate::SimError;

/// Ground-truth vehicle state in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthPose {
    pub stamp: f64,
    /// Arc length travelled.
    pub s: f64,
    pub position: [f64; 2],
    pub heading: f64,
    pub speed: f64,
    pub yaw_rate: f64,
}

/// Samples the vehicle every `dt` seconds for `duration` seconds at constant
/// `speed` along the centerline, starting at arc length 0.
pub fn drive(track: &TrackDefinition, speed: f64, dt: f64, duration: f64) -> Result<Vec<TruthPose>, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidConfig("drive.dt: must be positive".into()));
    }
    if !(speed >= 0.0) || !(duration >= 0.0) {
        return Err(SimError::InvalidConfig("drive.speed and duration must be non-negative".into()));
    }
    let n = (duration / dt + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| {
            let stamp = k as f64 * dt;
            let s = speed * stamp;
            let c = track.at(s);
            TruthPose {
                stamp,
                s,
                position: [c.position.x, c.position.y],
                heading: c.heading,
                speed,
                yaw_rate: speed * c.curvature,
            }
        })
        .collect())
}

/// Drives `laps` times the track length; the last sample falls less than
/// one step short of the end.
pub fn drive_laps(track: &TrackDefinition, speed: f64, dt: f64, laps: f64) -> Result<Vec<TruthPose>, SimError> {
    if !(speed > 0.0) || !(laps > 0.0) {
        return Err(SimError::InvalidConfig("drive.speed and laps must be positive".into()));
    }
    drive(track, speed, dt, laps * track.length() / speed)
}
