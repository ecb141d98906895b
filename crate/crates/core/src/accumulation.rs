//! Sliding window of recent obstacle scans re-expressed in the newest frame.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{LidarPoint, PointCloud, Pose};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccumulationError {
    #[error("window capacity must be at least 1")]
    ZeroCapacity,
    #[error("stamp {current} does not follow {previous}")]
    NonMonotonicStamp { previous: f64, current: f64 },
    #[error("accumulation window is empty")]
    EmptyWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccumulationConfig {
    /// Number of scans kept, the newest included.
    pub frames: usize,
}

impl Default for AccumulationConfig {
    fn default() -> Self {
        Self { frames: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct AccumulatorWindow {
    capacity: usize,
    entries: VecDeque<(PointCloud, Pose)>,
}

impl AccumulatorWindow {
    pub fn new(capacity: usize) -> Result<Self, AccumulationError> {
        if capacity == 0 {
            return Err(AccumulationError::ZeroCapacity);
        }
        Ok(Self { capacity, entries: VecDeque::with_capacity(capacity + 1) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &(PointCloud, Pose)> {
        self.entries.iter()
    }

    /// Appends a scan with its pose label, evicting the oldest beyond capacity.
    pub fn push(&mut self, cloud: PointCloud, pose: Pose) -> Result<(), AccumulationError> {
        if let Some((last, _)) = self.entries.back() {
            if !(cloud.stamp > last.stamp) {
                return Err(AccumulationError::NonMonotonicStamp { previous: last.stamp, current: cloud.stamp });
            }
        }
        self.entries.push_back((cloud, pose));
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        Ok(())
    }

    /// Maps every stored point into the frame of `current`:
    /// `X̂ = R̂ R_k⁻¹ (X − t_k) + t̂`.
    pub fn accumulate(&self, current: &Pose) -> Result<PointCloud, AccumulationError> {
        let (newest, _) = self.entries.back().ok_or(AccumulationError::EmptyWindow)?;
        let r_hat = current.rotation().0;
        let mut points = Vec::with_capacity(self.entries.iter().map(|(c, _)| c.len()).sum());
        for (cloud, pose) in &self.entries {
            let m = r_hat * pose.rotation().0.transpose();
            for p in &cloud.points {
                let x = m * (p.position.coords - pose.translation) + current.translation;
                points.push(LidarPoint { position: x.into(), ..*p });
            }
        }
        Ok(PointCloud::new(newest.stamp, points))
    }
}
