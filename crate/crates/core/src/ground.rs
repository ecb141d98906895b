//! Region-of-interest cropping and RANSAC ground-plane segmentation.
//!
//! The ground is modelled as a height-offset plane `height = k·a + j·b + h`
//! where `(a, b)` are the two horizontal abscissae. Which sensor axis is the
//! height axis is explicit ([`HeightAxis`]); the default is `y`, so that the
//! model reads `y = k·x + j·z + h`.
//!
//! Point-to-plane error is the geometric distance
//! `(height − k·a − j·b − h) / √(1 + k² + j²)`. The variant that also adds
//! `h²` under the root is available as [`ErrorMetric::IncludeOffset`] for
//! comparison only: it mixes a length into a dimensionless normalization.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point3, PointCloud};

/// Largest slope magnitude accepted for either plane coefficient.
pub const MAX_SLOPE: f64 = 0.3;

const MAX_SAMPLE_ATTEMPTS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundError {
    #[error("need at least 3 points to fit a plane, got {0}")]
    InsufficientPoints(usize),
    #[error("no non-degenerate plane hypothesis could be sampled")]
    NoValidHypothesis,
    #[error("plane slope ({k}, {j}) exceeds the small pitch/roll bound")]
    SlopeOutOfRange { k: f64, j: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeightAxis {
    /// `y` is height; abscissae are `(x, z)`.
    #[default]
    Y,
    /// `z` is height; abscissae are `(x, y)`.
    Z,
}

impl HeightAxis {
    /// Splits a point into `(abscissa_a, height, abscissa_b)`.
    #[inline]
    pub fn split(self, p: &Point3) -> (f64, f64, f64) {
        match self {
            HeightAxis::Y => (p.x, p.y, p.z),
            HeightAxis::Z => (p.x, p.z, p.y),
        }
    }

    pub fn join(self, a: f64, height: f64, b: f64) -> Point3 {
        match self {
            HeightAxis::Y => Point3::new(a, height, b),
            HeightAxis::Z => Point3::new(a, b, height),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    #[default]
    Geometric,
    IncludeOffset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneModel {
    pub k: f64,
    pub j: f64,
    pub h: f64,
}

impl PlaneModel {
    pub fn new(k: f64, j: f64, h: f64) -> Result<Self, GroundError> {
        if !(k.abs() <= MAX_SLOPE && j.abs() <= MAX_SLOPE) || !h.is_finite() {
            return Err(GroundError::SlopeOutOfRange { k, j });
        }
        Ok(Self { k, j, h })
    }

    /// Coefficients `(a, b, c, d)` of `a·x + b·y + c·z + d = 0` in the
    /// `(abscissa_a, height, abscissa_b)` ordering.
    pub fn general_form(&self) -> [f64; 4] {
        [-self.k, 1.0, -self.j, -self.h]
    }

    pub fn height_at(&self, a: f64, b: f64) -> f64 {
        self.k * a + self.j * b + self.h
    }

    /// Signed error of a point under this plane.
    pub fn signed_error(&self, p: &Point3, axis: HeightAxis, metric: ErrorMetric) -> f64 {
        let (a, y, b) = axis.split(p);
        let norm = match metric {
            ErrorMetric::Geometric => 1.0 + self.k * self.k + self.j * self.j,
            ErrorMetric::IncludeOffset => 1.0 + self.k * self.k + self.j * self.j + self.h * self.h,
        };
        (y - self.k * a - self.j * b - self.h) / norm.sqrt()
    }
}

/// Geometric distance between a point and the plane, with `y` as height.
pub fn point_plane_error(p: &Point3, plane: &PlaneModel) -> f64 {
    plane.signed_error(p, HeightAxis::Y, ErrorMetric::Geometric).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Inlier distance threshold in meters.
    pub tau: f64,
    pub seed: u64,
    #[serde(default)]
    pub height_axis: HeightAxis,
    #[serde(default)]
    pub metric: ErrorMetric,
    /// Hypotheses whose normal is further than this from the height axis are resampled.
    #[serde(default = "default_max_tilt")]
    pub max_tilt_deg: f64,
}

fn default_max_tilt() -> f64 {
    45.0
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            tau: 0.05,
            seed: 0,
            height_axis: HeightAxis::Y,
            metric: ErrorMetric::Geometric,
            max_tilt_deg: default_max_tilt(),
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<(), GroundError> {
        if self.iterations == 0 {
            return Err(GroundError::InvalidConfig("iterations must be at least 1"));
        }
        if !(self.tau > 0.0) {
            return Err(GroundError::InvalidConfig("tau must be positive"));
        }
        if !(self.max_tilt_deg > 0.0 && self.max_tilt_deg < 90.0) {
            return Err(GroundError::InvalidConfig("max_tilt_deg must lie in (0, 90)"));
        }
        Ok(())
    }
}

/// Per-point inlier labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InlierMask(pub Vec<bool>);

impl InlierMask {
    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Closed axis-aligned box in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiBox {
    pub min: Point3,
    pub max: Point3,
}

impl RoiBox {
    pub fn new(min: Point3, max: Point3) -> Result<Self, GroundError> {
        if (0..3).any(|i| !(max[i] > min[i])) {
            return Err(GroundError::InvalidConfig("ROI extents must be positive"));
        }
        Ok(Self { min, max })
    }

    /// Square horizontal footprint of side `2·half_extent` centred on the
    /// sensor, spanning `below` under to `above` over the nominal ground height.
    pub fn around_sensor(
        axis: HeightAxis,
        half_extent: f64,
        ground_height: f64,
        below: f64,
        above: f64,
    ) -> Result<Self, GroundError> {
        let min = axis.join(-half_extent, ground_height - below, -half_extent);
        let max = axis.join(half_extent, ground_height + above, half_extent);
        Self::new(min, max)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

pub fn crop_roi(cloud: &PointCloud, roi: &RoiBox) -> PointCloud {
    PointCloud {
        stamp: cloud.stamp,
        points: cloud.points.iter().filter(|p| roi.contains(&p.position)).copied().collect(),
    }
}

fn inlier_count(points: &[Point3], plane: &PlaneModel, cfg: &RansacConfig) -> usize {
    points
        .iter()
        .filter(|p| plane.signed_error(p, cfg.height_axis, cfg.metric).abs() < cfg.tau)
        .count()
}

/// Plane through three points, or `None` for collinear, steep or
/// out-of-bounds samples.
fn hypothesis(samples: [&Point3; 3], axis: HeightAxis, min_cos_tilt: f64) -> Option<PlaneModel> {
    let [p0, p1, p2] = samples.map(|p| {
        let (a, y, b) = axis.split(p);
        Vector3::new(a, y, b)
    });
    let e1 = p1 - p0;
    let e2 = p2 - p0;
    let n = e1.cross(&e2);
    let nn = n.norm();
    if nn <= 1e-12 * e1.norm().max(e2.norm()).max(1.0).powi(2) {
        return None;
    }
    if n.y.abs() / nn < min_cos_tilt {
        return None;
    }
    let k = -n.x / n.y;
    let j = -n.z / n.y;
    let h = p0.y - k * p0.x - j * p0.z;
    PlaneModel::new(k, j, h).ok()
}

fn sample_hypothesis(
    points: &[Point3],
    cfg: &RansacConfig,
    iteration: usize,
    min_cos_tilt: f64,
) -> Option<PlaneModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(iteration as u64);
    let n = points.len();
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let i0 = rng.random_range(0..n);
        let i1 = rng.random_range(0..n);
        let i2 = rng.random_range(0..n);
        if i0 == i1 || i1 == i2 || i0 == i2 {
            continue;
        }
        if let Some(plane) = hypothesis([&points[i0], &points[i1], &points[i2]], cfg.height_axis, min_cos_tilt) {
            return Some(plane);
        }
    }
    None
}

/// Ordinary least squares of `height` on `(a, b, 1)` over the given points.
fn refit(points: &[Point3], mask: &[bool], axis: HeightAxis) -> Option<PlaneModel> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    let mut n = 0usize;
    for (p, _) in points.iter().zip(mask).filter(|(_, &m)| m) {
        let (a, y, b) = axis.split(p);
        let row = Vector3::new(a, b, 1.0);
        ata += row * row.transpose();
        atb += row * y;
        n += 1;
    }
    if n < 3 {
        return None;
    }
    let sol = ata.lu().solve(&atb)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    PlaneModel::new(sol.x, sol.y, sol.z).ok()
}

fn label(points: &[Point3], plane: &PlaneModel, cfg: &RansacConfig) -> InlierMask {
    InlierMask(
        points
            .iter()
            .map(|p| plane.signed_error(p, cfg.height_axis, cfg.metric).abs() < cfg.tau)
            .collect(),
    )
}

/// RANSAC fit over raw positions. Iterations draw from independent seeded
/// streams, so the parallel evaluation is bit-identical to a sequential one.
pub fn fit_plane_ransac(points: &[Point3], cfg: &RansacConfig) -> Result<(PlaneModel, InlierMask), GroundError> {
    cfg.validate()?;
    if points.len() < 3 {
        return Err(GroundError::InsufficientPoints(points.len()));
    }
    let min_cos_tilt = cfg.max_tilt_deg.to_radians().cos();
    let scored: Vec<Option<(usize, PlaneModel)>> = (0..cfg.iterations)
        .into_par_iter()
        .map(|it| {
            sample_hypothesis(points, cfg, it, min_cos_tilt).map(|plane| (inlier_count(points, &plane, cfg), plane))
        })
        .collect();

    // First maximum wins, independent of thread scheduling.
    let mut best: Option<(usize, PlaneModel)> = None;
    for (count, plane) in scored.into_iter().flatten() {
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, plane));
        }
    }
    let (_, hyp) = best.ok_or(GroundError::NoValidHypothesis)?;

    let consensus = label(points, &hyp, cfg);
    let plane = refit(points, &consensus.0, cfg.height_axis).unwrap_or(hyp);
    let mask = label(points, &plane, cfg);
    Ok((plane, mask))
}

pub fn fit_ground_ransac(cloud: &PointCloud, cfg: &RansacConfig) -> Result<(PlaneModel, InlierMask), GroundError> {
    let points: Vec<Point3> = cloud.positions().collect();
    fit_plane_ransac(&points, cfg)
}

/// Partitions a cloud into `(ground, obstacles)` by the inlier rule.
pub fn split_ground_obstacles(cloud: &PointCloud, plane: &PlaneModel, cfg: &RansacConfig) -> (PointCloud, PointCloud) {
    let (ground, obstacles): (Vec<_>, Vec<_>) = cloud
        .points
        .iter()
        .partition(|p| plane.signed_error(&p.position, cfg.height_axis, cfg.metric).abs() < cfg.tau);
    (PointCloud::new(cloud.stamp, ground), PointCloud::new(cloud.stamp, obstacles))
}
