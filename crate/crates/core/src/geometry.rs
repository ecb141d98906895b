//! Point clouds and the rigid-transform math shared by every stage.
//!
//! ## Frame convention (held throughout the crate)
//!
//! A [`Pose`] `T = (t, q)` maps a point expressed in the *initial* (world)
//! frame into the sensor frame of one scan:
//!
//! ```text
//! X_sensor = R(q) · p_world + t
//! p_world  = R(q)⁻¹ · (X_sensor − t)
//! ```
//!
//! Sensor axes are x forward, y left, z up. Quaternions are stored in
//! `(x, y, z, w)` order.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of scan layers of the modelled LIDAR.
pub const RING_COUNT: u8 = 16;

pub type Point3 = nalgebra::Point3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("quaternion has zero norm and cannot describe a rotation")]
    InvalidRotation,
    #[error("ring index {0} is outside the sensor's {RING_COUNT} layers")]
    InvalidRing(u8),
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A single LIDAR return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    pub position: Point3,
    pub ring: u8,
    pub intensity: f64,
    /// Horizontal beam angle in `[0, 2π)`.
    pub azimuth: f64,
}

impl LidarPoint {
    pub fn new(position: Point3, ring: u8, intensity: f64, azimuth: f64) -> Result<Self, GeometryError> {
        if ring >= RING_COUNT {
            return Err(GeometryError::InvalidRing(ring));
        }
        if !position.coords.iter().all(|c| c.is_finite()) || !intensity.is_finite() || !azimuth.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { position, ring, intensity, azimuth })
    }

    pub fn range(&self) -> f64 {
        self.position.coords.norm()
    }
}

/// One sweep of the sensor. Points of a ring are kept in azimuth order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub stamp: f64,
    pub points: Vec<LidarPoint>,
}

impl PointCloud {
    pub fn new(stamp: f64, points: Vec<LidarPoint>) -> Self {
        Self { stamp, points }
    }

    pub fn empty(stamp: f64) -> Self {
        Self { stamp, points: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sorts points by `(ring, azimuth)` so every ring is an azimuth-ordered run.
    pub fn sort_by_ring(&mut self) {
        self.points
            .sort_by(|a, b| a.ring.cmp(&b.ring).then(a.azimuth.total_cmp(&b.azimuth)));
    }

    /// Azimuth-ordered point positions of each ring, indexed by ring id.
    pub fn rings(&self) -> Vec<Vec<Point3>> {
        let mut rings: Vec<Vec<(f64, Point3)>> = vec![Vec::new(); RING_COUNT as usize];
        for p in &self.points {
            rings[p.ring as usize].push((p.azimuth, p.position));
        }
        rings
            .into_iter()
            .map(|mut r| {
                r.sort_by(|a, b| a.0.total_cmp(&b.0));
                r.into_iter().map(|(_, p)| p).collect()
            })
            .collect()
    }

    pub fn positions(&self) -> impl Iterator<Item = Point3> + '_ {
        self.points.iter().map(|p| p.position)
    }
}

/// Unit quaternion stored as `(x, y, z, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { x: 0.0, y: 0.0, z: 0.0, w: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let a = axis / n;
        let (s, c) = (angle * 0.5).sin_cos();
        Self::new(a.x * s, a.y * s, a.z * s, c)
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_axis_angle(Vector3::z(), yaw)
    }

    /// Exponential map of a rotation vector.
    pub fn from_rotation_vector(v: Vector3<f64>) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            // second-order accurate near zero
            return Self::new(v.x * 0.5, v.y * 0.5, v.z * 0.5, 1.0).normalized_or_identity();
        }
        Self::from_axis_angle(v, angle)
    }

    /// Logarithm map: rotation vector of the shorter-arc rotation.
    pub fn to_rotation_vector(&self) -> Vector3<f64> {
        let q = if self.w < 0.0 { Self::new(-self.x, -self.y, -self.z, -self.w) } else { *self };
        let v = Vector3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v;
        }
        v * (2.0 * s.atan2(q.w) / s)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    pub fn dot(&self, o: &Quaternion) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z + self.w * o.w
    }

    pub fn normalized(&self) -> Result<Self, GeometryError> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Self::new(self.x / n, self.y / n, self.z / n, self.w / n))
    }

    pub(crate) fn normalized_or_identity(&self) -> Self {
        self.normalized().unwrap_or(Self::IDENTITY)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(-self.x, -self.y, -self.z, self.w)
    }

    /// Hamilton product; `a * b` rotates by `b` first, then `a`.
    pub fn mul(&self, b: &Quaternion) -> Self {
        let a = self;
        Self::new(
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        )
    }

    /// Yaw angle (rotation about z) of the rotation, in `(-π, π]`.
    pub fn yaw(&self) -> f64 {
        let r = quat_to_rotation_unchecked(self);
        r[(1, 0)].atan2(r[(0, 0)])
    }

    /// Spherical linear interpolation from `self` (t = 0) toward `other` (t = 1),
    /// along the shorter arc.
    pub fn slerp(&self, other: &Quaternion, t: f64) -> Quaternion {
        if t == 0.0 {
            return *self;
        }
        if t == 1.0 {
            return *other;
        }
        let mut b = *other;
        let mut cos = self.dot(&b);
        if cos < 0.0 {
            b = Quaternion::new(-b.x, -b.y, -b.z, -b.w);
            cos = -cos;
        }
        let (wa, wb) = if cos > 1.0 - 1e-12 {
            (1.0 - t, t)
        } else {
            let theta = cos.min(1.0).acos();
            let s = theta.sin();
            (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s)
        };
        Quaternion::new(
            wa * self.x + wb * b.x,
            wa * self.y + wb * b.y,
            wa * self.z + wb * b.z,
            wa * self.w + wb * b.w,
        )
        .normalized_or_identity()
    }

    /// Angle of the relative rotation between two orientations.
    pub fn angle_to(&self, other: &Quaternion) -> f64 {
        // atan2 form stays accurate for tiny angles, unlike acos of the dot product
        let r = self.conjugate().mul(other);
        let v = (r.x * r.x + r.y * r.y + r.z * r.z).sqrt();
        2.0 * v.atan2(r.w.abs())
    }
}

/// Orthonormal 3×3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix3(pub Matrix3<f64>);

impl RotationMatrix3 {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> RotationMatrix3 {
        RotationMatrix3(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

fn quat_to_rotation_unchecked(q: &Quaternion) -> Matrix3<f64> {
    let Quaternion { x, y, z, w } = *q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Rotation matrix of a quaternion, entry for entry the standard
/// `(x, y, z, w)` expansion. Non-unit input is normalized first.
pub fn quat_to_rotation(q: &Quaternion) -> Result<RotationMatrix3, GeometryError> {
    let n = q.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(GeometryError::InvalidRotation);
    }
    let q = if (n - 1.0).abs() > 1e-6 { q.normalized()? } else { *q };
    Ok(RotationMatrix3(quat_to_rotation_unchecked(&q)))
}

/// Rigid transform from the initial frame into a scan's sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub orientation: Quaternion,
}

impl Default for Pose {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        translation: Vector3::new(0.0, 0.0, 0.0),
        orientation: Quaternion::IDENTITY,
    };

    /// Builds a pose, normalizing the quaternion.
    pub fn new(translation: Vector3<f64>, orientation: Quaternion) -> Result<Self, GeometryError> {
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { translation, orientation: orientation.normalized()? })
    }

    /// Pose of a sensor located at `position` (initial frame) with body
    /// orientation `attitude` (sensor axes expressed in the initial frame).
    pub fn from_placement(position: Vector3<f64>, attitude: Quaternion) -> Self {
        let orientation = attitude.conjugate().normalized_or_identity();
        let r = quat_to_rotation_unchecked(&orientation);
        Self { translation: -(r * position), orientation }
    }

    /// Sensor origin expressed in the initial frame.
    pub fn position(&self) -> Vector3<f64> {
        self.rotation().0.transpose() * (-self.translation)
    }

    /// Sensor attitude in the initial frame (inverse of the stored orientation).
    pub fn attitude(&self) -> Quaternion {
        self.orientation.conjugate()
    }

    /// Heading of the sensor x axis in the initial frame.
    pub fn heading(&self) -> f64 {
        self.attitude().yaw()
    }

    pub fn rotation(&self) -> RotationMatrix3 {
        RotationMatrix3(quat_to_rotation_unchecked(&self.orientation))
    }

    /// Sensor frame → initial frame: `R⁻¹ (X − t)`.
    pub fn to_world(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation().0.transpose() * (p.coords - self.translation))
    }

    /// Initial frame → sensor frame: `R p + t`.
    pub fn from_world(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation().0 * p.coords + self.translation)
    }

    /// `compose(a, b)` applies `b` first, then `a`.
    pub fn compose(&self, b: &Pose) -> Pose {
        let ra = self.rotation().0;
        Pose {
            translation: ra * b.translation + self.translation,
            orientation: self.orientation.mul(&b.orientation).normalized_or_identity(),
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation().0.transpose();
        Pose {
            translation: -(rt * self.translation),
            orientation: self.orientation.conjugate().normalized_or_identity(),
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation().0);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rotation vector of the orientation and translation norm, used for
    /// convergence checks.
    pub fn magnitude(&self) -> (f64, f64) {
        (self.orientation.angle_to(&Quaternion::IDENTITY), self.translation.norm())
    }
}

pub fn pose_to_world(p: &Point3, pose: &Pose) -> Point3 {
    pose.to_world(p)
}

pub fn pose_from_world(p: &Point3, pose: &Pose) -> Point3 {
    pose.from_world(p)
}

pub fn compose_pose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn invert_pose(a: &Pose) -> Pose {
    a.inverse()
}

/// Skew-symmetric cross-product matrix.
pub(crate) fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}
