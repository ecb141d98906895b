//! Ray-cast model of a 16-ring spinning LIDAR.

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use conetrack_core::geometry::{LidarPoint, Point3, PointCloud, Pose, Quaternion, RING_COUNT};

use crate::track::{ObjectKind, Solid, WorldObject};
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarModel {
    /// Elevation of ring 0 (degrees); ring `i` points `i · ring_spacing` higher.
    pub lowest_elevation_deg: f64,
    pub ring_spacing_deg: f64,
    pub horizontal_resolution_deg: f64,
    /// Height of the optical centre above the ground (m).
    pub mount_height: f64,
    /// Standard deviation of the range error (m).
    pub range_noise: f64,
    pub min_range: f64,
    pub max_range: f64,
    /// Sweeps per second.
    pub rate_hz: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            lowest_elevation_deg: -15.0,
            ring_spacing_deg: 2.0,
            horizontal_resolution_deg: 0.2,
            mount_height: 0.8,
            range_noise: 0.01,
            min_range: 0.5,
            max_range: 40.0,
            rate_hz: 10.0,
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_owned()));
        if self.ring_spacing_deg != 2.0 {
            return bad("lidar.ring_spacing_deg: the sensor has 2 degree ring spacing");
        }
        if !(self.horizontal_resolution_deg > 0.0 && 360.0 / self.horizontal_resolution_deg <= 36000.0) {
            return bad("lidar.horizontal_resolution_deg: must be in (0.01, 360]");
        }
        if !(self.range_noise >= 0.0) {
            return bad("lidar.range_noise: must be non-negative");
        }
        if !(self.min_range >= 0.0 && self.max_range > self.min_range) {
            return bad("lidar.max_range: must exceed min_range");
        }
        if !(self.mount_height > 0.0 && self.rate_hz > 0.0) {
            return bad("lidar.mount_height and rate_hz must be positive");
        }
        Ok(())
    }

    pub fn elevation(&self, ring: u8) -> f64 {
        (self.lowest_elevation_deg + self.ring_spacing_deg * ring as f64).to_radians()
    }

    pub fn columns(&self) -> usize {
        (360.0 / self.horizontal_resolution_deg).round() as usize
    }

    pub fn azimuth(&self, column: usize) -> f64 {
        (column as f64 * self.horizontal_resolution_deg).to_radians()
    }

    /// Unit beam direction in the sensor frame.
    pub fn beam(&self, ring: u8, column: usize) -> Vector3<f64> {
        let (e, a) = (self.elevation(ring), self.azimuth(column));
        Vector3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin())
    }
}

/// Ground surface `z = slope_x · x + slope_y · y` in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundSurface {
    pub slope_x: f64,
    pub slope_y: f64,
}

impl GroundSurface {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.slope_x * x + self.slope_y * y
    }

    fn hit(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let denom = d.z - self.slope_x * d.x - self.slope_y * d.y;
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = (self.height(o.x, o.y) - o.z) / denom;
        (t > 0.0).then_some(t)
    }
}

/// Where a level sensor sits when the vehicle stands at `(x, y)` with `heading`.
pub fn sensor_pose(x: f64, y: f64, heading: f64, lidar: &LidarModel, ground: &GroundSurface) -> Pose {
    Pose::from_placement(Vector3::new(x, y, ground.height(x, y) + lidar.mount_height), Quaternion::from_yaw(heading))
}

/// Entry distance of the ray into a solid standing on the ground.
pub fn intersect_solid(solid: &Solid, ground: &GroundSurface, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
    match *solid {
        Solid::Cylinder { center, radius, height } => {
            let base = ground.height(center[0], center[1]);
            let top = base + height;
            let (ox, oy) = (o.x - center[0], o.y - center[1]);
            let mut best: Option<f64> = None;
            let a = d.x * d.x + d.y * d.y;
            if a > 1e-15 {
                let b = 2.0 * (ox * d.x + oy * d.y);
                let c = ox * ox + oy * oy - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc >= 0.0 {
                    let t = (-b - disc.sqrt()) / (2.0 * a);
                    let z = o.z + t * d.z;
                    if t > 0.0 && z >= base && z <= top {
                        best = Some(t);
                    }
                }
            }
            if o.z > top && d.z < 0.0 {
                let t = (top - o.z) / d.z;
                let (px, py) = (ox + t * d.x, oy + t * d.y);
                if px * px + py * py <= radius * radius && best.is_none_or(|b| t < b) {
                    best = Some(t);
                }
            }
            best
        }
        Solid::Box { center, half_length, half_width, height, yaw } => {
            let base = ground.height(center[0], center[1]);
            let (c, s) = (yaw.cos(), yaw.sin());
            let rel = Vector2::new(o.x - center[0], o.y - center[1]);
            let ol = Vector3::new(c * rel.x + s * rel.y, -s * rel.x + c * rel.y, o.z - base);
            let dl = Vector3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z);
            let lo = Vector3::new(-half_length, -half_width, 0.0);
            let hi = Vector3::new(half_length, half_width, height);
            let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
            for a in 0..3 {
                if dl[a].abs() < 1e-15 {
                    if ol[a] < lo[a] || ol[a] > hi[a] {
                        return None;
                    }
                    continue;
                }
                let ta = (lo[a] - ol[a]) / dl[a];
                let tb = (hi[a] - ol[a]) / dl[a];
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
            (t0 <= t1 && t0 > 0.0).then_some(t0)
        }
    }
}

fn reflectivity(kind: Option<ObjectKind>) -> f64 {
    match kind {
        None => 0.2,
        Some(ObjectKind::Cone(_)) => 0.8,
        Some(ObjectKind::TyreStack) => 0.05,
        Some(ObjectKind::Wall) => 0.5,
    }
}

/// Objects whose horizontal footprint overlaps each azimuth column.
fn bucket_objects(objects: &[WorldObject], sensor: &Pose, lidar: &LidarModel) -> Vec<Vec<u32>> {
    let cols = lidar.columns();
    let mut buckets = vec![Vec::new(); cols];
    let res = lidar.horizontal_resolution_deg.to_radians();
    let origin = sensor.position();
    for (id, obj) in objects.iter().enumerate() {
        let c = obj.center();
        let rel = Vector2::new(c.x - origin.x, c.y - origin.y);
        let dist = rel.norm();
        let reach = obj.bounding_radius();
        if dist - reach > lidar.max_range {
            continue;
        }
        if dist <= reach * 1.0001 + 1e-9 {
            buckets.iter_mut().for_each(|b| b.push(id as u32));
            continue;
        }
        let local = sensor.from_world(&Point3::new(c.x, c.y, origin.z));
        let center_az = local.y.atan2(local.x);
        let half = (reach / dist).asin();
        let first = ((center_az - half) / res).floor() as i64 - 1;
        let last = ((center_az + half) / res).ceil() as i64 + 1;
        for k in first..=last {
            buckets[k.rem_euclid(cols as i64) as usize].push(id as u32);
        }
    }
    for b in &mut buckets {
        b.sort_unstable();
        b.dedup();
    }
    buckets
}

/// One sweep from a level sensor at `sensor` (world → sensor pose). Range
/// noise comes from a ChaCha stream keyed by `(seed, stream)` and ring, so
/// a scan is reproducible on its own.
pub fn simulate_scan(
    objects: &[WorldObject],
    ground: &GroundSurface,
    sensor: &Pose,
    lidar: &LidarModel,
    stamp: f64,
    seed: u64,
    stream: u64,
) -> PointCloud {
    let buckets = bucket_objects(objects, sensor, lidar);
    let origin = sensor.position();
    let to_world = sensor.rotation().0.transpose();
    let noise = Normal::new(0.0, lidar.range_noise).expect("finite sigma");
    let rings: Vec<Vec<LidarPoint>> = (0..RING_COUNT)
        .into_par_iter()
        .map(|ring| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream.wrapping_mul(RING_COUNT as u64).wrapping_add(ring as u64));
            let mut out = Vec::new();
            for (col, bucket) in buckets.iter().enumerate() {
                let ds = lidar.beam(ring, col);
                let dw = to_world * ds;
                let mut hit = ground.hit(&origin, &dw).map(|t| (t, None));
                for &id in bucket {
                    let obj = &objects[id as usize];
                    if let Some(t) = intersect_solid(&obj.solid, ground, &origin, &dw) {
                        if hit.is_none_or(|(best, _)| t < best) {
                            hit = Some((t, Some(obj.kind)));
                        }
                    }
                }
                let e = if lidar.range_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                let Some((t, kind)) = hit else { continue };
                if t > lidar.max_range || t < lidar.min_range {
                    continue;
                }
                let p = Point3::from(ds * (t + e));
                let point = LidarPoint::new(p, ring, reflectivity(kind), lidar.azimuth(col)).expect("finite beam");
                out.push(point);
            }
            out
        })
        .collect();
    PointCloud::new(stamp, rings.into_iter().flatten().collect())
}
