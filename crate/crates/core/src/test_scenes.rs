//! Analytic scenes for unit tests: a closed room with two pillars scanned by
//! a 16-ring sensor.

use nalgebra::Vector3;

use crate::geometry::{LidarPoint, Point3, PointCloud, Pose, RING_COUNT};

struct Aabb {
    lo: Vector3<f64>,
    hi: Vector3<f64>,
}

impl Aabb {
    /// Entry and exit distances of the ray, if it meets the box.
    fn slab(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for a in 0..3 {
            if d[a].abs() < 1e-15 {
                if o[a] < self.lo[a] || o[a] > self.hi[a] {
                    return None;
                }
                continue;
            }
            let ta = (self.lo[a] - o[a]) / d[a];
            let tb = (self.hi[a] - o[a]) / d[a];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

pub(crate) fn room_scan(sensor: &Pose, stamp: f64) -> PointCloud {
    let room = Aabb { lo: Vector3::new(-9.0, -6.0, -0.8), hi: Vector3::new(12.0, 7.0, 3.0) };
    let pillars = [
        Aabb { lo: Vector3::new(3.0, 2.0, -0.8), hi: Vector3::new(3.6, 2.6, 3.0) },
        Aabb { lo: Vector3::new(5.0, -3.0, -0.8), hi: Vector3::new(5.5, -2.4, 3.0) },
        Aabb { lo: Vector3::new(-4.0, 3.0, -0.8), hi: Vector3::new(-3.2, 3.5, 0.4) },
    ];
    let origin = sensor.position();
    let to_world = sensor.rotation().0.transpose();
    let mut points = Vec::new();
    for ring in 0..RING_COUNT {
        let elev = (-15.0 + 2.0 * ring as f64).to_radians();
        for k in 0..900 {
            let az = -std::f64::consts::PI + (k as f64 + 0.5) * (0.4f64).to_radians();
            let ds = Vector3::new(elev.cos() * az.cos(), elev.cos() * az.sin(), elev.sin());
            let dw = to_world * ds;
            let mut t = room.slab(&origin, &dw).map(|(_, t1)| t1).unwrap_or(f64::INFINITY);
            for p in &pillars {
                if let Some((t0, _)) = p.slab(&origin, &dw) {
                    if t0 > 0.0 && t0 < t {
                        t = t0;
                    }
                }
            }
            if !t.is_finite() {
                continue;
            }
            let hit = Point3::from(origin + dw * t);
            let local = sensor.from_world(&hit);
            points.push(LidarPoint::new(local, ring, 0.0, az).unwrap());
        }
    }
    PointCloud::new(stamp, points)
}
