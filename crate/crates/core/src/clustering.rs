//! Euclidean cluster extraction and cone-size filtering.

use std::cmp::Ordering;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point3, PointCloud};
use crate::spatial::PointIndex;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("invalid cluster configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Points closer than this (m) are linked.
    pub tolerance: f64,
    pub min_points: usize,
    pub max_points: usize,
    /// Largest accepted extent along x, y and z (m).
    pub max_envelope: [f64; 3],
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { tolerance: 0.3, min_points: 3, max_points: 5000, max_envelope: [0.5, 0.5, 0.5] }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(self.tolerance > 0.0) {
            return Err(ClusterError::InvalidConfig("tolerance must be positive"));
        }
        if self.min_points == 0 || self.max_points < self.min_points {
            return Err(ClusterError::InvalidConfig("need 1 <= min_points <= max_points"));
        }
        if !self.max_envelope.iter().all(|e| *e > 0.0) {
            return Err(ClusterError::InvalidConfig("max_envelope must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub points: Vec<Point3>,
    pub centroid: Point3,
    pub min: Point3,
    pub max: Point3,
}

impl Cluster {
    /// Builds a cluster from at least one point.
    pub fn from_points(points: Vec<Point3>) -> Option<Self> {
        let first = *points.first()?;
        let (mut min, mut max) = (first, first);
        let mut sum = Vector3::zeros();
        for p in &points {
            min = min.inf(p);
            max = max.sup(p);
            sum += p.coords;
        }
        let centroid = Point3::from(sum / points.len() as f64);
        Some(Self { points, centroid, min, max })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned extents (dx, dy, dz).
    pub fn envelope(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn range(&self) -> f64 {
        self.centroid.coords.norm()
    }
}

/// Connected components of the graph linking points within `tolerance`,
/// each sorted by point index, ordered by smallest member.
pub fn connected_components(points: &[Point3], tolerance: f64) -> Vec<Vec<usize>> {
    let index = PointIndex::new(points);
    let mut label = vec![usize::MAX; points.len()];
    let mut components = Vec::new();
    for seed in 0..points.len() {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = components.len();
        label[seed] = id;
        let mut members = vec![seed];
        let mut head = 0;
        while head < members.len() {
            let p = points[members[head]];
            head += 1;
            for n in index.within(&p, tolerance) {
                if label[n] == usize::MAX {
                    label[n] = id;
                    members.push(n);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

fn by_range(a: &Cluster, b: &Cluster) -> Ordering {
    a.range()
        .total_cmp(&b.range())
        .then(a.centroid.x.total_cmp(&b.centroid.x))
        .then(a.centroid.y.total_cmp(&b.centroid.y))
        .then(a.centroid.z.total_cmp(&b.centroid.z))
}

/// Clusters within the configured size bounds, nearest first.
pub fn euclidean_cluster(cloud: &PointCloud, cfg: &ClusterConfig) -> Result<Vec<Cluster>, ClusterError> {
    cfg.validate()?;
    let points: Vec<Point3> = cloud.positions().collect();
    let mut clusters: Vec<Cluster> = connected_components(&points, cfg.tolerance)
        .into_iter()
        .filter(|c| (cfg.min_points..=cfg.max_points).contains(&c.len()))
        .filter_map(|c| Cluster::from_points(c.iter().map(|&i| points[i]).collect()))
        .collect();
    clusters.sort_by(by_range);
    Ok(clusters)
}

/// Drops clusters larger than `max_envelope` along any axis.
pub fn filter_cone_candidates(clusters: Vec<Cluster>, cfg: &ClusterConfig) -> Vec<Cluster> {
    clusters
        .into_iter()
        .filter(|c| {
            let e = c.envelope();
            (0..3).all(|a| e[a] <= cfg.max_envelope[a])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LidarPoint;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud_of(points: &[Point3]) -> PointCloud {
        PointCloud::new(0.0, points.iter().map(|p| LidarPoint::new(*p, 0, 0.0, 0.0).unwrap()).collect())
    }

    fn blob(center: [f64; 3], n: usize, spread: f64, rng: &mut ChaCha8Rng) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    center[0] + rng.random_range(-spread..spread),
                    center[1] + rng.random_range(-spread..spread),
                    center[2] + rng.random_range(-spread..spread),
                )
            })
            .collect()
    }

    /// O(n²) flood fill used as the reference.
    fn naive_components(points: &[Point3], tol: f64) -> Vec<Vec<usize>> {
        let n = points.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            label[s] = id;
            let mut stack = vec![s];
            let mut members = Vec::new();
            while let Some(i) = stack.pop() {
                members.push(i);
                for j in 0..n {
                    if label[j] == usize::MAX && (points[i] - points[j]).norm() <= tol {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    #[test]
    fn separated_blobs_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = blob([5.0, 0.0, 0.0], 20, 0.05, &mut rng);
        pts.extend(blob([6.0, 0.0, 0.0], 20, 0.05, &mut rng));
        let cfg = ClusterConfig { tolerance: 0.3, ..ClusterConfig::default() };
        let clusters = euclidean_cluster(&cloud_of(&pts), &cfg).unwrap();
        assert_eq!(clusters.len(), 2);
        assert!(clusters[0].range() < clusters[1].range());
        assert!(clusters.iter().all(|c| c.len() == 20));
    }

    #[test]
    fn mutually_close_points_form_one_cluster() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = blob([3.0, 1.0, 0.0], 30, 0.08, &mut rng);
        let clusters = euclidean_cluster(&cloud_of(&pts), &ClusterConfig::default()).unwrap();
        assert_eq!(clusters.len(), 1);
        let c = &clusters[0];
        let mean = pts.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / 30.0;
        assert!((c.centroid.coords - mean).norm() < 1e-12);
        assert!(pts.iter().all(|p| (0..3).all(|a| p[a] >= c.min[a] && p[a] <= c.max[a])));
    }

    #[test]
    fn stray_point_is_dropped() {
        let clusters = euclidean_cluster(&cloud_of(&[Point3::new(1.0, 2.0, 0.0)]), &ClusterConfig::default()).unwrap();
        assert!(clusters.is_empty());
        assert!(euclidean_cluster(&PointCloud::empty(0.0), &ClusterConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn envelope_filter_keeps_cones_drops_tyre_stacks() {
        let cfg = ClusterConfig::default();
        let cone = Cluster::from_points(vec![Point3::new(4.9, -0.1, -0.8), Point3::new(5.1, 0.1, -0.5)]).unwrap();
        let stack = Cluster::from_points(vec![Point3::new(8.0, 0.0, -0.8), Point3::new(9.5, 1.5, 0.0)]).unwrap();
        let kept = filter_cone_candidates(vec![cone.clone(), stack], &cfg);
        assert_eq!(kept, vec![cone]);
    }

    #[test]
    fn config_is_validated() {
        let bad = ClusterConfig { tolerance: 0.0, ..ClusterConfig::default() };
        assert!(euclidean_cluster(&PointCloud::empty(0.0), &bad).is_err());
        let bad = ClusterConfig { min_points: 0, ..ClusterConfig::default() };
        assert!(bad.validate().is_err());
    }

    fn arb_points() -> impl Strategy<Value = Vec<Point3>> {
        proptest::collection::vec((0.0..4.0f64, 0.0..4.0f64, 0.0..0.5f64), 0..120)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn components_match_naive_oracle(pts in arb_points(), tol in 0.05..0.6f64) {
            prop_assert_eq!(connected_components(&pts, tol), naive_components(&pts, tol));
        }

        #[test]
        fn clusters_partition_the_kept_points(pts in arb_points(), min in 1usize..5, span in 0usize..20) {
            let cfg = ClusterConfig { tolerance: 0.3, min_points: min, max_points: min + span, ..ClusterConfig::default() };
            let clusters = euclidean_cluster(&cloud_of(&pts), &cfg).unwrap();
            let comps = naive_components(&pts, 0.3);
            let kept: usize = comps.iter().filter(|c| c.len() >= min && c.len() <= min + span).map(|c| c.len()).sum();
            prop_assert_eq!(clusters.iter().map(|c| c.len()).sum::<usize>(), kept);
            let mut seen: Vec<[u64; 3]> = clusters
                .iter()
                .flat_map(|c| c.points.iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]))
                .collect();
            let before = seen.len();
            seen.sort_unstable();
            seen.dedup();
            let distinct: std::collections::HashSet<[u64; 3]> =
                pts.iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
            // duplicates in the input aside, no point shows up twice
            prop_assert!(before - seen.len() <= pts.len() - distinct.len());
        }

        #[test]
        fn larger_tolerance_never_adds_components(pts in arb_points(), a in 0.05..0.5f64, b in 0.0..0.5f64) {
            prop_assert!(connected_components(&pts, a + b).len() <= connected_components(&pts, a).len());
        }
    }
}
