//! Feature-to-reference scan matching by damped Gauss-Newton.
//!
//! Edge features are pulled onto the line through their nearest reference
//! edge point and the nearest reference edge point on a neighbouring ring.
//! Planar features are pulled onto the plane through their nearest
//! reference planar point, the next nearest on the same ring, and the
//! nearest on a neighbouring ring. Correspondences are searched again on
//! every iteration.

use nalgebra::{Matrix3, Matrix6, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::features::{extract_reference_features, Feature, FeatureConfig, FeatureSet};
use super::OdometryError;
use crate::geometry::{skew, Point3, PointCloud, Pose, Quaternion, RING_COUNT};
use crate::spatial::PointIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub max_iterations: usize,
    /// Stop once the RMS robust residual changes by less than this (m).
    pub convergence: f64,
    /// Gate between a transformed feature and its nearest reference point (m).
    pub max_correspondence_distance: f64,
    /// Gate for the second point of an edge line (m).
    pub max_edge_neighbor_distance: f64,
    /// Gate for the off-ring point of a planar patch (m).
    pub max_plane_neighbor_distance: f64,
    /// How many rings up and down to search for the off-ring neighbour.
    pub ring_search: u8,
    /// Levenberg-style damping added to the normal-equation diagonal.
    pub damping: f64,
    /// Scale of the Cauchy loss applied to residuals (m).
    pub robust_scale: f64,
    /// A correspondence is dropped when the nearest point on another
    /// searched ring lies this far off its line or plane (m).
    pub max_neighbor_deviation: f64,
    /// After the joint solve, planar features alone refine the pose when
    /// the smallest eigenvalue of their normal matrix reaches this value.
    /// Zero disables the refinement.
    pub planar_refinement_information: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            convergence: 1e-6,
            max_correspondence_distance: 1.0,
            max_edge_neighbor_distance: 1.0,
            max_plane_neighbor_distance: 2.5,
            ring_search: 2,
            damping: 1e-4,
            robust_scale: 0.2,
            max_neighbor_deviation: 0.05,
            planar_refinement_information: 10.0,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), OdometryError> {
        if self.max_iterations == 0 {
            return Err(OdometryError::InvalidConfig("max_iterations must be at least 1"));
        }
        let gates = [
            self.max_correspondence_distance,
            self.max_edge_neighbor_distance,
            self.max_plane_neighbor_distance,
            self.robust_scale,
            self.max_neighbor_deviation,
        ];
        if gates.iter().any(|g| !(*g > 0.0)) || !(self.damping >= 0.0) || !(self.planar_refinement_information >= 0.0) {
            return Err(OdometryError::InvalidConfig("matching gates must be positive"));
        }
        Ok(())
    }
}

struct FeatureIndex {
    points: Vec<Point3>,
    rings: Vec<u8>,
    all: PointIndex,
    /// Per ring: index over that ring's points and their global ids.
    by_ring: Vec<(PointIndex, Vec<usize>)>,
}

impl FeatureIndex {
    fn new(features: &[Feature]) -> Self {
        let points: Vec<Point3> = features.iter().map(|f| f.position).collect();
        let rings: Vec<u8> = features.iter().map(|f| f.ring).collect();
        let by_ring = (0..RING_COUNT)
            .map(|r| {
                let ids: Vec<usize> = (0..points.len()).filter(|&i| rings[i] == r).collect();
                let pts: Vec<Point3> = ids.iter().map(|&i| points[i]).collect();
                (PointIndex::new(&pts), ids)
            })
            .collect();
        Self { all: PointIndex::new(&points), points, rings, by_ring }
    }

    fn nearest_on_ring(&self, ring: u8, p: &Point3, exclude: Option<usize>) -> Option<(usize, f64)> {
        let (index, ids) = &self.by_ring[ring as usize];
        index
            .nearest_n(p, 2)
            .into_iter()
            .map(|(local, d)| (ids[local], d))
            .find(|(g, _)| Some(*g) != exclude)
    }

    /// The nearest point on each ring within `search` of `ring`, excluding
    /// `ring`, sorted by distance.
    fn nearest_per_off_ring(&self, ring: u8, search: u8, p: &Point3) -> Vec<(usize, f64)> {
        let lo = ring.saturating_sub(search);
        let hi = (ring + search).min(RING_COUNT - 1);
        let mut found: Vec<(usize, f64)> =
            (lo..=hi).filter(|&r| r != ring).filter_map(|r| self.nearest_on_ring(r, p, None)).collect();
        found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        found
    }
}

/// Correspondence pool built once from a reference scan.
pub struct ReferenceMap {
    edges: FeatureIndex,
    planar: FeatureIndex,
}

impl ReferenceMap {
    pub fn new(reference: &FeatureSet) -> Self {
        Self { edges: FeatureIndex::new(&reference.edges), planar: FeatureIndex::new(&reference.planar) }
    }

    pub fn from_cloud(reference: &PointCloud, cfg: &FeatureConfig) -> Self {
        Self::new(&extract_reference_features(reference, cfg))
    }

    pub fn is_empty(&self) -> bool {
        self.edges.points.is_empty() && self.planar.points.is_empty()
    }
}

/// Residual block of one correspondence: a 3-vector for edges (the
/// perpendicular offset from the line) or a scalar for planes.
enum Residual {
    Line { offset: Vector3<f64>, projector: Matrix3<f64> },
    Plane { distance: f64, normal: Vector3<f64> },
}

fn edge_residual(q: &Point3, map: &FeatureIndex, cfg: &MatchConfig) -> Option<Residual> {
    let (j, dj) = map.all.nearest(q)?;
    if dj > cfg.max_correspondence_distance {
        return None;
    }
    let off = map.nearest_per_off_ring(map.rings[j], cfg.ring_search, q);
    let &(l, dl) = off.first()?;
    if dl > cfg.max_edge_neighbor_distance {
        return None;
    }
    let a = map.points[j].coords;
    let dir = map.points[l].coords - a;
    let len = dir.norm();
    if len < 1e-6 {
        return None;
    }
    let u = dir / len;
    let projector = Matrix3::identity() - u * u.transpose();
    let bends = off[1..].iter().any(|&(check, dc)| {
        dc <= cfg.max_edge_neighbor_distance && (projector * (map.points[check].coords - a)).norm() > cfg.max_neighbor_deviation
    });
    if bends {
        return None;
    }
    Some(Residual::Line { offset: projector * (q.coords - a), projector })
}

fn plane_residual(q: &Point3, map: &FeatureIndex, cfg: &MatchConfig) -> Option<Residual> {
    let (j, dj) = map.all.nearest(q)?;
    if dj > cfg.max_correspondence_distance {
        return None;
    }
    let (l, dl) = map.nearest_on_ring(map.rings[j], q, Some(j))?;
    let off = map.nearest_per_off_ring(map.rings[j], cfg.ring_search, q);
    let &(m, dm) = off.first()?;
    if dl > cfg.max_correspondence_distance || dm > cfg.max_plane_neighbor_distance {
        return None;
    }
    let a = map.points[j].coords;
    let e1 = map.points[l].coords - a;
    let e2 = map.points[m].coords - a;
    let n = e1.cross(&e2);
    let nn = n.norm();
    if nn < 1e-3 * e1.norm() * e2.norm() {
        return None;
    }
    let normal = n / nn;
    // a triple straddling two surfaces leaves a nearby ring off its plane
    let straddles = off[1..].iter().any(|&(check, dc)| {
        dc <= cfg.max_plane_neighbor_distance && normal.dot(&(map.points[check].coords - a)).abs() > cfg.max_neighbor_deviation
    });
    if straddles {
        return None;
    }
    Some(Residual::Plane { distance: normal.dot(&(q.coords - a)), normal })
}

struct Linearization {
    hessian: Matrix6<f64>,
    gradient: Vector6<f64>,
    cost: f64,
    count: usize,
}

/// Accumulates robustly weighted normal equations at `pose`. Parameters are
/// ordered (rotation increment, translation increment); the rotation
/// increment perturbs the pose on the left.
fn linearize(features: &FeatureSet, map: &ReferenceMap, pose: &Pose, cfg: &MatchConfig) -> Linearization {
    let mut lin = Linearization { hessian: Matrix6::zeros(), gradient: Vector6::zeros(), cost: 0.0, count: 0 };
    let rot = pose.rotation().0;
    let c2 = cfg.robust_scale * cfg.robust_scale;

    let mut add = |rp: Vector3<f64>, residual: Residual| {
        // d(R p + t)/d(ω, t) = [−[Rp]×, I]
        let mut dq = SMatrix::<f64, 3, 6>::zeros();
        dq.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&rp)));
        dq.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
        match residual {
            Residual::Line { offset, projector } => {
                let s = offset.norm_squared();
                let w = 1.0 / (1.0 + s / c2);
                let jac = projector * dq;
                lin.hessian += w * jac.transpose() * jac;
                lin.gradient += w * jac.transpose() * offset;
                lin.cost += c2 * (1.0 + s / c2).ln();
            }
            Residual::Plane { distance, normal } => {
                let s = distance * distance;
                let w = 1.0 / (1.0 + s / c2);
                let jac = normal.transpose() * dq;
                lin.hessian += w * jac.transpose() * jac;
                lin.gradient += w * jac.transpose() * distance;
                lin.cost += c2 * (1.0 + s / c2).ln();
            }
        }
        lin.count += 1;
    };

    for f in &features.edges {
        let rp = rot * f.position.coords;
        let q = Point3::from(rp + pose.translation);
        if let Some(r) = edge_residual(&q, &map.edges, cfg) {
            add(rp, r);
        }
    }
    for f in &features.planar {
        let rp = rot * f.position.coords;
        let q = Point3::from(rp + pose.translation);
        if let Some(r) = plane_residual(&q, &map.planar, cfg) {
            add(rp, r);
        }
    }
    if lin.count > 0 {
        lin.cost /= lin.count as f64;
    }
    lin
}

/// Estimates the transform taking the current scan's features into the
/// reference scan's frame, starting from `initial`.
pub fn match_features(
    features: &FeatureSet,
    map: &ReferenceMap,
    initial: &Pose,
    cfg: &MatchConfig,
) -> Result<Pose, OdometryError> {
    cfg.validate()?;
    if features.is_empty() || map.is_empty() {
        return Err(OdometryError::NoCorrespondences);
    }
    let pose = gauss_newton(features, map, *initial, cfg)?;
    if cfg.planar_refinement_information == 0.0 || features.edges.is_empty() {
        return Ok(pose);
    }
    // Edge samples sit on the azimuth grid, so an edge line misses the true
    // corner by up to one grid step. Planes carry no such bias; use them
    // alone once they pin down all six degrees of freedom.
    let planar = FeatureSet { edges: Vec::new(), planar: features.planar.clone() };
    let lin = linearize(&planar, map, &pose, cfg);
    if lin.count == 0 || lin.hessian.symmetric_eigenvalues().min() < cfg.planar_refinement_information {
        return Ok(pose);
    }
    Ok(gauss_newton(&planar, map, pose, cfg).unwrap_or(pose))
}

fn gauss_newton(features: &FeatureSet, map: &ReferenceMap, initial: Pose, cfg: &MatchConfig) -> Result<Pose, OdometryError> {
    let mut pose = initial;
    let mut previous_cost: Option<f64> = None;
    let mut growth = 0usize;

    for iteration in 0..cfg.max_iterations {
        let lin = linearize(features, map, &pose, cfg);
        if lin.count == 0 {
            if iteration == 0 {
                return Err(OdometryError::NoCorrespondences);
            }
            break;
        }
        if let Some(prev) = previous_cost {
            if lin.cost > prev {
                growth += 1;
                if growth >= 3 {
                    return Err(OdometryError::Diverged { iterations: iteration });
                }
            } else {
                growth = 0;
            }
            if (prev.sqrt() - lin.cost.sqrt()).abs() < cfg.convergence {
                break;
            }
        }
        previous_cost = Some(lin.cost);
        if lin.gradient.norm() == 0.0 {
            break;
        }

        let mut lhs = lin.hessian;
        for d in 0..6 {
            lhs[(d, d)] += cfg.damping * lin.hessian[(d, d)] + 1e-9;
        }
        let step = match lhs.cholesky() {
            Some(ch) => ch.solve(&(-lin.gradient)),
            None => lhs.lu().solve(&(-lin.gradient)).ok_or(OdometryError::Diverged { iterations: iteration })?,
        };
        let dw = Vector3::new(step[0], step[1], step[2]);
        let dt = Vector3::new(step[3], step[4], step[5]);
        let dq = Quaternion::from_rotation_vector(dw);
        let rot_inc = Pose { translation: Vector3::zeros(), orientation: dq };
        let rotated = rot_inc.compose(&Pose { translation: Vector3::zeros(), orientation: pose.orientation });
        pose = Pose { translation: pose.translation + dt, orientation: rotated.orientation };
        if step.norm() < 1e-12 {
            break;
        }
    }
    Ok(pose)
}

/// One-shot variant that builds the correspondence pool from a raw reference cloud.
pub fn match_and_estimate(
    features: &FeatureSet,
    reference: &PointCloud,
    initial: &Pose,
    feature_cfg: &FeatureConfig,
    cfg: &MatchConfig,
) -> Result<Pose, OdometryError> {
    if reference.is_empty() {
        return Err(OdometryError::NoCorrespondences);
    }
    let map = ReferenceMap::from_cloud(reference, feature_cfg);
    match_features(features, &map, initial, cfg)
}
