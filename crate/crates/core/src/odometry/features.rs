//! Local-smoothness scoring and edge/planar feature selection on scan rings.

use serde::{Deserialize, Serialize};

use super::OdometryError;
use crate::geometry::{Point3, PointCloud, RING_COUNT};

/// Number of neighbours taken on each side of a point along its ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothnessWindow {
    half_width: usize,
}

impl SmoothnessWindow {
    pub fn new(half_width: usize) -> Result<Self, OdometryError> {
        if half_width == 0 {
            return Err(OdometryError::InvalidConfig("smoothness half-width must be at least 1"));
        }
        Ok(Self { half_width })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Size of the point set `S`, the point itself included.
    pub fn set_size(&self) -> usize {
        2 * self.half_width + 1
    }
}

/// Local smoothness of point `i` of an azimuth-ordered ring:
///
/// ```text
/// c = ‖ Σ_{j∈S, j≠i} (X_i − X_j) ‖ / (|S| · ‖X_i‖)
/// ```
///
/// where `S` is the run of `2w + 1` consecutive points centred on `i`.
pub fn compute_smoothness(ring: &[Point3], i: usize, window: SmoothnessWindow) -> Result<f64, OdometryError> {
    let w = window.half_width();
    if i < w || i + w >= ring.len() {
        return Err(OdometryError::EdgeOfScan { index: i });
    }
    let xi = ring[i].coords;
    let range = xi.norm();
    if range == 0.0 {
        return Err(OdometryError::ZeroRange { index: i });
    }
    let mut sum = nalgebra::Vector3::zeros();
    for p in ring[i - w..i].iter().chain(&ring[i + 1..=i + w]) {
        sum += xi - p.coords;
    }
    Ok(sum.norm() / (window.set_size() as f64 * range))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub half_width: usize,
    /// Points scoring above this are edge candidates.
    pub c_max_threshold: f64,
    /// Points scoring below this are planar candidates.
    pub c_min_threshold: f64,
    pub n_edge: usize,
    pub n_planar: usize,
    pub sectors: usize,
    /// Consecutive ring points further apart in azimuth than this (radians)
    /// break the ring into separate runs.
    pub max_azimuth_gap: f64,
    /// Relative range jump between neighbours that marks an occlusion boundary.
    pub occlusion_ratio: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            half_width: 5,
            c_max_threshold: 0.2,
            c_min_threshold: 0.02,
            n_edge: 2,
            n_planar: 4,
            sectors: 6,
            max_azimuth_gap: 1.0f64.to_radians(),
            occlusion_ratio: 0.1,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), OdometryError> {
        SmoothnessWindow::new(self.half_width)?;
        if self.sectors == 0 {
            return Err(OdometryError::InvalidConfig("sectors must be at least 1"));
        }
        if !(self.c_min_threshold >= 0.0 && self.c_max_threshold > self.c_min_threshold) {
            return Err(OdometryError::InvalidConfig("need 0 <= c_min_threshold < c_max_threshold"));
        }
        if !(self.max_azimuth_gap > 0.0 && self.occlusion_ratio > 0.0) {
            return Err(OdometryError::InvalidConfig("azimuth gap and occlusion ratio must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub position: Point3,
    pub ring: u8,
    pub smoothness: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    pub edges: Vec<Feature>,
    pub planar: Vec<Feature>,
}

impl FeatureSet {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty() && self.planar.is_empty()
    }

    pub fn len(&self) -> usize {
        self.edges.len() + self.planar.len()
    }
}

/// A ring point with its score; `None` when it cannot be scored reliably.
struct Scored {
    position: Point3,
    azimuth: f64,
    smoothness: Option<f64>,
}

/// Scores every point of one azimuth-ordered ring. Points whose window
/// crosses an azimuth gap, sits on the far side of an occlusion boundary,
/// or runs off the ring end get no score.
fn score_ring(ring: &[(f64, Point3)], cfg: &FeatureConfig) -> Vec<Scored> {
    let window = SmoothnessWindow { half_width: cfg.half_width };
    let w = cfg.half_width;
    let n = ring.len();
    let positions: Vec<Point3> = ring.iter().map(|(_, p)| *p).collect();
    let ranges: Vec<f64> = positions.iter().map(|p| p.coords.norm()).collect();

    // run id per point, split at azimuth gaps
    let mut run = vec![0usize; n];
    for i in 1..n {
        run[i] = run[i - 1] + usize::from(ring[i].0 - ring[i - 1].0 > cfg.max_azimuth_gap);
    }

    let mut occluded = vec![false; n];
    for i in 0..n.saturating_sub(1) {
        if run[i] != run[i + 1] {
            continue;
        }
        let (ra, rb) = (ranges[i], ranges[i + 1]);
        if (ra - rb).abs() > cfg.occlusion_ratio * ra.min(rb) {
            // the far side of the jump is shadowed by the near side
            let (lo, hi) = if ra > rb { (i.saturating_sub(w), i) } else { (i + 1, (i + 1 + w).min(n - 1)) };
            occluded[lo..=hi].iter_mut().for_each(|o| *o = true);
        }
    }

    (0..n)
        .map(|i| {
            let in_run = i >= w && i + w < n && run[i - w] == run[i] && run[i + w] == run[i];
            let smoothness = if in_run && !occluded[i] {
                compute_smoothness(&positions, i, window).ok()
            } else {
                None
            };
            Scored { position: positions[i], azimuth: ring[i].0, smoothness }
        })
        .collect()
}

fn ring_runs(cloud: &PointCloud) -> Vec<Vec<(f64, Point3)>> {
    let mut rings: Vec<Vec<(f64, Point3)>> = vec![Vec::new(); RING_COUNT as usize];
    for p in &cloud.points {
        rings[p.ring as usize].push((p.azimuth, p.position));
    }
    for r in &mut rings {
        r.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    rings
}

fn sector_of(azimuth: f64, sectors: usize) -> usize {
    let a = azimuth.rem_euclid(std::f64::consts::TAU);
    ((a / std::f64::consts::TAU * sectors as f64) as usize).min(sectors - 1)
}

/// Picks up to `quota` indices from `order`, skipping points within
/// `suppress` ring positions of an already picked one.
fn pick(order: &[usize], quota: usize, suppress: usize, taken: &mut [bool]) -> Vec<usize> {
    let mut out = Vec::new();
    for &i in order {
        if out.len() >= quota {
            break;
        }
        if taken[i] {
            continue;
        }
        out.push(i);
        let lo = i.saturating_sub(suppress);
        let hi = (i + suppress).min(taken.len() - 1);
        for t in taken.iter_mut().take(hi + 1).skip(lo) {
            *t = true;
        }
    }
    out
}

/// Sector-quota feature selection: per ring and azimuth sector, the
/// highest-scoring points above `c_max_threshold` become edges and the
/// lowest-scoring points below `c_min_threshold` become planar features.
pub fn extract_features(cloud: &PointCloud, cfg: &FeatureConfig) -> FeatureSet {
    select(cloud, cfg, Some((cfg.n_edge, cfg.n_planar)))
}

/// Every point passing the thresholds, without quotas. Used as the
/// correspondence pool on the reference side.
pub fn extract_reference_features(cloud: &PointCloud, cfg: &FeatureConfig) -> FeatureSet {
    select(cloud, cfg, None)
}

fn select(cloud: &PointCloud, cfg: &FeatureConfig, quotas: Option<(usize, usize)>) -> FeatureSet {
    let mut out = FeatureSet::default();
    for (ring_id, ring) in ring_runs(cloud).iter().enumerate() {
        if ring.len() < cfg.set_size() {
            continue;
        }
        let scored = score_ring(ring, cfg);
        let mut by_sector: Vec<Vec<usize>> = vec![Vec::new(); cfg.sectors];
        for (i, s) in scored.iter().enumerate() {
            if s.smoothness.is_some() {
                by_sector[sector_of(s.azimuth, cfg.sectors)].push(i);
            }
        }
        let c = |i: usize| scored[i].smoothness.unwrap_or(f64::NAN);
        let to_feature = |i: usize| Feature { position: scored[i].position, ring: ring_id as u8, smoothness: c(i) };

        for members in by_sector {
            let mut edges: Vec<usize> = members.iter().copied().filter(|&i| c(i) > cfg.c_max_threshold).collect();
            let mut planar: Vec<usize> = members.iter().copied().filter(|&i| c(i) < cfg.c_min_threshold).collect();
            match quotas {
                Some((n_edge, n_planar)) => {
                    edges.sort_by(|&a, &b| c(b).total_cmp(&c(a)).then(a.cmp(&b)));
                    planar.sort_by(|&a, &b| c(a).total_cmp(&c(b)).then(a.cmp(&b)));
                    let mut taken = vec![false; scored.len()];
                    let e = pick(&edges, n_edge, cfg.half_width, &mut taken);
                    let p = pick(&planar, n_planar, cfg.half_width, &mut taken);
                    out.edges.extend(e.into_iter().map(to_feature));
                    out.planar.extend(p.into_iter().map(to_feature));
                }
                None => {
                    out.edges.extend(edges.into_iter().map(to_feature));
                    out.planar.extend(planar.into_iter().map(to_feature));
                }
            }
        }
    }
    out
}

impl FeatureConfig {
    fn set_size(&self) -> usize {
        2 * self.half_width + 1
    }
}
