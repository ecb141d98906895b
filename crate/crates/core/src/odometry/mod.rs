//! Scan-to-scan LIDAR odometry with complementary GNSS fusion.

pub mod features;
pub mod matching;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{PointCloud, Pose, Quaternion};
pub use features::{
    compute_smoothness, extract_features, extract_reference_features, Feature, FeatureConfig, FeatureSet,
    SmoothnessWindow,
};
pub use matching::{match_and_estimate, match_features, MatchConfig, ReferenceMap};

/// Nominal scanner period at 10 Hz.
pub const SCAN_PERIOD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdometryError {
    #[error("invalid odometry configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("point {index} lacks a full neighbourhood on its ring")]
    EdgeOfScan { index: usize },
    #[error("point {index} lies at the sensor origin")]
    ZeroRange { index: usize },
    #[error("no feature correspondences found")]
    NoCorrespondences,
    #[error("scan matching diverged after {iterations} iterations")]
    Diverged { iterations: usize },
    #[error("stamps {lidar} and {gnss} are more than one scan period apart")]
    StampMismatch { lidar: f64, gnss: f64 },
    #[error("stamp {current} does not follow {previous}")]
    NonMonotonicStamp { previous: f64, current: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseSource {
    Lidar,
    Gnss,
    Fused,
}

impl PoseSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            PoseSource::Lidar => "lidar",
            PoseSource::Gnss => "gnss",
            PoseSource::Fused => "fused",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lidar" => Some(PoseSource::Lidar),
            "gnss" => Some(PoseSource::Gnss),
            "fused" => Some(PoseSource::Fused),
            _ => None,
        }
    }
}

/// Pose label of one scan, in the initial frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometryEstimate {
    pub pose: Pose,
    pub stamp: f64,
    pub source: PoseSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdometryConfig {
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub matching: MatchConfig,
    /// Complementary-filter gain toward GNSS.
    pub alpha: f64,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self { features: FeatureConfig::default(), matching: MatchConfig::default(), alpha: 0.7 }
    }
}

impl OdometryConfig {
    pub fn validate(&self) -> Result<(), OdometryError> {
        self.features.validate()?;
        self.matching.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(OdometryError::InvalidConfig("alpha must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Blends a LIDAR and a GNSS pose: vehicle positions are mixed linearly and
/// attitudes by slerp, both with weight `alpha` on the GNSS side.
pub fn fuse_odometry(
    lidar: &OdometryEstimate,
    gnss: &OdometryEstimate,
    alpha: f64,
) -> Result<OdometryEstimate, OdometryError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(OdometryError::InvalidConfig("alpha must lie in [0, 1]"));
    }
    if !((lidar.stamp - gnss.stamp).abs() <= SCAN_PERIOD) {
        return Err(OdometryError::StampMismatch { lidar: lidar.stamp, gnss: gnss.stamp });
    }
    let pose = if alpha == 0.0 {
        lidar.pose
    } else if alpha == 1.0 {
        gnss.pose
    } else {
        let position = (1.0 - alpha) * lidar.pose.position() + alpha * gnss.pose.position();
        let attitude = lidar.pose.attitude().slerp(&gnss.pose.attitude(), alpha);
        Pose::from_placement(position, attitude)
    };
    Ok(OdometryEstimate { pose, stamp: lidar.stamp, source: PoseSource::Fused })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapReason {
    EmptyScan,
    NoCorrespondences,
    Diverged,
}

/// A scan whose pose was extrapolated instead of matched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMarker {
    pub index: usize,
    pub stamp: f64,
    pub reason: GapReason,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OdometryStream {
    pub estimates: Vec<OdometryEstimate>,
    pub gaps: Vec<GapMarker>,
}

/// Constant-velocity motion model as rates per second.
#[derive(Debug, Clone, Copy)]
struct Velocity {
    angular: Vector3<f64>,
    linear: Vector3<f64>,
}

impl Velocity {
    const ZERO: Velocity = Velocity { angular: Vector3::new(0.0, 0.0, 0.0), linear: Vector3::new(0.0, 0.0, 0.0) };

    /// From the delta mapping scan k's frame into scan k−1's.
    fn from_delta(delta: &Pose, dt: f64) -> Self {
        Self { angular: delta.orientation.to_rotation_vector() / dt, linear: delta.translation / dt }
    }

    fn delta(&self, dt: f64) -> Pose {
        Pose { translation: self.linear * dt, orientation: Quaternion::from_rotation_vector(self.angular * dt) }
    }
}

/// Streaming odometry: feed scans in stamp order, get one pose label each.
pub struct Odometer {
    cfg: OdometryConfig,
    reference: Option<(ReferenceMap, Pose)>,
    last: Option<OdometryEstimate>,
    velocity: Velocity,
}

/// Result of one [`Odometer::process`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOdometry {
    pub estimate: OdometryEstimate,
    pub gap: Option<GapReason>,
}

impl Odometer {
    pub fn new(cfg: OdometryConfig) -> Result<Self, OdometryError> {
        cfg.validate()?;
        Ok(Self { cfg, reference: None, last: None, velocity: Velocity::ZERO })
    }

    pub fn process(
        &mut self,
        scan: &PointCloud,
        gnss: Option<&OdometryEstimate>,
    ) -> Result<ScanOdometry, OdometryError> {
        let Some(last) = self.last else {
            let estimate = OdometryEstimate { pose: Pose::IDENTITY, stamp: scan.stamp, source: PoseSource::Lidar };
            let gap = scan.is_empty().then_some(GapReason::EmptyScan);
            if gap.is_none() {
                self.reference = Some((ReferenceMap::from_cloud(scan, &self.cfg.features), Pose::IDENTITY));
            }
            self.last = Some(estimate);
            return Ok(ScanOdometry { estimate, gap });
        };
        if !(scan.stamp > last.stamp) {
            return Err(OdometryError::NonMonotonicStamp { previous: last.stamp, current: scan.stamp });
        }
        let dt = scan.stamp - last.stamp;
        let predicted = self.velocity.delta(dt).inverse().compose(&last.pose);

        let matched = if scan.is_empty() {
            Err(GapReason::EmptyScan)
        } else {
            match &self.reference {
                None => Err(GapReason::NoCorrespondences),
                Some((map, ref_pose)) => {
                    let initial = ref_pose.compose(&predicted.inverse());
                    let features = extract_features(scan, &self.cfg.features);
                    match match_features(&features, map, &initial, &self.cfg.matching) {
                        Ok(delta) => Ok(delta.inverse().compose(ref_pose)),
                        Err(OdometryError::Diverged { .. }) => Err(GapReason::Diverged),
                        Err(OdometryError::NoCorrespondences) => Err(GapReason::NoCorrespondences),
                        Err(e) => return Err(e),
                    }
                }
            }
        };
        let (lidar_pose, gap) = match matched {
            Ok(p) => (p, None),
            Err(reason) => (predicted, Some(reason)),
        };

        let lidar = OdometryEstimate { pose: lidar_pose, stamp: scan.stamp, source: PoseSource::Lidar };
        let estimate = match gnss {
            Some(g) => fuse_odometry(&lidar, g, self.cfg.alpha)?,
            None => lidar,
        };

        self.velocity = Velocity::from_delta(&last.pose.compose(&estimate.pose.inverse()), dt);
        if !scan.is_empty() {
            self.reference = Some((ReferenceMap::from_cloud(scan, &self.cfg.features), estimate.pose));
        }
        self.last = Some(estimate);
        Ok(ScanOdometry { estimate, gap })
    }
}

/// Nearest GNSS record within one scan period of `stamp`.
fn gnss_for(gnss: &[OdometryEstimate], stamp: f64) -> Option<&OdometryEstimate> {
    let i = gnss.partition_point(|g| g.stamp < stamp);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter_map(|j| gnss.get(j))
        .filter(|g| (g.stamp - stamp).abs() <= SCAN_PERIOD)
        .min_by(|a, b| (a.stamp - stamp).abs().total_cmp(&(b.stamp - stamp).abs()))
}

/// Labels every scan with an initial-frame pose. GNSS records must be sorted
/// by stamp; scans without a GNSS record within one period keep the LIDAR pose.
pub fn run_odometry(
    scans: &[PointCloud],
    gnss: &[OdometryEstimate],
    cfg: &OdometryConfig,
) -> Result<OdometryStream, OdometryError> {
    let mut odometer = Odometer::new(*cfg)?;
    let mut out = OdometryStream::default();
    for (index, scan) in scans.iter().enumerate() {
        let step = odometer.process(scan, gnss_for(gnss, scan.stamp))?;
        if let Some(reason) = step.gap {
            out.gaps.push(GapMarker { index, stamp: scan.stamp, reason });
        }
        out.estimates.push(step.estimate);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_scenes::room_scan;
    use proptest::prelude::*;

    fn estimate(pose: Pose, stamp: f64, source: PoseSource) -> OdometryEstimate {
        OdometryEstimate { pose, stamp, source }
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (-50.0..50.0f64, -50.0..50.0f64, -1.0..1.0f64, -3.0..3.0f64, -0.1..0.1f64).prop_map(|(x, y, z, yaw, roll)| {
            let att = Quaternion::from_yaw(yaw).mul(&Quaternion::from_axis_angle(Vector3::x(), roll));
            Pose::from_placement(Vector3::new(x, y, z), att)
        })
    }

    #[test]
    fn fusion_midpoint_of_pure_translation() {
        let a = estimate(Pose::IDENTITY, 1.0, PoseSource::Lidar);
        let b = estimate(Pose::from_placement(Vector3::new(0.0, 2.0, 0.0), Quaternion::IDENTITY), 1.0, PoseSource::Gnss);
        let f = fuse_odometry(&a, &b, 0.5).unwrap();
        assert!((f.pose.position() - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!(f.pose.orientation.angle_to(&Quaternion::IDENTITY) < 1e-12);
        assert_eq!(f.source, PoseSource::Fused);
    }

    #[test]
    fn fusion_rejects_distant_stamps() {
        let a = estimate(Pose::IDENTITY, 1.0, PoseSource::Lidar);
        let b = estimate(Pose::IDENTITY, 1.25, PoseSource::Gnss);
        assert!(matches!(fuse_odometry(&a, &b, 0.5), Err(OdometryError::StampMismatch { .. })));
        assert!(matches!(fuse_odometry(&a, &a, 1.5), Err(OdometryError::InvalidConfig(_))));
    }

    proptest! {
        #[test]
        fn fusion_endpoints_return_inputs(l in arb_pose(), g in arb_pose(), dt in -0.1..0.1f64) {
            let a = estimate(l, 5.0, PoseSource::Lidar);
            let b = estimate(g, 5.0 + dt, PoseSource::Gnss);
            let f0 = fuse_odometry(&a, &b, 0.0).unwrap();
            let f1 = fuse_odometry(&a, &b, 1.0).unwrap();
            prop_assert_eq!(f0.pose.translation, l.translation);
            prop_assert_eq!(f1.pose.translation, g.translation);
            prop_assert!(f0.pose.orientation.angle_to(&l.orientation) < 1e-9);
            prop_assert!(f1.pose.orientation.angle_to(&g.orientation) < 1e-9);
        }
    }

    #[test]
    fn matching_is_fixed_point_on_own_scan() {
        let scan = room_scan(&Pose::IDENTITY, 0.0);
        let cfg = OdometryConfig::default();
        let features = extract_features(&scan, &cfg.features);
        assert!(features.edges.len() > 4 && features.planar.len() > 20);
        let delta = match_and_estimate(&features, &scan, &Pose::IDENTITY, &cfg.features, &cfg.matching).unwrap();
        let (angle, dist) = delta.magnitude();
        assert!(angle < 1e-6 && dist < 1e-6, "angle {angle} dist {dist}");
    }

    #[test]
    fn matching_recovers_small_motion_in_room() {
        let reference = room_scan(&Pose::IDENTITY, 0.0);
        let truth = Pose::from_placement(Vector3::new(0.15, -0.05, 0.0), Quaternion::from_yaw(0.02));
        let current = room_scan(&truth, 0.1);
        let cfg = OdometryConfig::default();
        let features = extract_features(&current, &cfg.features);
        let delta = match_and_estimate(&features, &reference, &Pose::IDENTITY, &cfg.features, &cfg.matching).unwrap();
        // delta maps current-sensor coordinates into reference-sensor ones
        let expected = truth.inverse();
        assert!((delta.translation - expected.translation).norm() < 0.02, "{:?}", delta.translation);
        assert!(delta.orientation.angle_to(&expected.orientation) < 2e-3);
    }

    #[test]
    fn empty_features_have_no_correspondences() {
        let scan = room_scan(&Pose::IDENTITY, 0.0);
        let cfg = OdometryConfig::default();
        let r = match_and_estimate(&FeatureSet::default(), &scan, &Pose::IDENTITY, &cfg.features, &cfg.matching);
        assert_eq!(r, Err(OdometryError::NoCorrespondences));
        let feats = extract_features(&scan, &cfg.features);
        let r = match_and_estimate(&feats, &PointCloud::empty(0.0), &Pose::IDENTITY, &cfg.features, &cfg.matching);
        assert_eq!(r, Err(OdometryError::NoCorrespondences));
    }

    #[test]
    fn static_vehicle_stays_at_identity() {
        let scans: Vec<PointCloud> = (0..5).map(|k| room_scan(&Pose::IDENTITY, k as f64 * 0.1)).collect();
        let out = run_odometry(&scans, &[], &OdometryConfig::default()).unwrap();
        assert_eq!(out.estimates.len(), 5);
        assert!(out.gaps.is_empty());
        for e in &out.estimates {
            let (a, d) = e.pose.magnitude();
            assert!(a < 1e-6 && d < 1e-6);
            assert_eq!(e.source, PoseSource::Lidar);
        }
    }

    #[test]
    fn dropped_scan_is_flagged_and_stream_continues() {
        let mut scans: Vec<PointCloud> = (0..6)
            .map(|k| {
                let p = Pose::from_placement(Vector3::new(0.1 * k as f64, 0.0, 0.0), Quaternion::IDENTITY);
                room_scan(&p, k as f64 * 0.1)
            })
            .collect();
        scans[3] = PointCloud::empty(0.3);
        let out = run_odometry(&scans, &[], &OdometryConfig::default()).unwrap();
        assert_eq!(out.estimates.len(), 6);
        assert_eq!(out.gaps, vec![GapMarker { index: 3, stamp: 0.3, reason: GapReason::EmptyScan }]);
        let end = out.estimates[5].pose.position();
        assert!((end - Vector3::new(0.5, 0.0, 0.0)).norm() < 0.05, "{end:?}");
        // the gap pose follows the constant-velocity extrapolation
        assert!((out.estimates[3].pose.position().x - 0.3).abs() < 0.03);
    }

    #[test]
    fn stamps_must_increase() {
        let scans = vec![room_scan(&Pose::IDENTITY, 1.0), room_scan(&Pose::IDENTITY, 1.0)];
        assert!(matches!(
            run_odometry(&scans, &[], &OdometryConfig::default()),
            Err(OdometryError::NonMonotonicStamp { .. })
        ));
    }

    #[test]
    fn gnss_record_is_fused_when_close_in_time() {
        let scans: Vec<PointCloud> = (0..3).map(|k| room_scan(&Pose::IDENTITY, k as f64 * 0.1)).collect();
        let shifted = Pose::from_placement(Vector3::new(1.0, 0.0, 0.0), Quaternion::IDENTITY);
        let gnss = vec![estimate(shifted, 0.1, PoseSource::Gnss), estimate(shifted, 0.2, PoseSource::Gnss)];
        let cfg = OdometryConfig { alpha: 0.5, ..OdometryConfig::default() };
        let out = run_odometry(&scans, &gnss, &cfg).unwrap();
        assert_eq!(out.estimates[0].pose, Pose::IDENTITY);
        assert_eq!(out.estimates[1].source, PoseSource::Fused);
        assert!((out.estimates[1].pose.position().x - 0.5).abs() < 1e-6);
    }

    #[test]
    fn gnss_lookup_picks_nearest_within_period() {
        let g: Vec<_> = [0.0, 0.1, 0.2].iter().map(|&s| estimate(Pose::IDENTITY, s, PoseSource::Gnss)).collect();
        assert_eq!(gnss_for(&g, 0.12).unwrap().stamp, 0.1);
        assert_eq!(gnss_for(&g, 0.19).unwrap().stamp, 0.2);
        assert!(gnss_for(&g, 0.45).is_none());
    }
}
