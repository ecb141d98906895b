//! Cone map building and the mission logic that runs on top of it.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point3, Pose};
use crate::vision::ConeColor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    #[error("midline needs at least two red and two blue landmarks (found {red} red, {blue} blue)")]
    InsufficientBoundary { red: usize, blue: usize },
    #[error("invalid mapping configuration: {0}")]
    InvalidConfig(&'static str),
}

/// A verified cone in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub position: Point3,
    pub color: ConeColor,
}

const COLORS: [ConeColor; 4] = [ConeColor::Red, ConeColor::Blue, ConeColor::Yellow, ConeColor::Unknown];

fn color_slot(c: ConeColor) -> usize {
    COLORS.iter().position(|k| *k == c).unwrap_or(3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    /// Running mean of the observed positions in the initial frame (m).
    pub position: [f64; 2],
    pub color: ConeColor,
    pub count: usize,
    /// Votes for red, blue, yellow and unknown.
    pub votes: [usize; 4],
}

impl Landmark {
    fn new(position: Vector2<f64>, color: ConeColor) -> Self {
        let mut votes = [0; 4];
        votes[color_slot(color)] = 1;
        Self { position: [position.x, position.y], color, count: 1, votes }
    }

    pub fn xy(&self) -> Vector2<f64> {
        Vector2::new(self.position[0], self.position[1])
    }

    fn observe(&mut self, p: Vector2<f64>, color: ConeColor) {
        self.count += 1;
        let mean = self.xy() + (p - self.xy()) / self.count as f64;
        self.position = [mean.x, mean.y];
        self.votes[color_slot(color)] += 1;
        self.recolor();
    }

    fn absorb(&mut self, other: &Landmark) {
        let n = (self.count + other.count) as f64;
        let mean = (self.xy() * self.count as f64 + other.xy() * other.count as f64) / n;
        self.position = [mean.x, mean.y];
        self.count += other.count;
        (0..4).for_each(|i| self.votes[i] += other.votes[i]);
        self.recolor();
    }

    /// Majority over known colors, keeping the current color on ties.
    /// Unknown wins only when no known color has been seen.
    fn recolor(&mut self) {
        let best = (0..3).map(|i| self.votes[i]).max().unwrap_or(0);
        if best == 0 {
            self.color = ConeColor::Unknown;
        } else if self.color == ConeColor::Unknown || self.votes[color_slot(self.color)] < best {
            self.color = COLORS[(0..3).find(|&i| self.votes[i] == best).unwrap_or(3)];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub stamp: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeMap {
    /// Association gate (m).
    pub gate: f64,
    pub landmarks: Vec<Landmark>,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl ConeMap {
    pub fn new(gate: f64) -> Result<Self, MappingError> {
        if !(gate > 0.0) {
            return Err(MappingError::InvalidConfig("merge gate must be positive"));
        }
        Ok(Self { gate, landmarks: Vec::new(), trajectory: Vec::new() })
    }

    fn nearest(&self, p: &Vector2<f64>) -> Option<(usize, f64)> {
        self.landmarks
            .iter()
            .enumerate()
            .map(|(i, l)| (i, (l.xy() - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    /// Merges landmark pairs closer than the gate until none remain.
    fn enforce_gate(&mut self) {
        loop {
            let mut closest: Option<(usize, usize, f64)> = None;
            for i in 0..self.landmarks.len() {
                for j in i + 1..self.landmarks.len() {
                    let d = (self.landmarks[i].xy() - self.landmarks[j].xy()).norm();
                    if d < self.gate && closest.is_none_or(|c| d < c.2) {
                        closest = Some((i, j, d));
                    }
                }
            }
            let Some((i, j, _)) = closest else { return };
            let other = self.landmarks.remove(j);
            self.landmarks[i].absorb(&other);
        }
    }

    /// Adds the pose to the trajectory and folds the detections into the
    /// landmark set.
    pub fn update(&mut self, stamp: f64, detections: &[Detection], pose: &Pose) {
        self.trajectory.push(TrajectoryPoint { stamp, pose: *pose });
        for d in detections {
            let w = pose.to_world(&d.position);
            let p = Vector2::new(w.x, w.y);
            match self.nearest(&p) {
                Some((i, dist)) if dist <= self.gate => self.landmarks[i].observe(p, d.color),
                _ => self.landmarks.push(Landmark::new(p, d.color)),
            }
        }
        self.enforce_gate();
    }

    pub fn positions(&self) -> Vec<Vector2<f64>> {
        self.trajectory.iter().map(|t| t.pose.position().xy()).collect()
    }
}

pub fn update_map(map: &mut ConeMap, stamp: f64, detections: &[Detection], pose: &Pose) {
    map.update(stamp, detections, pose)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopClosureConfig {
    pub min_path_length: f64,
    pub radius: f64,
}

impl Default for LoopClosureConfig {
    fn default() -> Self {
        Self { min_path_length: 50.0, radius: 2.0 }
    }
}

pub fn path_length(positions: &[Vector2<f64>]) -> f64 {
    positions.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// True once the path is long enough and has come back near its start.
pub fn detect_loop_closure(positions: &[Vector2<f64>], cfg: &LoopClosureConfig) -> bool {
    match (positions.first(), positions.last()) {
        (Some(start), Some(end)) => path_length(positions) >= cfg.min_path_length && (end - start).norm() <= cfg.radius,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MidlineConfig {
    /// Largest red-to-blue distance accepted as a pair (m).
    pub pairing_gate: f64,
}

impl Default for MidlineConfig {
    fn default() -> Self {
        Self { pairing_gate: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: [f64; 2],
    /// Landmark indices of the generating pair.
    pub red: usize,
    pub blue: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Midline {
    pub waypoints: Vec<Waypoint>,
    /// Red or blue landmarks that are in no pair.
    pub unpaired: Vec<usize>,
}

/// Arc length of the closest point on a polyline.
fn arc_position(path: &[Vector2<f64>], p: &Vector2<f64>) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    let mut s = 0.0;
    if path.len() == 1 {
        return 0.0;
    }
    for w in path.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.norm();
        let t = if len > 0.0 { ((p - w[0]).dot(&seg) / (len * len)).clamp(0.0, 1.0) } else { 0.0 };
        let d = (w[0] + seg * t - p).norm();
        if d < best.0 {
            best = (d, s + t * len);
        }
        s += len;
    }
    best.1
}

/// Pairs every red landmark with the nearest blue within the gate and
/// orders the midpoints along the recorded trajectory.
pub fn generate_midline(map: &ConeMap, cfg: &MidlineConfig) -> Result<Midline, MappingError> {
    let of = |c: ConeColor| map.landmarks.iter().enumerate().filter(move |(_, l)| l.color == c).map(|(i, _)| i);
    let reds: Vec<usize> = of(ConeColor::Red).collect();
    let blues: Vec<usize> = of(ConeColor::Blue).collect();
    if reds.len() < 2 || blues.len() < 2 {
        return Err(MappingError::InsufficientBoundary { red: reds.len(), blue: blues.len() });
    }
    let path = map.positions();
    let mut used_blue = vec![false; map.landmarks.len()];
    let mut unpaired = Vec::new();
    let mut waypoints: Vec<(f64, Waypoint)> = Vec::new();
    for &r in &reds {
        let rp = map.landmarks[r].xy();
        let nearest = blues
            .iter()
            .map(|&b| (b, (map.landmarks[b].xy() - rp).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match nearest {
            Some((b, d)) if d <= cfg.pairing_gate => {
                used_blue[b] = true;
                let mid = (rp + map.landmarks[b].xy()) / 2.0;
                let key = if path.is_empty() { waypoints.len() as f64 } else { arc_position(&path, &mid) };
                waypoints.push((key, Waypoint { position: [mid.x, mid.y], red: r, blue: b }));
            }
            _ => unpaired.push(r),
        }
    }
    unpaired.extend(blues.iter().copied().filter(|&b| !used_blue[b]));
    unpaired.sort_unstable();
    waypoints.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.red.cmp(&b.1.red)));
    Ok(Midline { waypoints: waypoints.into_iter().map(|(_, w)| w).collect(), unpaired })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissionState {
    #[serde(rename = "lap1_perception")]
    Lap1Perception,
    #[serde(rename = "lap2_map_tracking")]
    Lap2MapTracking,
    #[serde(rename = "finished")]
    Finished,
}

pub fn mission_step(state: MissionState, loop_closed: bool, finish_detected: bool) -> MissionState {
    match state {
        MissionState::Lap1Perception if loop_closed => MissionState::Lap2MapTracking,
        MissionState::Lap2MapTracking if finish_detected => MissionState::Finished,
        s => s,
    }
}

/// The two yellow landmarks seen most often, if any.
pub fn finish_gate(map: &ConeMap) -> Option<[Vector2<f64>; 2]> {
    let mut yellow: Vec<&Landmark> = map.landmarks.iter().filter(|l| l.color == ConeColor::Yellow).collect();
    yellow.sort_by_key(|l| std::cmp::Reverse(l.count));
    match yellow.as_slice() {
        [a, b, ..] => Some([a.xy(), b.xy()]),
        _ => None,
    }
}

/// Whether the motion `from → to` crosses the gate segment. Touching the
/// line at `from` does not count, so a run starting on the line is not a
/// crossing.
pub fn crosses_gate(from: Vector2<f64>, to: Vector2<f64>, gate: &[Vector2<f64>; 2]) -> bool {
    let d = to - from;
    let e = gate[1] - gate[0];
    let denom = d.x * e.y - d.y * e.x;
    if denom.abs() < 1e-12 {
        return false;
    }
    let w = gate[0] - from;
    let t = (w.x * e.y - w.y * e.x) / denom;
    let s = (w.x * d.y - w.y * d.x) / denom;
    t > 0.0 && t <= 1.0 && (0.0..=1.0).contains(&s)
}

/// Follows the vehicle through the mission: loop closure ends lap 1 and
/// the second pass through the finish gate ends lap 2.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionTracker {
    pub state: MissionState,
    pub crossings: usize,
    loop_cfg: LoopClosureConfig,
    start: Option<Vector2<f64>>,
    last: Option<Vector2<f64>>,
    travelled: f64,
}

impl MissionTracker {
    pub fn new(loop_cfg: LoopClosureConfig) -> Self {
        Self { state: MissionState::Lap1Perception, crossings: 0, loop_cfg, start: None, last: None, travelled: 0.0 }
    }

    pub fn path_length(&self) -> f64 {
        self.travelled
    }

    pub fn step(&mut self, position: Vector2<f64>, gate: Option<&[Vector2<f64>; 2]>) -> MissionState {
        let start = *self.start.get_or_insert(position);
        if let Some(prev) = self.last {
            self.travelled += (position - prev).norm();
            if gate.is_some_and(|g| crosses_gate(prev, position, g)) {
                self.crossings += 1;
            }
        }
        self.last = Some(position);
        let loop_closed = self.state == MissionState::Lap1Perception
            && self.travelled >= self.loop_cfg.min_path_length
            && (position - start).norm() <= self.loop_cfg.radius;
        self.state = mission_step(self.state, loop_closed, self.crossings >= 2);
        self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quaternion;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn det(x: f64, y: f64, color: ConeColor) -> Detection {
        Detection { position: Point3::new(x, y, -0.6), color }
    }

    #[test]
    fn first_detection_creates_landmark() {
        let mut m = ConeMap::new(0.5).unwrap();
        m.update(0.0, &[det(4.0, 1.0, ConeColor::Red)], &Pose::IDENTITY);
        assert_eq!(m.landmarks.len(), 1);
        assert_eq!(m.landmarks[0].count, 1);
        assert_eq!(m.trajectory.len(), 1);
    }

    #[test]
    fn repeated_observation_is_averaged() {
        let mut m = ConeMap::new(0.5).unwrap();
        m.update(0.0, &[det(4.9, 0.0, ConeColor::Blue)], &Pose::IDENTITY);
        m.update(0.1, &[det(5.1, 0.0, ConeColor::Blue)], &Pose::IDENTITY);
        assert_eq!(m.landmarks.len(), 1);
        let l = &m.landmarks[0];
        assert_eq!(l.count, 2);
        // running mean oracle: (4.9 + 5.1) / 2
        assert!((l.xy() - Vector2::new(5.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn distant_detections_stay_apart() {
        let mut m = ConeMap::new(0.5).unwrap();
        m.update(0.0, &[det(5.0, 0.0, ConeColor::Red), det(7.0, 0.0, ConeColor::Red)], &Pose::IDENTITY);
        assert_eq!(m.landmarks.len(), 2);
    }

    #[test]
    fn detections_are_moved_into_initial_frame() {
        let mut m = ConeMap::new(0.5).unwrap();
        let pose = Pose::from_placement(Vector3::new(10.0, 5.0, 0.0), Quaternion::from_yaw(std::f64::consts::FRAC_PI_2));
        m.update(0.0, &[det(2.0, 0.0, ConeColor::Yellow)], &pose);
        assert!((m.landmarks[0].xy() - Vector2::new(10.0, 7.0)).norm() < 1e-12);
    }

    #[test]
    fn majority_vote_ignores_unknown_and_keeps_ties() {
        let mut m = ConeMap::new(0.5).unwrap();
        for c in [ConeColor::Unknown, ConeColor::Red, ConeColor::Unknown, ConeColor::Blue] {
            m.update(0.0, &[det(5.0, 0.0, c)], &Pose::IDENTITY);
        }
        assert_eq!(m.landmarks[0].color, ConeColor::Red);
        m.update(0.0, &[det(5.0, 0.0, ConeColor::Blue)], &Pose::IDENTITY);
        assert_eq!(m.landmarks[0].color, ConeColor::Blue);
    }

    #[test]
    fn landmarks_drifting_together_are_merged() {
        let mut m = ConeMap::new(0.5).unwrap();
        m.update(0.0, &[det(5.0, 0.0, ConeColor::Red), det(5.6, 0.0, ConeColor::Red)], &Pose::IDENTITY);
        assert_eq!(m.landmarks.len(), 2);
        // the mean moves to 5.125, 0.475 from the second landmark
        m.update(0.1, &[det(5.25, 0.0, ConeColor::Red)], &Pose::IDENTITY);
        assert_eq!(m.landmarks.len(), 1);
        assert_eq!(m.landmarks[0].count, 3);
        assert!((m.landmarks[0].position[0] - (2.0 * 5.125 + 5.6) / 3.0).abs() < 1e-12);
    }

    fn line(n: usize, step: f64) -> Vec<Vector2<f64>> {
        (0..n).map(|i| Vector2::new(i as f64 * step, 0.0)).collect()
    }

    #[test]
    fn loop_closure_cases() {
        let cfg = LoopClosureConfig::default();
        assert!(!detect_loop_closure(&line(101, 1.0), &cfg));
        let mut out_and_back = line(3, 0.75);
        out_and_back.extend(line(3, 0.75).into_iter().rev());
        assert!(!detect_loop_closure(&out_and_back, &cfg));
        let circle: Vec<Vector2<f64>> = (0..=100)
            .map(|i| {
                let a = i as f64 / 100.0 * std::f64::consts::TAU * 0.999;
                Vector2::new(10.0 * a.sin(), 10.0 - 10.0 * a.cos())
            })
            .collect();
        assert!(detect_loop_closure(&circle, &cfg));
        assert!(!detect_loop_closure(&[], &cfg));
    }

    fn corridor(n: usize) -> ConeMap {
        let mut m = ConeMap::new(0.5).unwrap();
        for i in 0..n {
            let x = 5.0 * i as f64;
            let pose = Pose::from_placement(Vector3::new(x, 0.0, 0.0), Quaternion::IDENTITY);
            m.update(i as f64, &[det(0.0, 2.0, ConeColor::Red), det(0.0, -2.0, ConeColor::Blue)], &pose);
        }
        m
    }

    #[test]
    fn straight_corridor_midline_is_centered_and_ordered() {
        let mid = generate_midline(&corridor(6), &MidlineConfig::default()).unwrap();
        assert_eq!(mid.waypoints.len(), 6);
        assert!(mid.unpaired.is_empty());
        for (i, w) in mid.waypoints.iter().enumerate() {
            assert!(w.position[1].abs() < 1e-12);
            assert!((w.position[0] - 5.0 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn circular_track_midline_follows_center_radius() {
        let (r, n) = (15.0, 40);
        let mut m = ConeMap::new(0.5).unwrap();
        for k in 0..n {
            let a = k as f64 / n as f64 * std::f64::consts::TAU;
            let (c, s) = (a.cos(), a.sin());
            let pose = Pose::from_placement(Vector3::new(r * c, r * s, 0.0), Quaternion::from_yaw(a + std::f64::consts::FRAC_PI_2));
            let inner = Point3::new((r - 2.0) * c, (r - 2.0) * s, 0.0);
            let outer = Point3::new((r + 2.0) * c, (r + 2.0) * s, 0.0);
            let dets = [
                Detection { position: pose.from_world(&inner), color: ConeColor::Red },
                Detection { position: pose.from_world(&outer), color: ConeColor::Blue },
            ];
            m.update(k as f64, &dets, &pose);
        }
        let mid = generate_midline(&m, &MidlineConfig::default()).unwrap();
        assert_eq!(mid.waypoints.len(), n);
        for w in &mid.waypoints {
            assert!((Vector2::from(w.position).norm() - r).abs() < 0.1);
        }
        // ordered along the driven direction
        let angles: Vec<f64> = mid.waypoints.iter().map(|w| w.position[1].atan2(w.position[0]).rem_euclid(std::f64::consts::TAU)).collect();
        assert!(angles.windows(2).all(|a| a[1] > a[0]));
    }

    #[test]
    fn midline_needs_both_boundaries() {
        let mut m = ConeMap::new(0.5).unwrap();
        m.update(0.0, &[det(5.0, 2.0, ConeColor::Red), det(10.0, 2.0, ConeColor::Red)], &Pose::IDENTITY);
        assert_eq!(
            generate_midline(&m, &MidlineConfig::default()),
            Err(MappingError::InsufficientBoundary { red: 2, blue: 0 })
        );
    }

    #[test]
    fn unpaired_boundary_cones_are_flagged() {
        let mut m = corridor(3);
        m.update(9.0, &[det(30.0, 2.0, ConeColor::Red), det(50.0, -2.0, ConeColor::Blue)], &Pose::IDENTITY);
        let mid = generate_midline(&m, &MidlineConfig::default()).unwrap();
        assert_eq!(mid.waypoints.len(), 3);
        assert_eq!(mid.unpaired.len(), 2);
    }

    #[test]
    fn mission_transitions() {
        use MissionState::*;
        assert_eq!(mission_step(Lap1Perception, true, false), Lap2MapTracking);
        assert_eq!(mission_step(Lap1Perception, false, true), Lap1Perception);
        assert_eq!(mission_step(Lap2MapTracking, false, true), Finished);
        assert_eq!(mission_step(Lap2MapTracking, true, false), Lap2MapTracking);
        assert_eq!(mission_step(Finished, true, true), Finished);
    }

    #[test]
    fn gate_crossing_excludes_start_on_line() {
        let gate = [Vector2::new(0.0, 2.0), Vector2::new(0.0, -2.0)];
        assert!(!crosses_gate(Vector2::new(0.0, 0.0), Vector2::new(0.5, 0.0), &gate));
        assert!(crosses_gate(Vector2::new(-0.5, 0.0), Vector2::new(0.0, 0.0), &gate));
        assert!(crosses_gate(Vector2::new(-0.5, 0.0), Vector2::new(0.5, 0.0), &gate));
        assert!(!crosses_gate(Vector2::new(-0.5, 3.0), Vector2::new(0.5, 3.0), &gate));
    }

    #[test]
    fn tracker_finishes_after_two_laps() {
        let gate = [Vector2::new(0.0, 2.0), Vector2::new(0.0, -2.0)];
        let mut t = MissionTracker::new(LoopClosureConfig::default());
        let mut states = Vec::new();
        for lap in 0..3 {
            for i in 0..200 {
                let a = i as f64 / 200.0 * std::f64::consts::TAU;
                let p = Vector2::new(15.0 * a.sin(), 15.0 - 15.0 * a.cos());
                states.push((lap, t.step(p, Some(&gate))));
            }
        }
        let first_lap2 = states.iter().position(|s| s.1 == MissionState::Lap2MapTracking).unwrap();
        let finished = states.iter().position(|s| s.1 == MissionState::Finished).unwrap();
        assert_eq!(states[first_lap2].0, 0);
        assert_eq!(finished, 400);
        // the start on the line is not a crossing; laps two and three begin with one each
        assert_eq!(t.crossings, 2);
    }

    proptest! {
        #[test]
        fn refeeding_landmarks_changes_nothing(
            pts in proptest::collection::vec((-30.0..30.0f64, -30.0..30.0f64), 1..30)
        ) {
            let mut m = ConeMap::new(0.5).unwrap();
            let dets: Vec<Detection> = pts.iter().map(|(x, y)| det(*x, *y, ConeColor::Red)).collect();
            m.update(0.0, &dets, &Pose::IDENTITY);
            let before = m.landmarks.clone();
            let again: Vec<Detection> = before.iter().map(|l| det(l.position[0], l.position[1], l.color)).collect();
            m.update(1.0, &again, &Pose::IDENTITY);
            prop_assert_eq!(m.landmarks.len(), before.len());
            for (a, b) in m.landmarks.iter().zip(&before) {
                prop_assert!((a.xy() - b.xy()).norm() < 1e-9);
            }
        }

        #[test]
        fn gate_invariant_after_every_update(
            batches in proptest::collection::vec(proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 0..10), 1..8)
        ) {
            let mut m = ConeMap::new(0.5).unwrap();
            for (k, b) in batches.iter().enumerate() {
                let dets: Vec<Detection> = b.iter().map(|(x, y)| det(*x, *y, ConeColor::Blue)).collect();
                m.update(k as f64, &dets, &Pose::IDENTITY);
                for i in 0..m.landmarks.len() {
                    for j in i + 1..m.landmarks.len() {
                        prop_assert!((m.landmarks[i].xy() - m.landmarks[j].xy()).norm() >= 0.5);
                    }
                }
            }
        }

        #[test]
        fn waypoints_are_equidistant_to_their_pair(
            ys in proptest::collection::vec((1.0..3.0f64, -3.0..-1.0f64, -0.5..0.5f64), 2..10)
        ) {
            let mut m = ConeMap::new(0.5).unwrap();
            for (i, (yr, yb, dx)) in ys.iter().enumerate() {
                let x = 5.0 * i as f64;
                m.update(i as f64, &[det(x, *yr, ConeColor::Red), det(x + dx, *yb, ConeColor::Blue)], &Pose::IDENTITY);
            }
            let mid = generate_midline(&m, &MidlineConfig::default()).unwrap();
            for w in &mid.waypoints {
                let p = Vector2::from(w.position);
                let dr = (p - m.landmarks[w.red].xy()).norm();
                let db = (p - m.landmarks[w.blue].xy()).norm();
                prop_assert!((dr - db).abs() < 1e-9);
            }
        }
    }
}
