//! Procedural cone tracks and the objects placed along them.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use conetrack_core::vision::ConeColor;

use crate::SimError;

/// Cone body: radius and height of the cylinder (m).
pub const CONE_RADIUS: f64 = 0.1;
pub const CONE_HEIGHT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrackShape {
    /// Two half circles joined by straights, driven counterclockwise.
    Stadium { radius: f64, straight: f64 },
    Circle { radius: f64 },
    /// Open course, used for straight-line odometry runs.
    Straight { length: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distractor {
    /// Stacked tyres placed by arc position and signed lateral offset (left positive).
    TyreStack { s: f64, offset: f64, radius: f64, height: f64 },
    /// Box-shaped wall parallel to the centerline at `s`.
    Wall { s: f64, offset: f64, length: f64, thickness: f64, height: f64 },
}

/// Buildings lining the venue outside the track. They are kept clear of
/// the area the perception pipeline crops, so they only serve as LIDAR
/// landmarks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenery {
    pub enabled: bool,
    /// Nominal distance of a building's centre from the centerline (m).
    pub offset: f64,
    /// No part of a building comes closer to the centerline than this (m).
    pub clearance: f64,
    /// Spacing along the row of buildings (m).
    pub spacing: f64,
    pub length: f64,
    pub depth: f64,
    pub height: f64,
    /// Uniform jitter of each building's yaw (degrees) and offset (m).
    pub yaw_jitter_deg: f64,
    pub offset_jitter: f64,
}

impl Default for Scenery {
    fn default() -> Self {
        Self {
            enabled: true,
            offset: 19.0,
            clearance: 15.0,
            spacing: 10.0,
            length: 8.0,
            depth: 4.0,
            height: 3.0,
            yaw_jitter_deg: 25.0,
            offset_jitter: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackParams {
    pub shape: TrackShape,
    pub width: f64,
    /// Distance between consecutive cone pairs along the centerline.
    pub spacing: f64,
    /// Standard deviation of cone placement error (m).
    pub cone_jitter: f64,
    pub distractors: Vec<Distractor>,
    pub scenery: Scenery,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            shape: TrackShape::Stadium { radius: 15.0, straight: 52.9 },
            width: 4.0,
            spacing: 5.0,
            cone_jitter: 0.0,
            distractors: vec![Distractor::TyreStack { s: 32.0, offset: -3.5, radius: 0.2, height: 0.45 }],
            scenery: Scenery::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Line { start: [f64; 2], heading: f64, length: f64 },
    /// Left-turning arc starting at `start` with the given heading.
    Arc { start: [f64; 2], heading: f64, radius: f64, sweep: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { length, .. } => length,
            Segment::Arc { radius, sweep, .. } => radius * sweep,
        }
    }

    /// Position, heading and curvature at distance `s` into the segment.
    fn at(&self, s: f64) -> (Vector2<f64>, f64, f64) {
        match *self {
            Segment::Line { start, heading, .. } => {
                (Vector2::from(start) + s * Vector2::new(heading.cos(), heading.sin()), heading, 0.0)
            }
            Segment::Arc { start, heading, radius, .. } => {
                let center = Vector2::from(start) + radius * Vector2::new(-heading.sin(), heading.cos());
                let a = heading - FRAC_PI_2 + s / radius;
                (center + radius * Vector2::new(a.cos(), a.sin()), heading + s / radius, 1.0 / radius)
            }
        }
    }
}

/// Point on the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterlinePoint {
    pub position: Vector2<f64>,
    pub heading: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthCone {
    pub id: usize,
    pub position: [f64; 2],
    pub color: ConeColor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Cone(ConeColor),
    TyreStack,
    Wall,
}

/// Solid the LIDAR can hit, standing on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Solid {
    Cylinder { center: [f64; 2], radius: f64, height: f64 },
    Box { center: [f64; 2], half_length: f64, half_width: f64, height: f64, yaw: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub kind: ObjectKind,
    pub solid: Solid,
}

impl WorldObject {
    pub fn center(&self) -> Vector2<f64> {
        match self.solid {
            Solid::Cylinder { center, .. } | Solid::Box { center, .. } => Vector2::from(center),
        }
    }

    /// Radius of a vertical cylinder enclosing the solid.
    pub fn bounding_radius(&self) -> f64 {
        match self.solid {
            Solid::Cylinder { radius, .. } => radius,
            Solid::Box { half_length, half_width, .. } => half_length.hypot(half_width),
        }
    }

    pub fn height(&self) -> f64 {
        match self.solid {
            Solid::Cylinder { height, .. } | Solid::Box { height, .. } => height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackDefinition {
    pub params: TrackParams,
    pub segments: Vec<Segment>,
    pub closed: bool,
    pub cones: Vec<TruthCone>,
    pub objects: Vec<WorldObject>,
}

impl TrackDefinition {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Centerline at arc length `s`, wrapped on closed tracks and clamped on open ones.
    pub fn at(&self, s: f64) -> CenterlinePoint {
        let total = self.length();
        let mut s = if self.closed { s.rem_euclid(total) } else { s.clamp(0.0, total) };
        let last = self.segments.len() - 1;
        for (i, seg) in self.segments.iter().enumerate() {
            if s <= seg.length() || i == last {
                let (position, heading, curvature) = seg.at(s.min(seg.length()));
                return CenterlinePoint { position, heading: heading.rem_euclid(TAU), curvature };
            }
            s -= seg.length();
        }
        unreachable!("track has at least one segment")
    }

    /// Centerline point offset sideways by `offset` (left positive).
    pub fn lateral(&self, s: f64, offset: f64) -> Vector2<f64> {
        let c = self.at(s);
        c.position + offset * Vector2::new(-c.heading.sin(), c.heading.cos())
    }

    /// Closed polyline sampled every `step` metres.
    pub fn centerline(&self, step: f64) -> Vec<Vector2<f64>> {
        let n = (self.length() / step).ceil().max(1.0) as usize;
        (0..=n).map(|i| self.at(self.length() * i as f64 / n as f64).position).collect()
    }
}

fn segments_of(shape: &TrackShape) -> (Vec<Segment>, bool) {
    match *shape {
        TrackShape::Stadium { radius, straight } => {
            let half = straight / 2.0;
            let segs = vec![
                Segment::Line { start: [0.0, 0.0], heading: 0.0, length: half },
                Segment::Arc { start: [half, 0.0], heading: 0.0, radius, sweep: PI },
                Segment::Line { start: [half, 2.0 * radius], heading: PI, length: straight },
                Segment::Arc { start: [-half, 2.0 * radius], heading: PI, radius, sweep: PI },
                Segment::Line { start: [-half, 0.0], heading: 0.0, length: half },
            ];
            (segs, true)
        }
        TrackShape::Circle { radius } => (vec![Segment::Arc { start: [0.0, 0.0], heading: 0.0, radius, sweep: TAU }], true),
        TrackShape::Straight { length } => (vec![Segment::Line { start: [0.0, 0.0], heading: 0.0, length }], false),
    }
}

fn check(params: &TrackParams) -> Result<(), SimError> {
    let bad = |name: &str, why: &str| Err(SimError::InfeasibleParams(format!("{name}: {why}")));
    if !(params.width > 0.0) {
        return bad("width", "must be positive");
    }
    if !(params.spacing > 0.0) {
        return bad("spacing", "must be positive");
    }
    if !(params.cone_jitter >= 0.0) {
        return bad("cone_jitter", "must be non-negative");
    }
    let sc = params.scenery;
    if sc.enabled {
        let sizes = [sc.spacing, sc.length, sc.depth, sc.height];
        if !(sc.clearance > params.width && sizes.iter().all(|v| *v > 0.0) && sc.offset_jitter >= 0.0 && sc.yaw_jitter_deg >= 0.0) {
            return bad("scenery", "clearance must exceed the width; sizes must be positive");
        }
    }
    match params.shape {
        TrackShape::Stadium { radius, straight } => {
            if !(radius > params.width) {
                return bad("radius", "turn radius must exceed the track width");
            }
            if !(straight >= 0.0) {
                return bad("straight", "must be non-negative");
            }
        }
        TrackShape::Circle { radius } => {
            if !(radius > params.width) {
                return bad("radius", "turn radius must exceed the track width");
            }
        }
        TrackShape::Straight { length } => {
            if !(length > 0.0) {
                return bad("length", "must be positive");
            }
        }
    }
    Ok(())
}

/// Lays out the track. Cone pairs are spread evenly around closed loops,
/// `⌈L / spacing⌉` of them; the pair at the start is yellow, then red on
/// the left and blue on the right in the driving direction.
pub fn generate_track(params: &TrackParams, seed: u64) -> Result<TrackDefinition, SimError> {
    check(params)?;
    let (segments, closed) = segments_of(&params.shape);
    let mut track = TrackDefinition { params: params.clone(), segments, closed, cones: Vec::new(), objects: Vec::new() };
    let length = track.length();
    let (pairs, step) = if closed {
        let n = (length / params.spacing).ceil() as usize;
        (n, length / n as f64)
    } else {
        ((length / params.spacing).floor() as usize + 1, params.spacing)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, params.cone_jitter.max(0.0)).expect("finite sigma");
    let half = params.width / 2.0;
    for i in 0..pairs {
        let s = i as f64 * step;
        for (offset, side) in [(half, ConeColor::Red), (-half, ConeColor::Blue)] {
            let color = if i == 0 { ConeColor::Yellow } else { side };
            let mut p = track.lateral(s, offset);
            if params.cone_jitter > 0.0 {
                p += Vector2::new(jitter.sample(&mut rng), jitter.sample(&mut rng));
            }
            track.cones.push(TruthCone { id: track.cones.len(), position: [p.x, p.y], color });
        }
    }

    for c in &track.cones {
        track.objects.push(WorldObject {
            kind: ObjectKind::Cone(c.color),
            solid: Solid::Cylinder { center: c.position, radius: CONE_RADIUS, height: CONE_HEIGHT },
        });
    }
    for d in &params.distractors {
        let obj = match *d {
            Distractor::TyreStack { s, offset, radius, height } => {
                let p = track.lateral(s, offset);
                WorldObject { kind: ObjectKind::TyreStack, solid: Solid::Cylinder { center: [p.x, p.y], radius, height } }
            }
            Distractor::Wall { s, offset, length, thickness, height } => {
                let p = track.lateral(s, offset);
                let yaw = track.at(s).heading;
                WorldObject {
                    kind: ObjectKind::Wall,
                    solid: Solid::Box { center: [p.x, p.y], half_length: length / 2.0, half_width: thickness / 2.0, height, yaw },
                }
            }
        };
        track.objects.push(obj);
    }
    if params.scenery.enabled {
        place_scenery(&mut track, &params.scenery, &mut rng);
    }
    Ok(track)
}

/// Buildings on both sides of the track, dropping any that would reach
/// into the clearance band or overlap an earlier one.
fn place_scenery(track: &mut TrackDefinition, sc: &Scenery, rng: &mut ChaCha8Rng) {
    let line = track.centerline(0.5);
    let clear = |p: &Vector2<f64>| line.iter().all(|c| (c - p).norm() >= sc.clearance);
    let n = (track.length() / sc.spacing).ceil() as usize;
    let mut placed: Vec<Vector2<f64>> = Vec::new();
    let reach = sc.length.hypot(sc.depth) / 2.0;
    for side in [-1.0, 1.0] {
        for i in 0..n {
            let s = i as f64 * sc.spacing;
            let offset = sc.offset + rng.random_range(-1.0..=1.0) * sc.offset_jitter;
            let yaw = track.at(s).heading + rng.random_range(-1.0..=1.0) * sc.yaw_jitter_deg.to_radians();
            let center = track.lateral(s, side * offset);
            let (c, sn) = (yaw.cos(), yaw.sin());
            let corners = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].map(|(a, b)| {
                let (l, w) = (a * sc.length / 2.0, b * sc.depth / 2.0);
                center + Vector2::new(c * l - sn * w, sn * l + c * w)
            });
            if corners.iter().all(&clear) && placed.iter().all(|q| (q - center).norm() >= 2.0 * reach) {
                placed.push(center);
                track.objects.push(WorldObject {
                    kind: ObjectKind::Wall,
                    solid: Solid::Box {
                        center: [center.x, center.y],
                        half_length: sc.length / 2.0,
                        half_width: sc.depth / 2.0,
                        height: sc.height,
                        yaw,
                    },
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(r: f64) -> TrackParams {
        TrackParams { shape: TrackShape::Circle { radius: r }, distractors: Vec::new(), ..TrackParams::default() }
    }

    #[test]
    fn circle_cone_count_follows_arc_length() {
        let t = generate_track(&circle(20.0), 1).unwrap();
        let expected = 2 * (TAU * 20.0 / 5.0_f64).ceil() as usize;
        assert_eq!(t.cones.len(), expected);
        // counterclockwise: red (left) cones sit inside the circle
        let center = Vector2::new(0.0, 20.0);
        for c in &t.cones {
            let r = (Vector2::from(c.position) - center).norm();
            match c.color {
                ConeColor::Red => assert!((r - 18.0).abs() < 1e-9),
                ConeColor::Blue => assert!((r - 22.0).abs() < 1e-9),
                ConeColor::Yellow => assert!((r - 18.0).abs() < 1e-9 || (r - 22.0).abs() < 1e-9),
                ConeColor::Unknown => unreachable!(),
            }
        }
        assert_eq!(t.cones.iter().filter(|c| c.color == ConeColor::Yellow).count(), 2);
    }

    #[test]
    fn tight_radius_is_infeasible() {
        let err = generate_track(&circle(3.5), 1).unwrap_err();
        assert!(matches!(err, SimError::InfeasibleParams(ref m) if m.starts_with("radius")));
    }

    #[test]
    fn same_seed_same_track() {
        let p = TrackParams { cone_jitter: 0.05, ..TrackParams::default() };
        assert_eq!(generate_track(&p, 9).unwrap(), generate_track(&p, 9).unwrap());
        assert_ne!(generate_track(&p, 9).unwrap(), generate_track(&p, 10).unwrap());
    }

    #[test]
    fn stadium_is_closed_and_continuous() {
        let t = generate_track(&TrackParams::default(), 0).unwrap();
        assert!((t.length() - (2.0 * 52.9 + TAU * 15.0)).abs() < 1e-9);
        assert!((t.at(t.length()).position - t.at(0.0).position).norm() < 1e-9);
        let mut prev = t.at(0.0);
        for i in 1..=2000 {
            let c = t.at(t.length() * i as f64 / 2000.0);
            let step = (c.position - prev.position).norm();
            assert!(step < t.length() / 2000.0 + 1e-9);
            prev = c;
        }
        assert!(t.cones.len() >= 40);
    }

    #[test]
    fn buildings_keep_clear_of_the_track() {
        let t = generate_track(&TrackParams::default(), 4).unwrap();
        let line = t.centerline(0.25);
        let buildings: Vec<&WorldObject> = t.objects.iter().filter(|o| o.kind == ObjectKind::Wall).collect();
        assert!(buildings.len() >= 10);
        for b in buildings {
            let Solid::Box { center, half_length, half_width, yaw, .. } = b.solid else { panic!("buildings are boxes") };
            for (a, c) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let (l, w) = (a * half_length, c * half_width);
                let corner = Vector2::from(center) + Vector2::new(yaw.cos() * l - yaw.sin() * w, yaw.sin() * l + yaw.cos() * w);
                assert!(line.iter().all(|p| (p - corner).norm() >= 15.0 - 0.05));
            }
        }
    }
}
