//! File formats of datasets and run outputs.
//!
//! Scans and pose streams are plain text; maps, truth, manifests and
//! reports are pretty-printed JSON. Every writer's output parses back to a
//! value that writes the same bytes again.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use conetrack_core::geometry::{LidarPoint, PointCloud, Pose, Quaternion, RING_COUNT};
use conetrack_core::mapping::{Landmark, TrajectoryPoint};
use conetrack_core::odometry::{OdometryEstimate, PoseSource};
use conetrack_sim::TruthCone;

use crate::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn parse_err(what: &str, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse { file: what.to_owned(), line, message: message.into() }
}

fn numbers<T: std::str::FromStr>(what: &str, line: usize, text: &str, n: usize) -> Result<Vec<T>, CliError> {
    let v: Vec<T> = text
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(what, line, format!("bad number {t:?}"))))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(parse_err(what, line, format!("expected {n} fields, found {}", v.len())));
    }
    Ok(v)
}

/// Header lines `stamp`, `rings` and `points`, then one
/// `x y z ring intensity azimuth` record per point.
pub fn scan_to_text(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(72 * cloud.len() + 64);
    s.push_str(&format!("stamp {:.9}\nrings {RING_COUNT}\npoints {}\n", cloud.stamp, cloud.len()));
    for p in &cloud.points {
        let q = p.position;
        s.push_str(&format!("{:.9} {:.9} {:.9} {} {:.9} {:.9}\n", q.x, q.y, q.z, p.ring, p.intensity, p.azimuth));
    }
    s
}

pub fn scan_from_text(text: &str, what: &str) -> Result<PointCloud, CliError> {
    let mut lines = text.lines().enumerate();
    let mut header = |key: &str| -> Result<String, CliError> {
        let (i, l) = lines.next().ok_or_else(|| parse_err(what, 0, format!("missing {key} line")))?;
        l.strip_prefix(key)
            .map(|v| v.trim().to_owned())
            .ok_or_else(|| parse_err(what, i + 1, format!("expected {key} line")))
    };
    let stamp: f64 = header("stamp")?.parse().map_err(|_| parse_err(what, 1, "bad stamp"))?;
    let rings: u8 = header("rings")?.parse().map_err(|_| parse_err(what, 2, "bad ring count"))?;
    if rings != RING_COUNT {
        return Err(parse_err(what, 2, format!("expected {RING_COUNT} rings, found {rings}")));
    }
    let count: usize = header("points")?.parse().map_err(|_| parse_err(what, 3, "bad point count"))?;
    let mut points = Vec::with_capacity(count);
    for (i, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 6 {
            return Err(parse_err(what, i + 1, format!("expected 6 fields, found {}", f.len())));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| parse_err(what, i + 1, format!("bad number {:?}", f[k])));
        let ring: u8 = f[3].parse().map_err(|_| parse_err(what, i + 1, "bad ring"))?;
        let p = LidarPoint::new(Point3::new(num(0)?, num(1)?, num(2)?), ring, num(4)?, num(5)?)
            .map_err(|e| parse_err(what, i + 1, e.to_string()))?;
        points.push(p);
    }
    if points.len() != count {
        return Err(parse_err(what, 3, format!("header says {count} points, found {}", points.len())));
    }
    Ok(PointCloud::new(stamp, points))
}

/// The cloud as it reads back from its file.
pub fn quantize_scan(cloud: &PointCloud) -> PointCloud {
    scan_from_text(&scan_to_text(cloud), "scan").expect("scan text always parses")
}

/// One `stamp t_x t_y t_z x y z w source` line per record, shortest
/// round-trip floats.
pub fn poses_to_text(records: &[OdometryEstimate]) -> String {
    let mut s = String::new();
    for r in records {
        let (t, q) = (r.pose.translation, r.pose.orientation);
        s.push_str(&format!(
            "{:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {}\n",
            r.stamp,
            t.x,
            t.y,
            t.z,
            q.x,
            q.y,
            q.z,
            q.w,
            r.source.as_str()
        ));
    }
    s
}

pub fn poses_from_text(text: &str, what: &str) -> Result<Vec<OdometryEstimate>, CliError> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (nums, source) = l.trim().rsplit_once(' ').ok_or_else(|| parse_err(what, i + 1, "missing source"))?;
        let v: Vec<f64> = numbers(what, i + 1, nums, 8)?;
        let source = PoseSource::parse(source).ok_or_else(|| parse_err(what, i + 1, format!("unknown source {source:?}")))?;
        let q = Quaternion { x: v[4], y: v[5], z: v[6], w: v[7] };
        if !v.iter().all(|x| x.is_finite()) || (q.norm() - 1.0).abs() > 1e-6 {
            return Err(parse_err(what, i + 1, "pose must be finite with a unit quaternion"));
        }
        let pose = Pose { translation: Vector3::new(v[1], v[2], v[3]), orientation: q };
        out.push(OdometryEstimate { pose, stamp: v[0], source });
    }
    if out.windows(2).any(|w| !(w[1].stamp > w[0].stamp)) {
        return Err(parse_err(what, 0, "stamps must increase"));
    }
    Ok(out)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents always serialize");
    s.push('\n');
    s
}

pub fn from_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| parse_err(what, e.line(), e.to_string()))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    from_json(&read_text(path)?, &path.display().to_string())
}

/// A built cone map: landmarks and the trajectory that observed them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    pub config_hash: String,
    pub landmarks: Vec<Landmark>,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// An object the camera can image, positioned at its base centre in the initial frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthObject {
    pub kind: conetrack_sim::PatchKind,
    pub position: [f64; 3],
}

/// Cones the camera could see within range at one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthScan {
    pub stamp: f64,
    pub visible: Vec<usize>,
}

/// Simulator ground truth in the initial frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthDocument {
    pub config_hash: String,
    /// Cone landmarks. Ids match `visible` and `observed`.
    pub landmarks: Vec<TruthCone>,
    /// Every object the camera can image, cones included.
    pub objects: Vec<TruthObject>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub scans: Vec<TruthScan>,
    /// Ids of cones visible at some scan.
    pub observed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config_hash: String,
    pub scans: Vec<String>,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `text` under `dir` and returns its manifest entry.
pub fn write_entry(dir: &Path, rel: &str, text: &str) -> Result<ManifestEntry, CliError> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    write_text(&path, text)?;
    Ok(ManifestEntry { path: rel.to_owned(), sha256: sha256_hex(text.as_bytes()), bytes: text.len() as u64 })
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        if !path.is_file() {
            return Err(CliError::MissingFile(path));
        }
        let m: Manifest = load_json(&path)?;
        if m.scans.is_empty() {
            return Err(parse_err(MANIFEST, 0, "dataset lists no scans"));
        }
        Ok(m)
    }

    pub fn entry(&self, rel: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|e| e.path == rel)
    }

    /// Reads a listed file and checks its digest.
    pub fn read(&self, dir: &Path, rel: &str) -> Result<String, CliError> {
        let path: PathBuf = dir.join(rel);
        if !path.is_file() {
            return Err(CliError::MissingFile(path));
        }
        let text = read_text(&path)?;
        if let Some(e) = self.entry(rel) {
            if sha256_hex(text.as_bytes()) != e.sha256 {
                return Err(parse_err(rel, 0, "checksum differs from the manifest"));
            }
        }
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> PointCloud {
        let pts = (0..20)
            .map(|i| {
                let a = i as f64 * 0.3;
                LidarPoint::new(Point3::new(5.0 * a.cos(), 5.0 * a.sin(), -0.8 + 1e-10 * i as f64), (i % 16) as u8, 0.25 * i as f64, a)
                    .unwrap()
            })
            .collect();
        PointCloud::new(0.1 * 7.0, pts)
    }

    #[test]
    fn scan_text_round_trips_byte_exactly() {
        let text = scan_to_text(&cloud());
        let back = scan_from_text(&text, "t").unwrap();
        assert_eq!(scan_to_text(&back), text);
        assert_eq!(back.len(), 20);
        assert!(text.starts_with("stamp 0.700000000\nrings 16\npoints 20\n"));
        // values are kept to nine decimals
        assert!((back.points[3].position.z - cloud().points[3].position.z).abs() <= 5e-10);
        assert_eq!(quantize_scan(&back), back);
    }

    #[test]
    fn malformed_scans_report_the_line() {
        let text = scan_to_text(&cloud());
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        lines[3] = lines[3].replacen(" 0 ", " 0 nan? ", 1);
        let text = lines.join("\n");
        match scan_from_text(&text, "s") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(scan_from_text("stamp 1\nrings 32\npoints 0\n", "s").is_err());
        assert!(scan_from_text("stamp 1\nrings 16\npoints 2\n", "s").is_err());
    }

    #[test]
    fn pose_records_round_trip() {
        let pose = Pose::from_placement(Vector3::new(1.5, -2.25, 0.1), Quaternion::from_yaw(0.3));
        let recs = vec![
            OdometryEstimate { pose, stamp: 0.1, source: PoseSource::Gnss },
            OdometryEstimate { pose: Pose::IDENTITY, stamp: 0.2, source: PoseSource::Fused },
        ];
        let text = poses_to_text(&recs);
        let back = poses_from_text(&text, "p").unwrap();
        assert_eq!(back, recs);
        assert_eq!(poses_to_text(&back), text);
        assert!(poses_from_text("0.1 0 0 0 0 0 0 1 radar\n", "p").is_err());
        assert!(poses_from_text("0.2 0 0 0 0 0 0 1 gnss\n0.1 0 0 0 0 0 0 1 gnss\n", "p").is_err());
    }
}
