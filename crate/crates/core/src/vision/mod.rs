//! Camera-side verification of LIDAR cone candidates.

pub mod color;
pub mod hog;
pub mod homography;
pub mod image;
pub mod svm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::Cluster;
use crate::geometry::Point3;
pub use color::{dominant_color, rgb_to_hsv, ColorConfig, ConeColor, HsvPixel, RgbPixel};
pub use hog::{hog_descriptor, HogConfig};
pub use homography::{
    apply_homography, estimate_homography, roi_for_candidate, ConeDims, Correspondence, GroundProjector, Homography,
};
pub use image::{GrayImage, PixelBox, RgbImage};
pub use svm::{svm_classify, SvmDecision, SvmModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VisionError {
    #[error("correspondences are collinear or coincident")]
    DegenerateConfiguration,
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("candidate lies behind the camera")]
    BehindCamera,
    #[error("candidate box falls outside the image")]
    OutOfImage,
    #[error("image region is empty")]
    EmptyRegion,
    #[error("feature length {found} does not match model length {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("model was trained for descriptor {model}, not {descriptor}")]
    ConfigMismatch { model: String, descriptor: String },
    #[error("invalid SVM model: {0}")]
    InvalidModel(&'static str),
    #[error("invalid vision configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
}

/// Supplies pixels for a candidate's image box. A camera frame crops the
/// box; a renderer may synthesize the patch from the ground position.
pub trait ImageSource: Sync {
    fn region(&self, roi: &PixelBox, ground_xy: [f64; 2]) -> Option<RgbImage>;
}

impl ImageSource for RgbImage {
    fn region(&self, roi: &PixelBox, _ground_xy: [f64; 2]) -> Option<RgbImage> {
        self.crop(roi)
    }
}

/// Four image/ground pairs with the homography derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub pairs: [Correspondence; 4],
    pub homography: Homography,
    pub image_width: u32,
    pub image_height: u32,
}

impl Calibration {
    pub fn new(pairs: [Correspondence; 4], image_width: u32, image_height: u32) -> Result<Self, VisionError> {
        let homography = estimate_homography(&pairs)?;
        Ok(Self { pairs, homography, image_width, image_height })
    }

    pub fn projector(&self) -> Result<GroundProjector, VisionError> {
        GroundProjector::new(&self.homography, &self.pairs, self.image_width, self.image_height)
    }

    /// `image W H` line, one `u v x y` line per pair, then the nine
    /// homography entries row by row on an `H` line.
    pub fn to_text(&self) -> String {
        let mut s = format!("image {} {}\n", self.image_width, self.image_height);
        for p in &self.pairs {
            s.push_str(&format!("{:?} {:?} {:?} {:?}\n", p.image[0], p.image[1], p.ground[0], p.ground[1]));
        }
        let m = self.homography.matrix();
        let entries: Vec<String> = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).map(|(r, c)| format!("{:?}", m[(r, c)])).collect();
        s.push_str(&format!("H {}\n", entries.join(" ")));
        s
    }

    /// Parses the text form; the homography is re-derived from the pairs
    /// and must agree with the stored one.
    pub fn from_text(text: &str) -> Result<Self, VisionError> {
        let bad = |m: &str| VisionError::InvalidCalibration(m.to_owned());
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let size: Vec<u32> = lines
            .next()
            .and_then(|l| l.strip_prefix("image"))
            .ok_or_else(|| bad("missing image line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad image size")))
            .collect::<Result<_, _>>()?;
        if size.len() != 2 {
            return Err(bad("image line needs width and height"));
        }
        let mut pairs = [Correspondence { image: [0.0; 2], ground: [0.0; 2] }; 4];
        for pair in &mut pairs {
            let v: Vec<f64> = lines
                .next()
                .ok_or_else(|| bad("expected four pairs"))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad pair value")))
                .collect::<Result<_, _>>()?;
            if v.len() != 4 {
                return Err(bad("pair line needs u v x y"));
            }
            *pair = Correspondence { image: [v[0], v[1]], ground: [v[2], v[3]] };
        }
        let cal = Self::new(pairs, size[0], size[1])?;
        if let Some(h) = lines.next() {
            let v: Vec<f64> = h
                .strip_prefix('H')
                .ok_or_else(|| bad("expected H line"))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad H entry")))
                .collect::<Result<_, _>>()?;
            let m = cal.homography.matrix();
            let scale = m.abs().max().max(1.0);
            if v.len() != 9 || (0..9).any(|i| (v[i] - m[(i / 3, i % 3)]).abs() > 1e-6 * scale) {
                return Err(bad("stored H disagrees with the pairs"));
            }
        }
        Ok(cal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisionConfig {
    #[serde(default)]
    pub hog: HogConfig,
    #[serde(default)]
    pub color: ColorConfig,
    #[serde(default)]
    pub cone: ConeDims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    BehindCamera,
    OutOfImage,
    EmptyRegion,
    NotCone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedCone {
    /// Index into the candidate list.
    pub index: usize,
    pub position: Point3,
    pub color: ConeColor,
    pub margin: f64,
    pub roi: PixelBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub index: usize,
    pub position: Point3,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Verification {
    pub verified: Vec<VerifiedCone>,
    pub dropped: Vec<DroppedCandidate>,
}

fn verify_one(
    index: usize,
    candidate: &Cluster,
    source: &dyn ImageSource,
    projector: &GroundProjector,
    model: &SvmModel,
    cfg: &VisionConfig,
) -> Result<Result<VerifiedCone, DropReason>, VisionError> {
    let ground = [candidate.centroid.x, candidate.centroid.y];
    let roi = match roi_for_candidate(ground, projector, &cfg.cone) {
        Ok(b) => b,
        Err(VisionError::BehindCamera) => return Ok(Err(DropReason::BehindCamera)),
        Err(VisionError::OutOfImage) => return Ok(Err(DropReason::OutOfImage)),
        Err(e) => return Err(e),
    };
    let Some(patch) = source.region(&roi, ground).filter(|p| !p.is_empty()) else {
        return Ok(Err(DropReason::EmptyRegion));
    };
    let descriptor = hog_descriptor(&patch.to_gray(), &cfg.hog)?;
    let decision = svm_classify(&descriptor, model)?;
    if !decision.is_cone {
        return Ok(Err(DropReason::NotCone));
    }
    let hsv: Vec<HsvPixel> = patch.pixels().iter().map(|p| rgb_to_hsv(RgbPixel::from(*p))).collect();
    let color = dominant_color(&hsv, &cfg.color)?;
    Ok(Ok(VerifiedCone { index, position: candidate.centroid, color, margin: decision.margin, roi }))
}

/// Projects each candidate into the image, keeps those the SVM accepts and
/// labels them with their paint colour. Output preserves candidate order.
pub fn verify_candidates(
    candidates: &[Cluster],
    source: &dyn ImageSource,
    projector: &GroundProjector,
    model: &SvmModel,
    cfg: &VisionConfig,
) -> Result<Verification, VisionError> {
    cfg.hog.validate()?;
    model.check_hash(&cfg.hog.config_hash())?;
    if model.weights.len() != cfg.hog.descriptor_len() {
        return Err(VisionError::DimensionMismatch { expected: model.weights.len(), found: cfg.hog.descriptor_len() });
    }
    let results: Vec<_> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| verify_one(i, c, source, projector, model, cfg))
        .collect::<Result<_, _>>()?;
    let mut out = Verification::default();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.verified.push(v),
            Err(reason) => out.dropped.push(DroppedCandidate { index, position: candidates[index].centroid, reason }),
        }
    }
    Ok(out)
}
