//! Synthetic camera patches for cone candidates.
//!
//! A patch is rendered at the size of the candidate's image box. The box
//! layout mirrors the ROI sizing in the vision module: the object fills the
//! unpadded centre and stands on the box's lower padding line.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use conetrack_core::vision::color::{hsv_to_rgb, HsvPixel};
use conetrack_core::vision::{ConeColor, ConeDims, ImageSource, PixelBox, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKind {
    Cone(ConeColor),
    TyreStack,
    Wall,
    Background,
}

fn paint_hue(color: ConeColor) -> f64 {
    match color {
        ConeColor::Red => 2.0,
        ConeColor::Yellow => 52.0,
        ConeColor::Blue => 228.0,
        ConeColor::Unknown => 30.0,
    }
}

/// Renders `kind` into a `width × height` box. `lighting` scales the value
/// channel only.
pub fn render_patch(kind: PatchKind, width: u32, height: u32, lighting: f64, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let pad = ConeDims::default().padding;
    let scale = 1.0 + 2.0 * pad;
    // object box inside the padded patch
    let (left, right) = (w * pad / scale, w * (1.0 + pad) / scale);
    let (top, base) = (h * pad / scale, h * (1.0 + pad) / scale);
    let hue_shift = rng.random_range(-5.0..5.0);
    let grass_hue = 100.0 + rng.random_range(-10.0..10.0);

    let mut data = Vec::with_capacity(width as usize * height as usize);
    for v in 0..height {
        for u in 0..width {
            let (x, y) = (u as f64 + 0.5, v as f64 + 0.5);
            let mut jitter = |a: f64| rng.random_range(-a..a);
            let grass = HsvPixel { h: grass_hue + jitter(6.0), s: 0.3 + jitter(0.05), v: 0.45 + jitter(0.05) };
            let px = match kind {
                PatchKind::Cone(color) if y >= top && y < base => {
                    let f = (y - top) / (base - top);
                    let half = (right - left) / 2.0 * (0.25 + 0.75 * f);
                    if (x - w / 2.0).abs() <= half && (0.4..0.6).contains(&f) {
                        // reflective collar
                        HsvPixel { h: 0.0, s: 0.03 + jitter(0.02), v: 0.95 + jitter(0.03) }
                    } else if (x - w / 2.0).abs() <= half {
                        HsvPixel { h: paint_hue(color) + hue_shift + jitter(2.0), s: 0.9 + jitter(0.05), v: 0.85 + jitter(0.05) }
                    } else {
                        grass
                    }
                }
                PatchKind::TyreStack if y < base => {
                    // stacked tyres read as dark bands with lighter seams
                    let band = ((base - y) / (base - top) * 3.0).fract();
                    let v = if band < 0.15 { 0.3 } else { 0.1 };
                    HsvPixel { h: 20.0, s: 0.05 + jitter(0.03), v: v + jitter(0.03) }
                }
                PatchKind::Wall if y < base => HsvPixel { h: 40.0, s: 0.05 + jitter(0.02), v: 0.6 + jitter(0.05) },
                _ => grass,
            };
            let px = HsvPixel { h: px.h.rem_euclid(360.0), s: px.s.clamp(0.0, 1.0), v: (px.v * lighting).clamp(0.0, 1.0) };
            let rgb = hsv_to_rgb(px);
            data.push([rgb.r, rgb.g, rgb.b]);
        }
    }
    RgbImage::new(width, height, data).expect("sized buffer")
}

/// Box size in pixels of a cone seen face-on at `range` by a camera with
/// focal length `focal`.
pub fn patch_size(range: f64, focal: f64) -> (u32, u32) {
    let dims = ConeDims::default();
    let scale = 1.0 + 2.0 * dims.padding;
    let px = focal / range;
    let w = (dims.width * scale * px).round().max(2.0) as u32;
    let h = (dims.height * scale * px).round().max(2.0) as u32;
    (w, h)
}

/// A cone patch at `range` for the default 600 px camera.
pub fn render_cone_patch(color: ConeColor, range: f64, lighting: f64, seed: u64) -> RgbImage {
    let (w, h) = patch_size(range, 600.0);
    render_patch(PatchKind::Cone(color), w, h, lighting, seed)
}

/// Renders candidate boxes from the objects near each candidate.
pub struct PatchSource {
    /// Object centres in the LIDAR frame of the current scan.
    pub objects: Vec<(Vector2<f64>, PatchKind)>,
    pub lighting: f64,
    pub seed: u64,
    /// How far a candidate may sit from an object and still show it (m).
    pub match_radius: f64,
}

impl PatchSource {
    pub fn new(objects: Vec<(Vector2<f64>, PatchKind)>, lighting: f64, seed: u64) -> Self {
        Self { objects, lighting, seed, match_radius: 0.75 }
    }

    pub fn kind_at(&self, xy: [f64; 2]) -> PatchKind {
        let p = Vector2::from(xy);
        self.objects
            .iter()
            .map(|(c, k)| ((c - p).norm(), *k))
            .filter(|(d, _)| *d <= self.match_radius)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map_or(PatchKind::Background, |(_, k)| k)
    }
}

impl ImageSource for PatchSource {
    fn region(&self, roi: &PixelBox, ground_xy: [f64; 2]) -> Option<RgbImage> {
        let seed = self.seed ^ ((roi.u_min as u64) << 32 | roi.v_min as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Some(render_patch(self.kind_at(ground_xy), roi.width(), roi.height(), self.lighting, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use conetrack_core::vision::color::rgb_to_hsv;
    use conetrack_core::vision::{dominant_color, ColorConfig, RgbPixel};

    fn color_of(img: &RgbImage) -> ConeColor {
        let hsv: Vec<HsvPixel> = img.pixels().iter().map(|p| rgb_to_hsv(RgbPixel::from(*p))).collect();
        dominant_color(&hsv, &ColorConfig::default()).unwrap()
    }

    #[test]
    fn painted_cones_read_back_their_colour() {
        for color in [ConeColor::Red, ConeColor::Blue, ConeColor::Yellow] {
            for lighting in [0.4, 1.0] {
                assert_eq!(color_of(&render_cone_patch(color, 6.0, lighting, 3)), color, "{color:?} at {lighting}");
            }
        }
    }

    #[test]
    fn lighting_leaves_hue_and_saturation_alone() {
        let bright = render_patch(PatchKind::Cone(ConeColor::Red), 30, 40, 1.0, 9);
        let dim = render_patch(PatchKind::Cone(ConeColor::Red), 30, 40, 0.5, 9);
        let vb: f64 = bright.pixels().iter().map(|p| rgb_to_hsv(RgbPixel::from(*p)).v).sum();
        let vd: f64 = dim.pixels().iter().map(|p| rgb_to_hsv(RgbPixel::from(*p)).v).sum();
        assert!((vd / vb - 0.5).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_pixels() {
        assert_eq!(render_cone_patch(ConeColor::Blue, 8.0, 0.7, 4), render_cone_patch(ConeColor::Blue, 8.0, 0.7, 4));
    }

    #[test]
    fn source_picks_the_nearest_object() {
        let src = PatchSource::new(
            vec![(Vector2::new(5.0, 1.0), PatchKind::Cone(ConeColor::Red)), (Vector2::new(5.0, -1.0), PatchKind::TyreStack)],
            1.0,
            0,
        );
        assert_eq!(src.kind_at([5.1, 0.9]), PatchKind::Cone(ConeColor::Red));
        assert_eq!(src.kind_at([5.0, -0.8]), PatchKind::TyreStack);
        assert_eq!(src.kind_at([9.0, 0.0]), PatchKind::Background);
    }
}
