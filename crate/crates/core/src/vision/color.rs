//! RGB to HSV conversion and two-cluster dominant-colour extraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::VisionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RgbPixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl From<[u8; 3]> for RgbPixel {
    fn from([r, g, b]: [u8; 3]) -> Self {
        Self { r, g, b }
    }
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvPixel {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

pub fn rgb_to_hsv(p: RgbPixel) -> HsvPixel {
    let r = p.r as f64 / 255.0;
    let g = p.g as f64 / 255.0;
    let b = p.b as f64 / 255.0;
    let c_max = r.max(g).max(b);
    let c_min = r.min(g).min(b);
    let delta = c_max - c_min;
    let h = if delta == 0.0 {
        0.0
    } else if c_max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if c_max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if c_max == 0.0 { 0.0 } else { delta / c_max };
    HsvPixel { h: if h >= 360.0 { h - 360.0 } else { h }, s, v: c_max }
}

/// Inverse conversion, rounding to the nearest 8-bit channel value.
pub fn hsv_to_rgb(p: HsvPixel) -> RgbPixel {
    let c = p.v * p.s;
    let h = p.h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (h.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = p.v - c;
    let q = |ch: f64| ((ch + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    RgbPixel { r: q(r), g: q(g), b: q(b) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeColor {
    /// Left track boundary.
    Red,
    /// Right track boundary.
    Blue,
    /// Start and finish line.
    Yellow,
    Unknown,
}

impl ConeColor {
    pub fn from_hue(h: f64) -> Self {
        let h = h.rem_euclid(360.0);
        if !(20.0..340.0).contains(&h) {
            ConeColor::Red
        } else if (40.0..70.0).contains(&h) {
            ConeColor::Yellow
        } else if (200.0..260.0).contains(&h) {
            ConeColor::Blue
        } else {
            ConeColor::Unknown
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ConeColor::Red => "red",
            ConeColor::Blue => "blue",
            ConeColor::Yellow => "yellow",
            ConeColor::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColorConfig {
    pub k: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Paint clusters less saturated than this are reported as Unknown.
    pub min_saturation: f64,
}

impl Default for ColorConfig {
    fn default() -> Self {
        Self { k: 2, max_iterations: 100, seed: 7, min_saturation: 0.15 }
    }
}

/// k-means feature of a pixel: hue on the unit circle plus saturation.
fn embed(p: &HsvPixel) -> [f64; 3] {
    let h = p.h.to_radians();
    [h.cos(), h.sin(), p.s]
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centers: Vec<[f64; 3]>,
    pub assignment: Vec<usize>,
}

/// Lloyd's algorithm with k-means++ seeding from a fixed seed.
pub fn kmeans(features: &[[f64; 3]], k: usize, max_iterations: usize, seed: u64) -> KMeans {
    let n = features.len();
    if n == 0 || k == 0 {
        return KMeans { centers: Vec::new(), assignment: Vec::new() };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![features[rng.random_range(0..n)]];
    while centers.len() < k {
        let d: Vec<f64> = features.iter().map(|f| centers.iter().map(|c| dist2(f, c)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d.iter().sum();
        if total == 0.0 {
            centers.push(centers[0]);
            continue;
        }
        let mut target = rng.random_range(0.0..total);
        let mut pick = n - 1;
        for (i, di) in d.iter().enumerate() {
            if target < *di {
                pick = i;
                break;
            }
            target -= di;
        }
        centers.push(features[pick]);
    }

    let nearest = |f: &[f64; 3], centers: &[[f64; 3]]| {
        (0..centers.len()).min_by(|&a, &b| dist2(f, &centers[a]).total_cmp(&dist2(f, &centers[b]))).unwrap_or(0)
    };
    let mut assignment: Vec<usize> = features.iter().map(|f| nearest(f, &centers)).collect();
    for _ in 0..max_iterations {
        let mut sums = vec![[0.0; 3]; k];
        let mut counts = vec![0usize; k];
        for (f, &a) in features.iter().zip(&assignment) {
            (0..3).for_each(|i| sums[a][i] += f[i]);
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].map(|s| s / counts[c] as f64);
            }
        }
        let next: Vec<usize> = features.iter().map(|f| nearest(f, &centers)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    KMeans { centers, assignment }
}

/// Colour of the cone paint in a region: the k-means cluster with the
/// highest mean saturation, its saturation-weighted mean hue read through
/// the hue bands. Brightness is not used.
pub fn dominant_color(pixels: &[HsvPixel], cfg: &ColorConfig) -> Result<ConeColor, VisionError> {
    if pixels.is_empty() {
        return Err(VisionError::EmptyRegion);
    }
    let features: Vec<[f64; 3]> = pixels.iter().map(embed).collect();
    let km = kmeans(&features, cfg.k.max(1), cfg.max_iterations, cfg.seed);
    let mut sums = vec![[0.0; 3]; km.centers.len()];
    let mut counts = vec![0usize; km.centers.len()];
    for (f, &a) in features.iter().zip(&km.assignment) {
        (0..3).for_each(|i| sums[a][i] += f[i]);
        counts[a] += 1;
    }
    let paint = (0..sums.len())
        .filter(|&c| counts[c] > 0)
        .max_by(|&a, &b| (sums[a][2] / counts[a] as f64).total_cmp(&(sums[b][2] / counts[b] as f64)).then(b.cmp(&a)))
        .ok_or(VisionError::EmptyRegion)?;
    let n = counts[paint] as f64;
    if sums[paint][2] / n < cfg.min_saturation {
        return Ok(ConeColor::Unknown);
    }
    // Hue means nothing at zero saturation, so each pixel votes with its
    // chroma. White or black markings inside the paint cluster then leave
    // the hue alone.
    let (mut cx, mut cy) = (0.0, 0.0);
    for (f, _) in features.iter().zip(&km.assignment).filter(|(_, &a)| a == paint) {
        cx += f[2] * f[0];
        cy += f[2] * f[1];
    }
    let hue = cy.atan2(cx).to_degrees().rem_euclid(360.0);
    Ok(ConeColor::from_hue(hue))
}
