//! Histogram-of-oriented-gradients descriptor.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::image::GrayImage;
use super::VisionError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HogConfig {
    /// Side of the square detection window the region is resized to (px).
    pub window: u32,
    /// Side of a square cell (px).
    pub cell: u32,
    /// Unsigned orientation bins over `[0°, 180°)`.
    pub bins: usize,
    /// Side of a square block, in cells. Blocks step by one cell.
    pub block: u32,
    /// Regularizer of the block L2 normalization.
    pub epsilon: f64,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self { window: 64, cell: 8, bins: 9, block: 2, epsilon: 1e-3 }
    }
}

impl HogConfig {
    pub fn validate(&self) -> Result<(), VisionError> {
        let ok = self.cell > 0
            && self.window.is_multiple_of(self.cell)
            && self.block > 0
            && self.block <= self.window / self.cell
            && self.bins > 0
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(VisionError::InvalidConfig("inconsistent HOG geometry"))
        }
    }

    pub fn cells_per_side(&self) -> usize {
        (self.window / self.cell) as usize
    }

    pub fn blocks_per_side(&self) -> usize {
        self.cells_per_side() - self.block as usize + 1
    }

    pub fn descriptor_len(&self) -> usize {
        let b = self.block as usize;
        self.blocks_per_side().pow(2) * b * b * self.bins
    }

    /// Hex SHA-256 over every setting that changes the descriptor layout or
    /// values, so a model cannot be applied to foreign descriptors.
    pub fn config_hash(&self) -> String {
        let canonical = format!(
            "hog-v1;window={};cell={};bins={};block={};stride=1;gradient=centered;orientation=unsigned;binning=hard;norm=l2;epsilon={:e};gray=bt601;resize=bilinear",
            self.window, self.cell, self.bins, self.block, self.epsilon
        );
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Gradient magnitude and unsigned orientation bin of every pixel, with
/// centered differences and replicated borders.
fn gradients(img: &GrayImage, bins: usize) -> Vec<(f64, usize)> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity((w * h) as usize);
    for v in 0..h {
        for u in 0..w {
            let gx = img.get((u + 1).min(w - 1), v) - img.get(u.saturating_sub(1), v);
            let gy = img.get(u, (v + 1).min(h - 1)) - img.get(u, v.saturating_sub(1));
            let mag = gx.hypot(gy);
            let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let bin = ((angle / (180.0 / bins as f64)) as usize).min(bins - 1);
            out.push((mag, bin));
        }
    }
    out
}

/// Descriptor of a grayscale region after resizing it to the window.
pub fn hog_descriptor(region: &GrayImage, cfg: &HogConfig) -> Result<Vec<f64>, VisionError> {
    cfg.validate()?;
    if region.is_empty() {
        return Err(VisionError::EmptyRegion);
    }
    let img = region.resize(cfg.window, cfg.window);
    let grads = gradients(&img, cfg.bins);
    let cells = cfg.cells_per_side();
    let cell = cfg.cell as usize;
    let win = cfg.window as usize;

    let mut hist = vec![0.0; cells * cells * cfg.bins];
    for v in 0..win {
        for u in 0..win {
            let (mag, bin) = grads[v * win + u];
            hist[((v / cell) * cells + u / cell) * cfg.bins + bin] += mag;
        }
    }

    let b = cfg.block as usize;
    let mut out = Vec::with_capacity(cfg.descriptor_len());
    let mut block = Vec::with_capacity(b * b * cfg.bins);
    for by in 0..cfg.blocks_per_side() {
        for bx in 0..cfg.blocks_per_side() {
            block.clear();
            for cy in by..by + b {
                for cx in bx..bx + b {
                    let start = (cy * cells + cx) * cfg.bins;
                    block.extend_from_slice(&hist[start..start + cfg.bins]);
                }
            }
            let norm = (block.iter().map(|x| x * x).sum::<f64>() + cfg.epsilon * cfg.epsilon).sqrt();
            out.extend(block.iter().map(|x| x / norm));
        }
    }
    Ok(out)
}
