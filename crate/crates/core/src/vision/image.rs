//! Minimal raster types for region-of-interest processing.

use serde::{Deserialize, Serialize};

/// Half-open pixel rectangle `[u_min, u_max) × [v_min, v_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub u_min: u32,
    pub v_min: u32,
    pub u_max: u32,
    pub v_max: u32,
}

impl PixelBox {
    /// Rounds outward and clamps to a `width × height` image; `None` when
    /// nothing of the box remains.
    pub fn clamped(u_min: f64, v_min: f64, u_max: f64, v_max: f64, width: u32, height: u32) -> Option<Self> {
        if ![u_min, v_min, u_max, v_max].iter().all(|c| c.is_finite()) {
            return None;
        }
        let clamp = |x: f64, hi: u32| x.max(0.0).min(hi as f64) as u32;
        let b = Self {
            u_min: clamp(u_min.floor(), width),
            v_min: clamp(v_min.floor(), height),
            u_max: clamp(u_max.ceil(), width),
            v_max: clamp(v_max.ceil(), height),
        };
        (b.u_min < b.u_max && b.v_min < b.v_max).then_some(b)
    }

    pub fn width(&self) -> u32 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> u32 {
        self.v_max - self.v_min
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u_min as f64 && u < self.u_max as f64 && v >= self.v_min as f64 && v < self.v_max as f64
    }
}

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<[u8; 3]>) -> Option<Self> {
        (data.len() == width as usize * height as usize).then_some(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        Self { width, height, data: vec![color; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }

    pub fn get(&self, u: u32, v: u32) -> [u8; 3] {
        self.data[v as usize * self.width as usize + u as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, c: [u8; 3]) {
        let w = self.width as usize;
        self.data[v as usize * w + u as usize] = c;
    }

    pub fn crop(&self, b: &PixelBox) -> Option<RgbImage> {
        if b.u_max > self.width || b.v_max > self.height || b.u_min >= b.u_max || b.v_min >= b.v_max {
            return None;
        }
        let data = (b.v_min..b.v_max).flat_map(|v| (b.u_min..b.u_max).map(move |u| (u, v))).map(|(u, v)| self.get(u, v)).collect();
        Some(Self { width: b.width(), height: b.height(), data })
    }

    /// Luma in `[0, 1]` with the ITU-R BT.601 weights.
    pub fn to_gray(&self) -> GrayImage {
        let data = self
            .data
            .iter()
            .map(|[r, g, b]| (0.299 * *r as f64 + 0.587 * *g as f64 + 0.114 * *b as f64) / 255.0)
            .collect();
        GrayImage { width: self.width, height: self.height, data }
    }
}

/// Floating-point grayscale image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Option<Self> {
        (data.len() == width as usize * height as usize).then_some(Self { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> f64) -> Self {
        let data = (0..height).flat_map(|v| (0..width).map(move |u| (u, v))).map(|(u, v)| f(u, v)).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.data[v as usize * self.width as usize + u as usize]
    }

    /// Bilinear resampling with pixel centres aligned.
    pub fn resize(&self, width: u32, height: u32) -> GrayImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let (wmax, hmax) = (self.width - 1, self.height - 1);
        GrayImage::from_fn(width, height, |u, v| {
            let x = ((u as f64 + 0.5) * sx - 0.5).clamp(0.0, wmax as f64);
            let y = ((v as f64 + 0.5) * sy - 0.5).clamp(0.0, hmax as f64);
            let (x0, y0) = (x.floor() as u32, y.floor() as u32);
            let (x1, y1) = ((x0 + 1).min(wmax), (y0 + 1).min(hmax));
            let (fx, fy) = (x - x0 as f64, y - y0 as f64);
            let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
            let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
            top * (1.0 - fy) + bottom * fy
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_is_clamped_to_image() {
        let b = PixelBox::clamped(-5.2, 10.5, 30.1, 900.0, 20, 100).unwrap();
        assert_eq!(b, PixelBox { u_min: 0, v_min: 10, u_max: 20, v_max: 100 });
        assert!(PixelBox::clamped(25.0, 0.0, 30.0, 5.0, 20, 100).is_none());
    }

    #[test]
    fn crop_and_gray() {
        let mut img = RgbImage::filled(4, 3, [0, 0, 0]);
        img.set(2, 1, [255, 255, 255]);
        let c = img.crop(&PixelBox { u_min: 1, v_min: 1, u_max: 3, v_max: 3 }).unwrap();
        assert_eq!(c.pixels(), &[[0, 0, 0], [255, 255, 255], [0, 0, 0], [0, 0, 0]]);
        let g = c.to_gray();
        assert!((g.get(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resize_preserves_constant_and_linear_ramps() {
        let flat = GrayImage::from_fn(13, 7, |_, _| 0.4).resize(64, 64);
        assert!((0..64).all(|u| (flat.get(u, 10) - 0.4).abs() < 1e-12));
        let ramp = GrayImage::from_fn(64, 64, |u, _| u as f64).resize(32, 32);
        // pixel centre u' maps to source 2u' + 0.5
        assert!((ramp.get(5, 3) - 10.5).abs() < 1e-12);
    }
}
