//! Plane-to-plane perspective map between the image and the ground plane.
//!
//! Stored in column form, `[x' y' w']ᵀ = M [u v 1]ᵀ`, which is the
//! transpose of the row-vector form `[u v 1] · M`.

use nalgebra::{Matrix2, Matrix3, SMatrix, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::image::PixelBox;
use super::VisionError;

/// One calibration pair: image pixel `(u, v)` and ground point `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub image: [f64; 2],
    pub ground: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    matrix: Matrix3<f64>,
}

fn collinear(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let (ab, ac) = (Vector2::new(b[0] - a[0], b[1] - a[1]), Vector2::new(c[0] - a[0], c[1] - a[1]));
    let scale = ab.norm() * ac.norm();
    scale == 0.0 || (ab.x * ac.y - ab.y * ac.x).abs() <= 1e-9 * scale
}

fn any_three_collinear(p: &[[f64; 2]; 4]) -> bool {
    [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)].iter().any(|&(a, b, c)| collinear(p[a], p[b], p[c]))
}

impl Homography {
    pub const IDENTITY: Homography = Homography { matrix: Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0) };

    /// Scales `m` so its bottom-right entry is 1.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, VisionError> {
        let a33 = m[(2, 2)];
        if !m.iter().all(|v| v.is_finite()) || a33.abs() < 1e-12 {
            return Err(VisionError::DegenerateConfiguration);
        }
        let matrix = m / a33;
        if matrix.determinant().abs() < 1e-12 {
            return Err(VisionError::DegenerateConfiguration);
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    /// Upper-left 2×2 linear block.
    pub fn linear(&self) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.matrix[(0, 2)], self.matrix[(1, 2)])
    }

    pub fn perspective(&self) -> Vector2<f64> {
        Vector2::new(self.matrix[(2, 0)], self.matrix[(2, 1)])
    }

    pub fn inverse(&self) -> Result<Self, VisionError> {
        let inv = self.matrix.try_inverse().ok_or(VisionError::DegenerateConfiguration)?;
        Self::from_matrix(inv)
    }

    /// Homogeneous product before division.
    pub fn apply_homogeneous(&self, p: [f64; 2]) -> Vector3<f64> {
        self.matrix * Vector3::new(p[0], p[1], 1.0)
    }

    pub fn apply(&self, p: [f64; 2]) -> Result<[f64; 2], VisionError> {
        let h = self.apply_homogeneous(p);
        if h.z.abs() < 1e-12 {
            return Err(VisionError::PointAtInfinity);
        }
        Ok([h.x / h.z, h.y / h.z])
    }
}

pub fn apply_homography(p: [f64; 2], h: &Homography) -> Result<[f64; 2], VisionError> {
    h.apply(p)
}

/// Solves the eight unknowns of the map taking each `image` point to its
/// `ground` point, with the last entry fixed at 1.
pub fn estimate_homography(pairs: &[Correspondence; 4]) -> Result<Homography, VisionError> {
    let src = pairs.map(|c| c.image);
    let dst = pairs.map(|c| c.ground);
    if any_three_collinear(&src) || any_three_collinear(&dst) {
        return Err(VisionError::DegenerateConfiguration);
    }
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for (k, c) in pairs.iter().enumerate() {
        let ([u, v], [x, y]) = (c.image, c.ground);
        let r = 2 * k;
        a.row_mut(r).copy_from_slice(&[u, v, 1.0, 0.0, 0.0, 0.0, -x * u, -x * v]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, u, v, 1.0, -y * u, -y * v]);
        b[r] = x;
        b[r + 1] = y;
    }
    let h = a.lu().solve(&b).ok_or(VisionError::DegenerateConfiguration)?;
    Homography::from_matrix(Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0))
}

/// Ground-to-image projection with a front/back test.
///
/// The scale of the inverse homography is fixed so that the calibration
/// ground points have positive `w'`; a candidate with `w' ≤ 0` then lies
/// behind the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundProjector {
    to_image: Matrix3<f64>,
    width: u32,
    height: u32,
}

impl GroundProjector {
    pub fn new(h: &Homography, calibration: &[Correspondence; 4], width: u32, height: u32) -> Result<Self, VisionError> {
        let inv = h.matrix.try_inverse().ok_or(VisionError::DegenerateConfiguration)?;
        let w: Vec<f64> = calibration.iter().map(|c| (inv * Vector3::new(c.ground[0], c.ground[1], 1.0)).z).collect();
        let sign = if w.iter().all(|w| *w > 0.0) {
            1.0
        } else if w.iter().all(|w| *w < 0.0) {
            -1.0
        } else {
            return Err(VisionError::DegenerateConfiguration);
        };
        if width == 0 || height == 0 {
            return Err(VisionError::EmptyRegion);
        }
        Ok(Self { to_image: inv * sign, width, height })
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Pixel of a ground point, or `BehindCamera`.
    pub fn project(&self, ground: [f64; 2]) -> Result<[f64; 2], VisionError> {
        let h = self.to_image * Vector3::new(ground[0], ground[1], 1.0);
        if h.z <= 1e-12 {
            return Err(VisionError::BehindCamera);
        }
        Ok([h.x / h.z, h.y / h.z])
    }

    /// Jacobian of the projection at a ground point (rows u, v; columns x, y).
    fn jacobian(&self, ground: [f64; 2]) -> Result<Matrix2<f64>, VisionError> {
        let h = self.to_image * Vector3::new(ground[0], ground[1], 1.0);
        if h.z <= 1e-12 {
            return Err(VisionError::BehindCamera);
        }
        let m = &self.to_image;
        let mut j = Matrix2::zeros();
        for c in 0..2 {
            j[(0, c)] = (m[(0, c)] * h.z - h.x * m[(2, c)]) / (h.z * h.z);
            j[(1, c)] = (m[(1, c)] * h.z - h.y * m[(2, c)]) / (h.z * h.z);
        }
        Ok(j)
    }
}

/// Physical size of a cone used to size its image box (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeDims {
    pub width: f64,
    pub height: f64,
    /// Fractional padding added on every side of the box.
    pub padding: f64,
}

impl Default for ConeDims {
    fn default() -> Self {
        Self { width: 0.2, height: 0.3, padding: 0.2 }
    }
}

/// Image box around a cone standing at `cone_xy` on the ground.
///
/// The base centre is projected exactly. The pixels-per-metre scale is taken
/// along the ground direction that maps to an image row, and the same scale
/// sizes the upright extent.
pub fn roi_for_candidate(cone_xy: [f64; 2], projector: &GroundProjector, dims: &ConeDims) -> Result<PixelBox, VisionError> {
    let [u0, v0] = projector.project(cone_xy)?;
    let j = projector.jacobian(cone_xy)?;
    // ground direction with no vertical image motion
    let d = Vector2::new(j[(1, 1)], -j[(1, 0)]);
    let d = if d.norm() > 0.0 { d / d.norm() } else { Vector2::new(0.0, 1.0) };
    let px_per_m = (j * d).norm();
    let (w, h) = (dims.width * px_per_m, dims.height * px_per_m);
    let (pad_u, pad_v) = (w * dims.padding, h * dims.padding);
    let u_min = u0 - w / 2.0 - pad_u;
    let u_max = u0 + w / 2.0 + pad_u;
    let v_min = v0 - h - pad_v;
    let v_max = v0 + pad_v;
    PixelBox::clamped(u_min, v_min, u_max, v_max, projector.width, projector.height).ok_or(VisionError::OutOfImage)
}
