//! Perspective normal computation, reprojection / projection / warping and
//! the warp Jacobian needed by the pose Gauss-Newton step.

use nalgebra::{Matrix3, SMatrix, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::grid::{CameraIntrinsics, ImageGrid};

/// Depths at or below this are treated as behind-camera / degenerate; such
/// pixels drop out of residual sums. Scenes are captured at 0.5-2 m, so the
/// threshold is far below any plausible depth.
pub const DEPTH_EPS: f64 = 1e-6;

/// Area elements below this flag the pixel as degenerate and remove it from
/// the normal field's mask.
pub const AREA_EPS: f64 = 1e-12;

/// One-axis finite-difference stencil at a pixel: forward differences with a
/// one-sided backward fallback at mask or image boundaries, zero (Neumann) if
/// neither neighbour is valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diff {
    Forward,
    Backward,
    None,
}

/// Stencil selection for both axes at a mask-valid pixel.
///
/// The same selection drives [`depth_gradient`], [`normals_from_depth`] and
/// the linearized depth subproblem, so the discretization is identical on
/// every path.
pub fn gradient_stencil<T: Copy + Default>(grid: &ImageGrid<T>, x: usize, y: usize) -> (Diff, Diff) {
    let (w, h) = grid.size();
    let dx = if x + 1 < w && grid.is_valid(x + 1, y) {
        Diff::Forward
    } else if x > 0 && grid.is_valid(x - 1, y) {
        Diff::Backward
    } else {
        Diff::None
    };
    let dy = if y + 1 < h && grid.is_valid(x, y + 1) {
        Diff::Forward
    } else if y > 0 && grid.is_valid(x, y - 1) {
        Diff::Backward
    } else {
        Diff::None
    };
    (dx, dy)
}

/// First-order depth gradient at a mask-valid pixel.
pub fn depth_gradient(z: &ImageGrid<f64>, x: usize, y: usize) -> (f64, f64) {
    let (sx, sy) = gradient_stencil(z, x, y);
    let zc = z.get(x, y, 0);
    let gx = match sx {
        Diff::Forward => z.get(x + 1, y, 0) - zc,
        Diff::Backward => zc - z.get(x - 1, y, 0),
        Diff::None => 0.0,
    };
    let gy = match sy {
        Diff::Forward => z.get(x, y + 1, 0) - zc,
        Diff::Backward => zc - z.get(x, y - 1, 0),
        Diff::None => 0.0,
    };
    (gx, gy)
}

/// Per-pixel unit normals `n`, area elements `dA` and the shared validity
/// mask. The unnormalized normal is recoverable as `n * dA`.
#[derive(Debug, Clone)]
pub struct NormalField {
    /// 3-channel grid of unit normals.
    pub normals: ImageGrid<f64>,
    /// 1-channel grid of area elements (the norm of the unnormalized normal).
    pub area: ImageGrid<f64>,
    /// Number of pixels flagged and removed for a degenerate area element.
    pub degenerate_count: usize,
}

/// Normals of a depth map under perspective projection:
/// `n_tilde = [f * grad z; -1 - <p - c, grad z>]`, `dA = |n_tilde|`,
/// `n = n_tilde / dA`.
pub fn normals_from_depth(z: &ImageGrid<f64>, k: &CameraIntrinsics) -> NormalField {
    let (w, h) = z.size();
    let mut normals = ImageGrid::<f64>::empty(w, h, 3);
    let mut area = ImageGrid::<f64>::empty(w, h, 1);
    let mut degenerate_count = 0usize;
    for (x, y) in z.valid_pixels() {
        let (gx, gy) = depth_gradient(z, x, y);
        let u = x as f64 - k.cx;
        let v = y as f64 - k.cy;
        let nx = k.f * gx;
        let ny = k.f * gy;
        let nz = -1.0 - (u * gx + v * gy);
        let da = (nx * nx + ny * ny + nz * nz).sqrt();
        if da < AREA_EPS {
            degenerate_count += 1;
            continue;
        }
        normals.set_valid(x, y, true);
        normals.set(x, y, 0, nx / da);
        normals.set(x, y, 1, ny / da);
        normals.set(x, y, 2, nz / da);
        area.set_valid(x, y, true);
        area.set(x, y, 0, da);
    }
    NormalField {
        normals,
        area,
        degenerate_count,
    }
}

/// Lifts a pixel with known depth to its 3-D point:
/// `P = z * [(p - c) / f; 1]`.
#[inline]
pub fn reproject(px: f64, py: f64, z: f64, k: &CameraIntrinsics) -> Vector3<f64> {
    Vector3::new(z * (px - k.cx) / k.f, z * (py - k.cy) / k.f, z)
}

/// Projects a 3-D point to the image plane: `p = (f / Z) [X; Y] + c`.
///
/// Returns `None` for `Z <= DEPTH_EPS` (behind-camera / degenerate).
#[inline]
pub fn project(p: &Vector3<f64>, k: &CameraIntrinsics) -> Option<(f64, f64)> {
    if p.z <= DEPTH_EPS {
        return None;
    }
    Some((k.f * p.x / p.z + k.cx, k.f * p.y / p.z + k.cy))
}

/// The warping function `w[R, t, z](p) = project(transform(reproject(p)))`.
///
/// `None` signals a degenerate transformed depth; out-of-image targets are
/// the caller's concern (interpolation flags them).
#[inline]
pub fn warp(
    px: f64,
    py: f64,
    z: f64,
    pose: &crate::se3::TwistPose,
    k: &CameraIntrinsics,
) -> Option<(f64, f64)> {
    let q = pose.apply(&reproject(px, py, z, k));
    project(&q, k)
}

/// Derivative of the warped pixel with respect to a left-multiplied se(3)
/// perturbation of the pose, columns ordered `[v, w]`.
///
/// With `Q = R P + t` the chain rule gives
/// `dQ/ddelta = [I | -skew(Q)]` and `dpi/dQ` the usual 2x3 projection
/// Jacobian.
pub fn warp_jacobian(
    px: f64,
    py: f64,
    z: f64,
    pose: &crate::se3::TwistPose,
    k: &CameraIntrinsics,
) -> Option<SMatrix<f64, 2, 6>> {
    let q = pose.apply(&reproject(px, py, z, k));
    if q.z <= DEPTH_EPS {
        return None;
    }
    let iz = 1.0 / q.z;
    let fz = k.f * iz;
    let mut j = SMatrix::<f64, 2, 6>::zeros();
    // translation columns: dpi/dQ * I
    j[(0, 0)] = fz;
    j[(1, 1)] = fz;
    j[(0, 2)] = -fz * q.x * iz;
    j[(1, 2)] = -fz * q.y * iz;
    // rotation columns: dpi/dQ * (-skew(Q))
    let neg_skew = -Matrix3::new(0.0, -q.z, q.y, q.z, 0.0, -q.x, -q.y, q.x, 0.0);
    for col in 0..3 {
        let d = neg_skew.column(col);
        j[(0, 3 + col)] = fz * d.x - fz * q.x * iz * d.z;
        j[(1, 3 + col)] = fz * d.y - fz * q.y * iz * d.z;
    }
    Some(j)
}
