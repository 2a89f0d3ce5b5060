//! Lighting block: per frame, the surrogate is a weighted quadratic in the
//! 4-vector `l_i`, minimized through its 4x4 normal equations. A Lambertian
//! scene with little normal diversity leaves the system near-singular, so a
//! failed Cholesky falls back to Tikhonov damping centered at the previous
//! lighting, which keeps the update a descent step.

use nalgebra::{Matrix4, Vector4};

use crate::geometry;
use crate::grid::ImageGrid;
use crate::photometry;

use super::{Level, SceneEstimate, SolverConfig};

/// Updates all lighting vectors in place; returns the summed frozen-weight
/// surrogate before and after.
pub(crate) fn update(
    level: &Level,
    est: &mut SceneEstimate,
    weights: &[ImageGrid<f64>],
    config: &SolverConfig,
) -> (f64, f64) {
    let nf = geometry::normals_from_depth(&est.depth, &level.k);
    let mut before_total = 0.0;
    let mut after_total = 0.0;

    for i in 0..level.frames.len() {
        let warped =
            photometry::warp_image(&level.frames[i], &est.poses[i], &est.depth, &level.k);
        let mut a = Matrix4::<f64>::zeros();
        let mut b = Vector4::<f64>::zeros();
        let mut sii = 0.0;
        for (x, y) in warped.valid_pixels() {
            if !nf.normals.is_valid(x, y)
                || !est.albedo.is_valid(x, y)
                || !weights[i].is_valid(x, y)
            {
                continue;
            }
            let m = Vector4::new(
                1.0,
                nf.normals.get(x, y, 0),
                nf.normals.get(x, y, 1),
                nf.normals.get(x, y, 2),
            );
            for c in 0..3 {
                let rho = est.albedo.get(x, y, c);
                let iv = warped.get(x, y, c);
                let wv = weights[i].get(x, y, c);
                a += (wv * rho * rho) * m * m.transpose();
                b += (wv * rho * iv) * m;
                sii += wv * iv * iv;
            }
        }
        let quad = |l: &Vector4<f64>| 0.5 * (sii - 2.0 * l.dot(&b) + l.dot(&(a * l)));

        let l_old = est.lights[i];
        let before = quad(&l_old);
        let mut l_new = l_old;
        match a.cholesky() {
            Some(chol) => l_new = chol.solve(&b),
            None => {
                let mut damp = config.damping.max(1e-12);
                for _ in 0..8 {
                    let ad = a + Matrix4::identity() * damp;
                    if let Some(chol) = ad.cholesky() {
                        l_new = chol.solve(&(b + l_old * damp));
                        break;
                    }
                    damp *= 100.0;
                }
            }
        }
        let after = quad(&l_new);
        if after.is_finite() && after <= before {
            est.lights[i] = l_new;
            after_total += after;
        } else {
            after_total += before;
        }
        before_total += before;
    }
    (before_total, after_total)
}
