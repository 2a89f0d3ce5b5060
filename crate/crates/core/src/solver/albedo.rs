//! Albedo block: the surrogate is a decoupled weighted quadratic per pixel
//! and channel, minimized in closed form. Pixels whose shading evidence is
//! numerically empty keep their previous albedo.

use alloc::vec::Vec;

use crate::geometry;
use crate::grid::ImageGrid;
use crate::photometry;

use super::{Level, SceneEstimate};

/// Minimum accumulated `sum w s^2` before a pixel's albedo is replaced.
const DENOM_EPS: f64 = 1e-12;

/// Updates the albedo in place; returns the frozen-weight surrogate before
/// and after (the closed form is the exact minimizer, so it never increases).
pub(crate) fn update(
    level: &Level,
    est: &mut SceneEstimate,
    weights: &[ImageGrid<f64>],
) -> (f64, f64) {
    let nf = geometry::normals_from_depth(&est.depth, &level.k);
    let shadings: Vec<ImageGrid<f64>> = est
        .lights
        .iter()
        .map(|l| photometry::shading_field(&nf, l))
        .collect();
    let warped: Vec<ImageGrid<f64>> = level
        .frames
        .iter()
        .zip(&est.poses)
        .map(|(f, p)| photometry::warp_image(f, p, &est.depth, &level.k))
        .collect();

    let (w, h) = est.depth.size();
    let mut before = 0.0;
    let mut after = 0.0;
    for y in 0..h {
        for x in 0..w {
            if !est.albedo.is_valid(x, y) {
                continue;
            }
            for c in 0..3 {
                let mut num = 0.0; // sum w I s
                let mut den = 0.0; // sum w s^2
                let mut sii = 0.0; // sum w I^2
                for i in 0..level.frames.len() {
                    if !warped[i].is_valid(x, y)
                        || !shadings[i].is_valid(x, y)
                        || !weights[i].is_valid(x, y)
                    {
                        continue;
                    }
                    let s = shadings[i].get(x, y, 0);
                    let iv = warped[i].get(x, y, c);
                    let wv = weights[i].get(x, y, c);
                    num += wv * iv * s;
                    den += wv * s * s;
                    sii += wv * iv * iv;
                }
                let rho_old = est.albedo.get(x, y, c);
                before += 0.5 * (sii - 2.0 * rho_old * num + rho_old * rho_old * den);
                let rho_new = if den > DENOM_EPS { num / den } else { rho_old };
                after += 0.5 * (sii - 2.0 * rho_new * num + rho_new * rho_new * den);
                est.albedo.set(x, y, c, rho_new);
            }
        }
    }
    (before, after)
}
