//! Spherical-harmonic shading, the Lambertian forward model, photometric
//! residuals and the Cauchy robustifier with its IRLS weights.

use alloc::vec::Vec;

use nalgebra::Vector4;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Error;
use crate::geometry::{self, NormalField};
use crate::grid::{CameraIntrinsics, ImageGrid};
use crate::sampling::catmull_rom_sample_or_black;
use crate::se3::TwistPose;

/// First-order spherical-harmonic lighting: an ambient-like first entry plus
/// a directional 3-vector, shared across color channels, one per frame.
pub type LightingVector = Vector4<f64>;

/// Cauchy robustifier scale, in intensity units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustifierConfig {
    pub lambda: f64,
}

impl RobustifierConfig {
    pub fn new(lambda: f64) -> Result<Self, Error> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter { what: "lambda" });
        }
        Ok(Self { lambda })
    }
}

impl Default for RobustifierConfig {
    fn default() -> Self {
        Self { lambda: 0.04 }
    }
}

/// First-order SH basis `m(n) = [1, n^T]^T` for a unit normal.
///
/// Rejects inputs off the unit sphere by more than 1e-9.
pub fn sh_basis(n: &[f64; 3]) -> Result<Vector4<f64>, Error> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitNormal { norm });
    }
    Ok(Vector4::new(1.0, n[0], n[1], n[2]))
}

/// Per-pixel shading `s = <l, m(n)>` over a normal field (1-channel grid,
/// mask taken from the normals).
pub fn shading_field(nf: &NormalField, l: &LightingVector) -> ImageGrid<f64> {
    let (w, h) = nf.normals.size();
    let mut out = ImageGrid::<f64>::empty(w, h, 1);
    for (x, y) in nf.normals.valid_pixels() {
        let s = l[0]
            + l[1] * nf.normals.get(x, y, 0)
            + l[2] * nf.normals.get(x, y, 1)
            + l[3] * nf.normals.get(x, y, 2);
        out.set_valid(x, y, true);
        out.set(x, y, 0, s);
    }
    out
}

/// The Lambertian forward model `I = rho * <l, m[n[z]]>`.
///
/// Shading may be negative; the solver's forward model carries no clamp, so
/// attached shadows show up as outliers for the robustifier.
pub fn shade(
    z: &ImageGrid<f64>,
    k: &CameraIntrinsics,
    rho: &ImageGrid<f64>,
    l: &LightingVector,
) -> ImageGrid<f64> {
    let nf = geometry::normals_from_depth(z, k);
    let s = shading_field(&nf, l);
    let (w, h) = z.size();
    let mut out = ImageGrid::<f64>::empty(w, h, 3);
    for (x, y) in s.valid_pixels() {
        if !rho.is_valid(x, y) {
            continue;
        }
        out.set_valid(x, y, true);
        for c in 0..3 {
            out.set(x, y, c, rho.get(x, y, c) * s.get(x, y, 0));
        }
    }
    out
}

/// `I_i` pulled back into the reference frame: bilinear samples at
/// `warp(p)`. Pixels whose warp is degenerate or lands outside the frame's
/// valid mask are invalid.
pub fn warp_image(
    frame: &ImageGrid<f64>,
    pose: &TwistPose,
    z: &ImageGrid<f64>,
    k: &CameraIntrinsics,
) -> ImageGrid<f64> {
    let (w, h) = z.size();
    let nc = frame.channels();
    let mut out = ImageGrid::<f64>::empty(w, h, nc);
    for (x, y) in z.valid_pixels() {
        let zv = z.get(x, y, 0);
        if zv <= geometry::DEPTH_EPS {
            continue;
        }
        let Some((qx, qy)) = geometry::warp(x as f64, y as f64, zv, pose, k) else {
            continue;
        };
        let mut vals = [0.0f64; 4];
        let mut ok = true;
        for (c, v) in vals.iter_mut().enumerate().take(nc) {
            match catmull_rom_sample_or_black(frame, qx, qy, c) {
                Some(s) => *v = s,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        out.set_valid(x, y, true);
        for c in 0..nc {
            out.set(x, y, c, vals[c]);
        }
    }
    out
}

/// Photometric residual of one frame against the reference-frame model:
/// `r_c(p) = I_i,c(warp(p)) - rho_c(p) <m(n(p)), l_i>`.
///
/// The returned grid's mask marks pixels where all of warp, interpolation,
/// normals and albedo are valid.
pub fn residual(
    frame: &ImageGrid<f64>,
    pose: &TwistPose,
    z: &ImageGrid<f64>,
    k: &CameraIntrinsics,
    rho: &ImageGrid<f64>,
    l: &LightingVector,
) -> ImageGrid<f64> {
    let nf = geometry::normals_from_depth(z, k);
    let warped = warp_image(frame, pose, z, k);
    residual_from_parts(&warped, &nf, rho, l)
}

/// Residual assembly from precomputed warped samples and normals; shared by
/// [`residual`] and the solver's block updates.
pub fn residual_from_parts(
    warped: &ImageGrid<f64>,
    nf: &NormalField,
    rho: &ImageGrid<f64>,
    l: &LightingVector,
) -> ImageGrid<f64> {
    let (w, h) = warped.size();
    let mut out = ImageGrid::<f64>::empty(w, h, 3);
    for (x, y) in warped.valid_pixels() {
        if !nf.normals.is_valid(x, y) || !rho.is_valid(x, y) {
            continue;
        }
        let s = l[0]
            + l[1] * nf.normals.get(x, y, 0)
            + l[2] * nf.normals.get(x, y, 1)
            + l[3] * nf.normals.get(x, y, 2);
        out.set_valid(x, y, true);
        for c in 0..3 {
            out.set(x, y, c, warped.get(x, y, c) - rho.get(x, y, c) * s);
        }
    }
    out
}

/// Cauchy's M-estimator `phi_C(r) = (lambda^2 / 2) log(1 + r^2 / lambda^2)`.
#[inline]
pub fn cauchy_value(r: f64, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    0.5 * l2 * (1.0 + r * r / l2).ln()
}

/// IRLS weight `w = phi'_C(r) / r = lambda^2 / (lambda^2 + r^2)`; the
/// removable singularity at `r = 0` evaluates to 1.
#[inline]
pub fn irls_weight(r: f64, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    l2 / (l2 + r * r)
}

/// How [`robust_energy`] scores residuals.
pub enum EnergyMode<'a> {
    /// The true robust objective: sum of `phi_C` over valid residuals.
    Robust,
    /// The frozen-weight IRLS surrogate `1/2 sum w r^2`, one weight grid per
    /// residual grid. The 1/2 makes the surrogate's slope match `phi'_C` at
    /// the freeze point, which is what guarantees majorization.
    Surrogate(&'a [ImageGrid<f64>]),
}

/// Sum over all frames, valid pixels and channels of the robustified (or
/// surrogate-weighted) residual.
pub fn robust_energy(
    residuals: &[ImageGrid<f64>],
    lambda: f64,
    mode: EnergyMode<'_>,
) -> Result<f64, Error> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, r) in residuals.iter().enumerate() {
        for (x, y) in r.valid_pixels() {
            for c in 0..r.channels() {
                let rv = r.get(x, y, c);
                match &mode {
                    EnergyMode::Robust => total += cauchy_value(rv, lambda),
                    EnergyMode::Surrogate(weights) => {
                        if !weights[i].is_valid(x, y) {
                            continue;
                        }
                        total += 0.5 * weights[i].get(x, y, c) * rv * rv;
                    }
                }
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(total)
}

/// Per-channel IRLS weight grids for a set of residual grids.
pub fn irls_weights(residuals: &[ImageGrid<f64>], lambda: f64) -> Vec<ImageGrid<f64>> {
    residuals
        .iter()
        .map(|r| {
            let (w, h) = r.size();
            let mut out = ImageGrid::<f64>::empty(w, h, r.channels());
            for (x, y) in r.valid_pixels() {
                out.set_valid(x, y, true);
                for c in 0..r.channels() {
                    out.set(x, y, c, irls_weight(r.get(x, y, c), lambda));
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sh_basis_cases() {
        let m = sh_basis(&[0.0, 0.0, -1.0]).unwrap();
        assert_eq!(m, Vector4::new(1.0, 0.0, 0.0, -1.0));
        let m = sh_basis(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(m, Vector4::new(1.0, 1.0, 0.0, 0.0));
        // the paper's init lighting against the frontal normal
        let l = Vector4::new(0.2, 0.0, 0.0, -1.0);
        let m = sh_basis(&[0.0, 0.0, -1.0]).unwrap();
        assert!((m.dot(&l) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn sh_basis_rejects_non_unit() {
        assert!(sh_basis(&[0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn cauchy_cases() {
        let lambda = 0.04;
        assert_eq!(cauchy_value(0.0, lambda), 0.0);
        let expected = 0.5 * lambda * lambda * core::f64::consts::LN_2;
        assert!((cauchy_value(lambda, lambda) - expected).abs() < 1e-15);
    }

    #[test]
    fn weight_cases() {
        let lambda = 0.04;
        assert_eq!(irls_weight(0.0, lambda), 1.0);
        assert!((irls_weight(lambda, lambda) - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn cauchy_below_quadratic(r in -5.0f64..5.0) {
            let lambda = 0.04;
            let phi = cauchy_value(r, lambda);
            prop_assert!(phi <= 0.5 * r * r + 1e-15);
            if r != 0.0 {
                prop_assert!(phi > 0.0);
                prop_assert!(phi < 0.5 * r * r);
            }
        }

        #[test]
        fn cauchy_even_and_monotone(r in 0.0f64..5.0, dr in 0.001f64..1.0) {
            let lambda = 0.04;
            prop_assert_eq!(cauchy_value(r, lambda), cauchy_value(-r, lambda));
            prop_assert!(cauchy_value(r + dr, lambda) > cauchy_value(r, lambda));
        }

        #[test]
        fn weights_bounded_and_decreasing(r in 0.0f64..10.0, dr in 0.001f64..1.0) {
            let lambda = 0.04;
            let w = irls_weight(r, lambda);
            prop_assert!(w > 0.0 && w <= 1.0);
            prop_assert!(irls_weight(r + dr, lambda) < w);
        }

        #[test]
        fn surrogate_slope_matches_cauchy_derivative(r0 in 0.01f64..2.0) {
            // d/dr [ 1/2 w(r0) r^2 ] at r0 equals phi'_C(r0)
            let lambda = 0.04;
            let w0 = irls_weight(r0, lambda);
            let slope_surrogate = w0 * r0;
            let l2 = lambda * lambda;
            let slope_phi = l2 * r0 / (l2 + r0 * r0);
            prop_assert!((slope_surrogate - slope_phi).abs() < 1e-12);
        }

        #[test]
        fn surrogate_majorizes_cauchy(r0 in 0.01f64..2.0, r in -3.0f64..3.0) {
            let lambda = 0.04;
            let w0 = irls_weight(r0, lambda);
            let offset = cauchy_value(r0, lambda) - 0.5 * w0 * r0 * r0;
            prop_assert!(cauchy_value(r, lambda) <= 0.5 * w0 * r * r + offset + 1e-12);
        }
    }

    #[test]
    fn pure_ambient_shading() {
        let z = ImageGrid::<f64>::filled(6, 6, 1, 2.0);
        let rho = ImageGrid::<f64>::filled(6, 6, 3, 1.0);
        let k = CameraIntrinsics::new(100.0, 3.0, 3.0).unwrap();
        let img = shade(&z, &k, &rho, &Vector4::new(1.0, 0.0, 0.0, 0.0));
        for (x, y) in img.valid_pixels().collect::<Vec<_>>() {
            for c in 0..3 {
                assert!((img.get(x, y, c) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_albedo_shades_black() {
        let z = ImageGrid::<f64>::filled(6, 6, 1, 2.0);
        let rho = ImageGrid::<f64>::filled(6, 6, 3, 0.0);
        let k = CameraIntrinsics::new(100.0, 3.0, 3.0).unwrap();
        let img = shade(&z, &k, &rho, &Vector4::new(0.3, 0.1, -0.2, -0.9));
        for (x, y) in img.valid_pixels().collect::<Vec<_>>() {
            for c in 0..3 {
                assert_eq!(img.get(x, y, c), 0.0);
            }
        }
    }

    #[test]
    fn frontal_light_on_fronto_parallel_plane_returns_albedo() {
        let z = ImageGrid::<f64>::filled(6, 6, 1, 2.0);
        let mut rho = ImageGrid::<f64>::filled(6, 6, 3, 0.0);
        for y in 0..6 {
            for x in 0..6 {
                rho.set(x, y, 0, 0.2 + 0.1 * x as f64);
                rho.set(x, y, 1, 0.5);
                rho.set(x, y, 2, 0.3 + 0.05 * y as f64);
            }
        }
        let k = CameraIntrinsics::new(100.0, 3.0, 3.0).unwrap();
        let img = shade(&z, &k, &rho, &Vector4::new(0.0, 0.0, 0.0, -1.0));
        for (x, y) in img.valid_pixels().collect::<Vec<_>>() {
            for c in 0..3 {
                assert!((img.get(x, y, c) - rho.get(x, y, c)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn self_consistent_residual_is_zero() {
        let mut z = ImageGrid::<f64>::filled(8, 8, 1, 0.0);
        for y in 0..8 {
            for x in 0..8 {
                z.set(x, y, 0, 2.0 + 0.01 * x as f64 + 0.02 * (y as f64).sin());
            }
        }
        let rho = ImageGrid::<f64>::filled(8, 8, 3, 0.6);
        let k = CameraIntrinsics::new(50.0, 4.0, 4.0).unwrap();
        let l = Vector4::new(0.2, 0.05, -0.1, -0.95);
        let img = shade(&z, &k, &rho, &l);
        let r = residual(&img, &TwistPose::identity(), &z, &k, &rho, &l);
        assert!(r.valid_count() > 0);
        for (x, y) in r.valid_pixels().collect::<Vec<_>>() {
            for c in 0..3 {
                assert!(r.get(x, y, c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn albedo_lighting_gauge_invariance() {
        // scaling rho by s and l by 1/s leaves residuals bit-identical
        let mut z = ImageGrid::<f64>::filled(8, 8, 1, 0.0);
        for y in 0..8 {
            for x in 0..8 {
                z.set(x, y, 0, 2.0 + 0.03 * x as f64 - 0.01 * y as f64);
            }
        }
        let k = CameraIntrinsics::new(50.0, 4.0, 4.0).unwrap();
        let rho = ImageGrid::<f64>::filled(8, 8, 3, 0.6);
        let l = Vector4::new(0.2, 0.05, -0.1, -0.95);
        let img = shade(&z, &k, &rho, &l);

        let s = 4.0;
        let mut rho_scaled = rho.clone();
        for v in rho_scaled.data_mut() {
            *v *= s;
        }
        let l_scaled = l / s;

        let r1 = residual(&img, &TwistPose::identity(), &z, &k, &rho, &l);
        let r2 = residual(&img, &TwistPose::identity(), &z, &k, &rho_scaled, &l_scaled);
        assert_eq!(r1.mask(), r2.mask());
        for (a, b) in r1.data().iter().zip(r2.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn robust_energy_single_residual() {
        let lambda = 0.04;
        let mut r = ImageGrid::<f64>::empty(1, 1, 3);
        r.set_valid(0, 0, true);
        r.set(0, 0, 0, lambda);
        let e = robust_energy(&[r], lambda, EnergyMode::Robust).unwrap();
        let expected = 0.5 * lambda * lambda * core::f64::consts::LN_2;
        assert!((e - expected).abs() < 1e-15);
    }

    #[test]
    fn robust_energy_empty_set_is_error() {
        let r = ImageGrid::<f64>::empty(2, 2, 3);
        assert!(matches!(
            robust_energy(&[r], 0.04, EnergyMode::Robust),
            Err(Error::EmptyMask)
        ));
    }
}
