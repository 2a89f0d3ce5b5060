//! Evaluation metrics: mean angular error on normals (degrees) and raw
//! root-mean-square error on depth.
//!
//! Both metrics evaluate strictly on the intersection of the two validity
//! masks and report the pixel count used. Normals for the MAE come from the
//! same perspective finite-difference formula on both inputs, so the stencil
//! bias cancels instead of polluting the comparison.

use mvpsr_core::geometry::normals_from_depth;
use mvpsr_core::{CameraIntrinsics, ImageGrid};

use crate::{fmt_full, IoError};

/// Metric values plus the evaluation-mask bookkeeping.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    /// Mean angular error on normals, degrees, in `[0, 180]`.
    pub mae_deg: f64,
    /// Root-mean-square depth error in depth units, no alignment applied.
    pub rmse: f64,
    /// Pixels used by the MAE (normals valid on both inputs).
    pub mae_count: usize,
    /// Pixels used by the RMSE (depth valid on both inputs).
    pub rmse_count: usize,
    /// Where each metric's mask came from.
    pub mask_provenance: String,
}

fn check_sizes(a: &ImageGrid<f64>, b: &ImageGrid<f64>) -> Result<(), IoError> {
    if a.size() != b.size() {
        return Err(IoError::SizeMismatch {
            what: format!("metric inputs are {:?} vs {:?}", a.size(), b.size()),
        });
    }
    Ok(())
}

/// Mean angular error between the perspective normals of two depth maps,
/// in degrees, plus the pixel count used.
pub fn mae_normals(
    z_est: &ImageGrid<f64>,
    z_gt: &ImageGrid<f64>,
    k: &CameraIntrinsics,
) -> Result<(f64, usize), IoError> {
    check_sizes(z_est, z_gt)?;
    let ne = normals_from_depth(z_est, k).normals;
    let ng = normals_from_depth(z_gt, k).normals;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (x, y) in ne.valid_pixels() {
        if !ng.is_valid(x, y) {
            continue;
        }
        let dot: f64 = (0..3).map(|c| ne.get(x, y, c) * ng.get(x, y, c)).sum();
        sum += dot.clamp(-1.0, 1.0).acos().to_degrees();
        count += 1;
    }
    if count == 0 {
        return Err(IoError::Invalid(
            "mae_normals: empty mask intersection".to_string(),
        ));
    }
    Ok((sum / count as f64, count))
}

/// Raw RMSE between two depth maps over their common mask, plus the pixel
/// count used.
pub fn rmse_depth(z_est: &ImageGrid<f64>, z_gt: &ImageGrid<f64>) -> Result<(f64, usize), IoError> {
    check_sizes(z_est, z_gt)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (x, y) in z_est.valid_pixels() {
        if !z_gt.is_valid(x, y) {
            continue;
        }
        let d = z_est.get(x, y, 0) - z_gt.get(x, y, 0);
        sum += d * d;
        count += 1;
    }
    if count == 0 {
        return Err(IoError::Invalid(
            "rmse_depth: empty mask intersection".to_string(),
        ));
    }
    Ok(((sum / count as f64).sqrt(), count))
}

/// Runs both metrics on an estimated and a ground-truth depth map.
pub fn evaluate(
    z_est: &ImageGrid<f64>,
    z_gt: &ImageGrid<f64>,
    k: &CameraIntrinsics,
) -> Result<MetricsReport, IoError> {
    let (mae_deg, mae_count) = mae_normals(z_est, z_gt, k)?;
    let (rmse, rmse_count) = rmse_depth(z_est, z_gt)?;
    Ok(MetricsReport {
        mae_deg,
        rmse,
        mae_count,
        rmse_count,
        mask_provenance: "intersection of estimate and ground-truth validity masks".to_string(),
    })
}

impl MetricsReport {
    /// Structured-text rendering for report files.
    pub fn to_text(&self) -> String {
        format!(
            "mae_deg = {}\nrmse = {}\nmae_count = {}\nrmse_count = {}\nmask = {}\n",
            fmt_full(self.mae_deg),
            fmt_full(self.rmse),
            self.mae_count,
            self.rmse_count,
            self.mask_provenance
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(50.0, 7.5, 5.5).unwrap()
    }

    fn plane(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> ImageGrid<f64> {
        let mut g = ImageGrid::<f64>::filled(w, h, 1, 0.0);
        for y in 0..h {
            for x in 0..w {
                g.set(x, y, 0, f(x, y));
            }
        }
        g
    }

    #[test]
    fn identical_depths_have_zero_error() {
        let z = plane(16, 12, |x, y| 2.0 + 0.01 * (x as f64) - 0.007 * (y as f64));
        let (mae, n) = mae_normals(&z, &z, &k()).unwrap();
        let (rmse, m) = rmse_depth(&z, &z).unwrap();
        // identical unit normals dot to 1 minus rounding, so acos gives
        // an angle on the order of sqrt(machine epsilon) radians
        assert!(mae < 1e-5, "{mae}");
        assert!(rmse == 0.0);
        assert_eq!(n, 16 * 12);
        assert_eq!(m, 16 * 12);
    }

    #[test]
    fn tilted_plane_against_flat_plane_gives_the_analytic_angle() {
        // A fronto-parallel plane has perspective normal direction
        // [0, 0, -1]. A depth map with constant slope s in x at the
        // principal point gives unnormalized normal [f s, 0, -1 - u s];
        // choosing s so that f s = 1 + u s at u = 0, i.e. s = 1 / f,
        // makes the two components equal and the angle exactly 45 degrees.
        let kk = k();
        let s = 1.0 / kk.f;
        let flat = plane(16, 12, |_, _| 2.0);
        let tilted = plane(16, 12, |x, _| 2.0 + s * (x as f64 - kk.cx));
        let ne = normals_from_depth(&tilted, &kk).normals;
        let ng = normals_from_depth(&flat, &kk).normals;
        // check the single pixel at the principal point (u = 0) where the
        // closed form applies; cx = 7.5 falls between pixels, so evaluate
        // the continuous formula at the pixel's own u instead
        let (x, y) = (9, 5);
        let u = x as f64 - kk.cx;
        let expect = {
            let (nx, nz) = (kk.f * s, -1.0 - u * s);
            let da = (nx * nx + nz * nz).sqrt();
            (-nz / da).acos().to_degrees()
        };
        let dot: f64 = (0..3).map(|c| ne.get(x, y, c) * ng.get(x, y, c)).sum();
        let got = dot.clamp(-1.0, 1.0).acos().to_degrees();
        assert!((got - expect).abs() < 1e-6, "got {got}, expect {expect}");
        // and the 45-degree case exactly, via a pixel-centered principal
        // point
        let kc = CameraIntrinsics::new(50.0, 8.0, 5.0).unwrap();
        let tilted = plane(16, 12, |x, _| 2.0 + (x as f64 - kc.cx) / kc.f);
        let ne = normals_from_depth(&tilted, &kc).normals;
        let ng = normals_from_depth(&flat, &kc).normals;
        let dot: f64 = (0..3).map(|c| ne.get(8, 5, c) * ng.get(8, 5, c)).sum();
        let got = dot.clamp(-1.0, 1.0).acos().to_degrees();
        assert!((got - 45.0).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn antipodal_normals_clamp_to_180() {
        let a = [0.0, 0.0, -1.0];
        let b = [0.0, 0.0, 1.0];
        let dot: f64 = (0..3).map(|c| a[c] * b[c]).sum();
        assert!((dot.clamp(-1.0, 1.0).acos().to_degrees() - 180.0).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_rmse_is_the_offset() {
        let a = plane(8, 8, |_, _| 2.0);
        let b = plane(8, 8, |_, _| 2.25);
        let (rmse, _) = rmse_depth(&a, &b).unwrap();
        assert!((rmse - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rmse_matches_hand_computed_value() {
        let vals_a = [1.0, 2.0, 3.0, 4.0, 1.5, 2.5, 3.5, 4.5, 0.5, 1.25, 2.75, 3.25, 1.1, 2.2, 3.3, 4.4];
        let vals_b = [1.1, 1.9, 3.2, 4.4, 1.0, 2.5, 3.6, 4.0, 0.7, 1.05, 2.95, 3.05, 1.4, 2.0, 3.0, 4.9];
        let a = plane(4, 4, |x, y| vals_a[y * 4 + x]);
        let b = plane(4, 4, |x, y| vals_b[y * 4 + x]);
        let expect = {
            let s: f64 = vals_a
                .iter()
                .zip(&vals_b)
                .map(|(p, q)| (p - q) * (p - q))
                .sum();
            (s / 16.0).sqrt()
        };
        let (rmse, n) = rmse_depth(&a, &b).unwrap();
        assert_eq!(n, 16);
        assert!((rmse - expect).abs() < 1e-12);
    }

    #[test]
    fn empty_intersection_errors() {
        let mut a = plane(4, 4, |_, _| 2.0);
        let mut b = plane(4, 4, |_, _| 2.0);
        for y in 0..4 {
            for x in 0..4 {
                if x < 2 {
                    a.set_valid(x, y, false);
                } else {
                    b.set_valid(x, y, false);
                }
            }
        }
        assert!(rmse_depth(&a, &b).is_err());
    }

    #[test]
    fn size_mismatch_errors() {
        let a = plane(4, 4, |_, _| 2.0);
        let b = plane(5, 4, |_, _| 2.0);
        assert!(matches!(
            rmse_depth(&a, &b),
            Err(IoError::SizeMismatch { .. })
        ));
    }
}
