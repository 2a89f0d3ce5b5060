//! Multi-resolution pyramid for the coarse-to-fine solve.

use alloc::vec::Vec;

use crate::error::Error;
use crate::grid::{CameraIntrinsics, ImageGrid};

/// One level of a coarse-to-fine pyramid. Level index `0` is the coarsest,
/// level `levels - 1` is the input resolution; level `k` carries the scale
/// factor `2^-(L-1-k)`.
#[derive(Debug, Clone)]
pub struct PyramidLevel {
    pub index: usize,
    pub scale: f64,
    pub intrinsics: CameraIntrinsics,
    pub image: ImageGrid<f64>,
}

/// Halves width and height (ceiling division) with a 2x2 area average.
///
/// Values are plain averages over the in-bounds fine pixels, so metric depth
/// is preserved across levels. The mask is conservative: a coarse pixel is
/// valid only if all of its in-bounds fine parents are valid.
pub fn downsample2(image: &ImageGrid<f64>) -> ImageGrid<f64> {
    let (w, h) = image.size();
    let cw = w.div_ceil(2);
    let ch = h.div_ceil(2);
    let nc = image.channels();
    let mut out = ImageGrid::<f64>::empty(cw, ch, nc);
    for y in 0..ch {
        for x in 0..cw {
            let mut all_valid = true;
            let mut count = 0usize;
            let mut sums = [0.0f64; 4];
            debug_assert!(nc <= 4);
            for dy in 0..2 {
                for dx in 0..2 {
                    let fx = 2 * x + dx;
                    let fy = 2 * y + dy;
                    if fx >= w || fy >= h {
                        continue;
                    }
                    if !image.is_valid(fx, fy) {
                        all_valid = false;
                        continue;
                    }
                    for (c, s) in sums.iter_mut().enumerate().take(nc) {
                        *s += image.get(fx, fy, c);
                    }
                    count += 1;
                }
            }
            if all_valid && count > 0 {
                out.set_valid(x, y, true);
                for c in 0..nc {
                    out.set(x, y, c, sums[c] / count as f64);
                }
            }
        }
    }
    out
}

/// Builds a coarse-to-fine pyramid; the returned vector is ordered coarsest
/// first and its last element is the input unchanged. Intrinsics scale with
/// resolution.
pub fn build_pyramid(
    image: &ImageGrid<f64>,
    intrinsics: CameraIntrinsics,
    levels: usize,
) -> Result<Vec<PyramidLevel>, Error> {
    if levels == 0 {
        return Err(Error::InvalidParameter { what: "levels" });
    }
    let (w, h) = image.size();
    if w == 0 || h == 0 {
        return Err(Error::EmptyMask);
    }
    // Ceiling halving never reaches zero, but a degenerate 1x1 top with more
    // levels below it would just duplicate; reject instead.
    if (w >> (levels - 1)) == 0 || (h >> (levels - 1)) == 0 {
        return Err(Error::PyramidTooDeep { levels });
    }
    let mut out: Vec<PyramidLevel> = Vec::with_capacity(levels);
    let mut cur = image.clone();
    for k in (0..levels).rev() {
        let scale = 1.0 / (1u64 << (levels - 1 - k)) as f64;
        out.push(PyramidLevel {
            index: k,
            scale,
            intrinsics: intrinsics.scaled(scale),
            image: cur.clone(),
        });
        if k > 0 {
            cur = downsample2(&cur);
        }
    }
    out.reverse();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(600.0, 160.0, 120.0).unwrap()
    }

    #[test]
    fn five_level_sizes_match_expected() {
        let img = ImageGrid::<f64>::filled(320, 240, 1, 1.0);
        let pyr = build_pyramid(&img, intr(), 5).unwrap();
        let sizes: Vec<_> = pyr.iter().map(|l| l.image.size()).collect();
        assert_eq!(
            sizes,
            [(20, 15), (40, 30), (80, 60), (160, 120), (320, 240)]
        );
        assert_eq!(pyr[0].scale, 1.0 / 16.0);
        assert_eq!(pyr[4].scale, 1.0);
    }

    #[test]
    fn single_level_is_identity() {
        let mut img = ImageGrid::<f64>::filled(7, 5, 1, 3.5);
        img.set_valid(2, 2, false);
        let pyr = build_pyramid(&img, intr(), 1).unwrap();
        assert_eq!(pyr.len(), 1);
        assert_eq!(pyr[0].image, img);
        assert_eq!(pyr[0].intrinsics, intr());
    }

    #[test]
    fn intrinsics_scale_linearly() {
        let img = ImageGrid::<f64>::filled(320, 240, 1, 1.0);
        let pyr = build_pyramid(&img, intr(), 3).unwrap();
        // coarsest level is scale 1/4
        assert_eq!(pyr[0].intrinsics.f, 150.0);
        assert_eq!(pyr[0].intrinsics.cx, 40.0);
        assert_eq!(pyr[0].intrinsics.cy, 30.0);
    }

    #[test]
    fn conservative_mask_downsampling() {
        let mut img = ImageGrid::<f64>::filled(6, 6, 1, 2.0);
        img.set_valid(1, 1, false); // kills coarse (0,0)
        let coarse = downsample2(&img);
        assert!(!coarse.is_valid(0, 0));
        assert!(coarse.is_valid(1, 0));
        // every coarse valid pixel has only valid in-bounds parents
        for y in 0..coarse.height() {
            for x in 0..coarse.width() {
                if coarse.is_valid(x, y) {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let (fx, fy) = (2 * x + dx, 2 * y + dy);
                            if fx < 6 && fy < 6 {
                                assert!(img.is_valid(fx, fy));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn odd_dimensions_average_available_parents() {
        // 3x1 row: coarse pixel 1 averages only the single column 2
        let mut img = ImageGrid::<f64>::filled(3, 1, 1, 0.0);
        img.set(0, 0, 0, 1.0);
        img.set(1, 0, 0, 2.0);
        img.set(2, 0, 0, 9.0);
        let coarse = downsample2(&img);
        assert_eq!(coarse.size(), (2, 1));
        assert_eq!(coarse.get(0, 0, 0), 1.5);
        assert_eq!(coarse.get(1, 0, 0), 9.0);
    }

    #[test]
    fn too_deep_pyramid_rejected() {
        let img = ImageGrid::<f64>::filled(8, 8, 1, 1.0);
        assert!(matches!(
            build_pyramid(&img, intr(), 5),
            Err(Error::PyramidTooDeep { .. })
        ));
        assert!(build_pyramid(&img, intr(), 4).is_ok());
    }
}
