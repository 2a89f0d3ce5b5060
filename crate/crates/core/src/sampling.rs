//! The downsampling operator `D`, its adjoint, and bilinear interpolation /
//! resizing used by the prior term and the pyramid hand-off.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Error;
use crate::grid::ImageGrid;

/// Block-mean downsampling by an integer factor (box filter + decimation).
///
/// Each low-resolution pixel is the mean of the mask-valid high-resolution
/// pixels in its `sf x sf` block clipped to the image; it is invalid when the
/// block has no valid pixel. Row sums over valid contributors equal one, so
/// constants are preserved and the operator is exactly linear.
pub fn apply_d(z_hr: &ImageGrid<f64>, sf: usize) -> ImageGrid<f64> {
    let (w, h) = z_hr.size();
    let lw = w.div_ceil(sf);
    let lh = h.div_ceil(sf);
    let nc = z_hr.channels();
    let mut out = ImageGrid::<f64>::empty(lw, lh, nc);
    for y in 0..lh {
        for x in 0..lw {
            let mut count = 0usize;
            let mut sums = [0.0f64; 4];
            debug_assert!(nc <= 4);
            for fy in (y * sf)..((y + 1) * sf).min(h) {
                for fx in (x * sf)..((x + 1) * sf).min(w) {
                    if !z_hr.is_valid(fx, fy) {
                        continue;
                    }
                    for (c, s) in sums.iter_mut().enumerate().take(nc) {
                        *s += z_hr.get(fx, fy, c);
                    }
                    count += 1;
                }
            }
            if count > 0 {
                out.set_valid(x, y, true);
                for c in 0..nc {
                    out.set(x, y, c, sums[c] / count as f64);
                }
            }
        }
    }
    out
}

/// Exact adjoint of [`apply_d`] under the masked Euclidean inner products.
///
/// `hr_mask` must be the mask of the high-resolution grid `apply_d` was (or
/// would be) applied to, since the adjoint spreads each low-resolution value
/// uniformly over that block's valid pixels.
pub fn apply_d_transpose(
    y_lr: &ImageGrid<f64>,
    sf: usize,
    hr_template: &ImageGrid<f64>,
) -> ImageGrid<f64> {
    let (w, h) = hr_template.size();
    let nc = y_lr.channels();
    let mut out = ImageGrid::<f64>::empty(w, h, nc);
    for y in 0..y_lr.height() {
        for x in 0..y_lr.width() {
            if !y_lr.is_valid(x, y) {
                continue;
            }
            let mut count = 0usize;
            for fy in (y * sf)..((y + 1) * sf).min(h) {
                for fx in (x * sf)..((x + 1) * sf).min(w) {
                    if hr_template.is_valid(fx, fy) {
                        count += 1;
                    }
                }
            }
            if count == 0 {
                continue;
            }
            let inv = 1.0 / count as f64;
            for fy in (y * sf)..((y + 1) * sf).min(h) {
                for fx in (x * sf)..((x + 1) * sf).min(w) {
                    if !hr_template.is_valid(fx, fy) {
                        continue;
                    }
                    out.set_valid(fx, fy, true);
                    for c in 0..nc {
                        out.set(fx, fy, c, y_lr.get(x, y, c) * inv);
                    }
                }
            }
        }
    }
    out
}

/// Bilinear sample of one channel at a subpixel position.
///
/// Returns `None` if the position lies outside the image or any contributing
/// corner is mask-invalid. Integer positions reduce to the exact pixel value.
pub fn bilinear_sample(img: &ImageGrid<f64>, qx: f64, qy: f64, c: usize) -> Option<f64> {
    let (w, h) = img.size();
    if !(qx >= 0.0) || !(qy >= 0.0) || qx > (w - 1) as f64 || qy > (h - 1) as f64 {
        return None;
    }
    let x0 = qx.floor() as usize;
    let y0 = qy.floor() as usize;
    let fx = qx - x0 as f64;
    let fy = qy - y0 as f64;
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    if x1 >= w || y1 >= h {
        return None;
    }
    for (cx, cy) in [(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
        if !img.is_valid(cx, cy) {
            return None;
        }
    }
    let v00 = img.get(x0, y0, c);
    let v10 = img.get(x1, y0, c);
    let v01 = img.get(x0, y1, c);
    let v11 = img.get(x1, y1, c);
    Some(v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy)
}

/// Bilinear sample extended by black beyond the image borders.
///
/// Positions outside the sampling rectangle return `Some(0.0)`: frames are
/// object-centered with black background, so the scene radiance beyond the
/// border is background too. This keeps the photometric energy defined for
/// every warp instead of rewarding poses that push pixels out of view.
/// Inside the rectangle, mask-invalid corners still yield `None`.
pub fn bilinear_sample_or_black(img: &ImageGrid<f64>, qx: f64, qy: f64, c: usize) -> Option<f64> {
    let (w, h) = img.size();
    if !qx.is_finite() || !qy.is_finite() {
        return None;
    }
    if qx < 0.0 || qy < 0.0 || qx > (w - 1) as f64 || qy > (h - 1) as f64 {
        return Some(0.0);
    }
    bilinear_sample(img, qx, qy, c)
}

/// Catmull-Rom (cubic) sample extended by black beyond the image borders.
///
/// Same boundary semantics as [`bilinear_sample_or_black`], but with a
/// third-order interpolation error on smooth images instead of first-order,
/// which matters because interpolation bias in the warped frames otherwise
/// leaks into the pose and depth estimates. Taps outside the image count as
/// black background; if any tap inside the image is mask-invalid the sample
/// falls back to the bilinear rule.
pub fn catmull_rom_sample_or_black(
    img: &ImageGrid<f64>,
    qx: f64,
    qy: f64,
    c: usize,
) -> Option<f64> {
    let (w, h) = img.size();
    if !qx.is_finite() || !qy.is_finite() {
        return None;
    }
    if qx < 0.0 || qy < 0.0 || qx > (w - 1) as f64 || qy > (h - 1) as f64 {
        return Some(0.0);
    }
    let x0 = qx.floor() as isize;
    let y0 = qy.floor() as isize;
    let tx = qx - x0 as f64;
    let ty = qy - y0 as f64;
    let wx = catmull_rom_weights(tx);
    let wy = catmull_rom_weights(ty);
    let mut acc = 0.0;
    for (j, wyj) in wy.iter().enumerate() {
        let y = y0 + j as isize - 1;
        for (i, wxi) in wx.iter().enumerate() {
            let x = x0 + i as isize - 1;
            let v = if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                0.0
            } else if img.is_valid(x as usize, y as usize) {
                img.get(x as usize, y as usize, c)
            } else {
                return bilinear_sample(img, qx, qy, c);
            };
            acc += wxi * wyj * v;
        }
    }
    Some(acc)
}

#[inline]
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t + 2.0 * t2 - t3),
        0.5 * (2.0 - 5.0 * t2 + 3.0 * t3),
        0.5 * (t + 4.0 * t2 - 3.0 * t3),
        0.5 * (-t2 + t3),
    ]
}

/// Bilinear resize to an arbitrary target size (align-corners-false).
///
/// Source coordinates are clamped at the borders. The mask is conservative:
/// a target pixel is valid only if every contributing corner is valid. Used
/// for upsampling between pyramid levels and for the solver's bilinear
/// initialization downsampling.
pub fn bilinear_resize(img: &ImageGrid<f64>, tw: usize, th: usize) -> ImageGrid<f64> {
    let (w, h) = img.size();
    let nc = img.channels();
    let mut out = ImageGrid::<f64>::empty(tw, th, nc);
    let sx = w as f64 / tw as f64;
    let sy = h as f64 / th as f64;
    for y in 0..th {
        for x in 0..tw {
            let qx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let qy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
            let x0 = qx.floor() as usize;
            let y0 = qy.floor() as usize;
            let fx = qx - x0 as f64;
            let fy = qy - y0 as f64;
            let x1 = if fx > 0.0 { (x0 + 1).min(w - 1) } else { x0 };
            let y1 = if fy > 0.0 { (y0 + 1).min(h - 1) } else { y0 };
            let mut valid = true;
            for (cx, cy) in [(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
                valid &= img.is_valid(cx, cy);
            }
            if !valid {
                continue;
            }
            out.set_valid(x, y, true);
            for c in 0..nc {
                let v00 = img.get(x0, y0, c);
                let v10 = img.get(x1, y0, c);
                let v01 = img.get(x0, y1, c);
                let v11 = img.get(x1, y1, c);
                out.set(
                    x,
                    y,
                    c,
                    v00 * (1.0 - fx) * (1.0 - fy)
                        + v10 * fx * (1.0 - fy)
                        + v01 * (1.0 - fx) * fy
                        + v11 * fx * fy,
                );
            }
        }
    }
    out
}

/// Bilinear upsampling; `target >= source` in both axes.
pub fn bilinear_upsample(
    img: &ImageGrid<f64>,
    tw: usize,
    th: usize,
) -> Result<ImageGrid<f64>, Error> {
    let (w, h) = img.size();
    if tw < w || th < h {
        return Err(Error::InvalidParameter {
            what: "upsample target smaller than source",
        });
    }
    Ok(bilinear_resize(img, tw, th))
}

/// Sum of squared differences `|Dz - z0|^2` over the valid intersection,
/// together with the pixel count used. This is the prior term of the energy.
///
/// Only low-resolution pixels whose entire high-resolution block is valid
/// participate: the sensor averaged the full block, so a partially covered
/// block (domain boundary) would compare a different mean against `z0` and
/// bias the boundary depth.
pub fn prior_sse(z_hr: &ImageGrid<f64>, z0_lr: &ImageGrid<f64>, sf: usize) -> (f64, usize) {
    let dz = apply_d(z_hr, sf);
    let (w, h) = z_hr.size();
    let mut sse = 0.0;
    let mut count = 0usize;
    for (x, y) in dz.valid_pixels() {
        if x >= z0_lr.width() || y >= z0_lr.height() || !z0_lr.is_valid(x, y) {
            continue;
        }
        if !block_fully_valid(z_hr, x, y, sf, w, h) {
            continue;
        }
        let d = dz.get(x, y, 0) - z0_lr.get(x, y, 0);
        sse += d * d;
        count += 1;
    }
    (sse, count)
}

/// True when every in-image pixel of the `sf x sf` block of LR pixel
/// `(lx, ly)` is valid in `z_hr`.
pub fn block_fully_valid(
    z_hr: &ImageGrid<f64>,
    lx: usize,
    ly: usize,
    sf: usize,
    w: usize,
    h: usize,
) -> bool {
    for fy in (ly * sf)..((ly + 1) * sf).min(h) {
        for fx in (lx * sf)..((lx + 1) * sf).min(w) {
            if !z_hr.is_valid(fx, fy) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn random_grid(vals: &[f64], holes: &[bool], w: usize, h: usize) -> ImageGrid<f64> {
        let mut g = ImageGrid::<f64>::filled(w, h, 1, 0.0);
        for y in 0..h {
            for x in 0..w {
                g.set(x, y, 0, vals[y * w + x]);
                if holes[y * w + x] {
                    g.set_valid(x, y, false);
                }
            }
        }
        g
    }

    #[test]
    fn block_mean_hand_case() {
        let mut g = ImageGrid::<f64>::filled(2, 2, 1, 0.0);
        g.set(0, 0, 0, 1.0);
        g.set(1, 0, 0, 2.0);
        g.set(0, 1, 0, 3.0);
        g.set(1, 1, 0, 4.0);
        let lr = apply_d(&g, 2);
        assert_eq!(lr.size(), (1, 1));
        assert_eq!(lr.get(0, 0, 0), 2.5);
    }

    #[test]
    fn constant_preserved() {
        let g = ImageGrid::<f64>::filled(12, 8, 1, 1.7);
        for sf in [2, 4, 8] {
            let lr = apply_d(&g, sf);
            for (x, y) in lr.valid_pixels().collect::<Vec<_>>() {
                assert!((lr.get(x, y, 0) - 1.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_spreads_uniformly() {
        let template = ImageGrid::<f64>::filled(4, 4, 1, 1.0);
        let mut lr = ImageGrid::<f64>::empty(2, 2, 1);
        lr.set_valid(0, 0, true);
        lr.set(0, 0, 0, 1.0);
        let hr = apply_d_transpose(&lr, 2, &template);
        for y in 0..2 {
            for x in 0..2 {
                assert_eq!(hr.get(x, y, 0), 0.25);
            }
        }
        assert_eq!(hr.get(2, 0, 0), 0.0);
    }

    proptest! {
        #[test]
        fn adjoint_identity(
            xv in prop::collection::vec(-2.0f64..2.0, 96),
            yv in prop::collection::vec(-2.0f64..2.0, 96),
            xh in prop::collection::vec(prop::bool::weighted(0.15), 96),
            yh in prop::collection::vec(prop::bool::weighted(0.15), 96),
            sf in prop::sample::select(alloc::vec![2usize, 4, 8]),
        ) {
            let (w, h) = (12, 8);
            let x = random_grid(&xv, &xh, w, h);
            let lw = w.div_ceil(sf);
            let lh = h.div_ceil(sf);
            let y = random_grid(&yv[..lw * lh], &yh[..lw * lh], lw, lh);

            let dx = apply_d(&x, sf);
            let mut lhs = 0.0;
            for (px, py) in dx.valid_pixels() {
                if y.is_valid(px, py) {
                    lhs += dx.get(px, py, 0) * y.get(px, py, 0);
                }
            }
            let dty = apply_d_transpose(&y, sf, &x);
            let mut rhs = 0.0;
            for (px, py) in dty.valid_pixels() {
                if x.is_valid(px, py) {
                    rhs += dty.get(px, py, 0) * x.get(px, py, 0);
                }
            }
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn linearity(
            av in prop::collection::vec(-2.0f64..2.0, 64),
            bv in prop::collection::vec(-2.0f64..2.0, 64),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let no_holes = alloc::vec![false; 64];
            let a = random_grid(&av, &no_holes, 8, 8);
            let b = random_grid(&bv, &no_holes, 8, 8);
            let mut combo = ImageGrid::<f64>::filled(8, 8, 1, 0.0);
            for yy in 0..8 {
                for xx in 0..8 {
                    combo.set(xx, yy, 0, alpha * a.get(xx, yy, 0) + beta * b.get(xx, yy, 0));
                }
            }
            let da = apply_d(&a, 2);
            let db = apply_d(&b, 2);
            let dc = apply_d(&combo, 2);
            for (x, y) in dc.valid_pixels() {
                let expected = alpha * da.get(x, y, 0) + beta * db.get(x, y, 0);
                prop_assert!((dc.get(x, y, 0) - expected).abs() < 1e-12);
            }
        }

        #[test]
        fn bilinear_sample_reproduces_bilinear_fields(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            c in -2.0f64..2.0,
            d in -2.0f64..2.0,
            qx in 0.0f64..7.0,
            qy in 0.0f64..5.0,
        ) {
            let mut g = ImageGrid::<f64>::filled(8, 6, 1, 0.0);
            for y in 0..6 {
                for x in 0..8 {
                    let (xf, yf) = (x as f64, y as f64);
                    g.set(x, y, 0, a + b * xf + c * yf + d * xf * yf);
                }
            }
            let v = bilinear_sample(&g, qx, qy, 0).unwrap();
            let expected = a + b * qx + c * qy + d * qx * qy;
            prop_assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_integer_position_is_exact() {
        let mut g = ImageGrid::<f64>::filled(4, 4, 1, 0.0);
        g.set(2, 3, 0, 7.25);
        assert_eq!(bilinear_sample(&g, 2.0, 3.0, 0), Some(7.25));
    }

    #[test]
    fn sample_midpoint() {
        let mut g = ImageGrid::<f64>::filled(3, 1, 1, 0.0);
        g.set(0, 0, 0, 1.0);
        g.set(1, 0, 0, 3.0);
        assert_eq!(bilinear_sample(&g, 0.5, 0.0, 0), Some(2.0));
    }

    #[test]
    fn sample_invalid_corner_rejected() {
        let mut g = ImageGrid::<f64>::filled(3, 3, 1, 1.0);
        g.set_valid(1, 1, false);
        assert_eq!(bilinear_sample(&g, 0.5, 0.5, 0), None);
        assert_eq!(bilinear_sample(&g, 1.5, 1.5, 0), None);
        // corners (1,0) and (2,0) are untouched by the hole
        assert!(bilinear_sample(&g, 1.5, 0.0, 0).is_some());
    }

    #[test]
    fn sample_outside_rejected() {
        let g = ImageGrid::<f64>::filled(3, 3, 1, 1.0);
        assert_eq!(bilinear_sample(&g, -0.1, 1.0, 0), None);
        assert_eq!(bilinear_sample(&g, 2.1, 1.0, 0), None);
    }

    #[test]
    fn upsample_by_one_is_identity() {
        let mut g = ImageGrid::<f64>::filled(5, 4, 1, 0.0);
        for y in 0..4 {
            for x in 0..5 {
                g.set(x, y, 0, (x * 7 + y) as f64);
            }
        }
        let up = bilinear_upsample(&g, 5, 4).unwrap();
        assert_eq!(up, g);
    }

    #[test]
    fn upsample_constant_stays_constant() {
        let g = ImageGrid::<f64>::filled(4, 4, 1, 2.5);
        let up = bilinear_upsample(&g, 9, 7).unwrap();
        for (x, y) in up.valid_pixels().collect::<Vec<_>>() {
            assert!((up.get(x, y, 0) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn upsample_ramp_matches_closed_form() {
        // doubling a 1-D ramp: target pixel j samples source at
        // (j + 0.5)/2 - 0.5, clamped, so interior values are a ramp with
        // matching endpoints
        let mut g = ImageGrid::<f64>::filled(4, 1, 1, 0.0);
        for x in 0..4 {
            g.set(x, 0, 0, x as f64);
        }
        let up = bilinear_upsample(&g, 8, 1).unwrap();
        for j in 0..8 {
            let q = ((j as f64 + 0.5) * 0.5 - 0.5).clamp(0.0, 3.0);
            assert!((up.get(j, 0, 0) - q).abs() < 1e-12, "pixel {j}");
        }
        assert_eq!(up.get(0, 0, 0), 0.0);
        assert_eq!(up.get(7, 0, 0), 3.0);
    }

    #[test]
    fn replicate_then_downsample_is_identity() {
        let mut lr = ImageGrid::<f64>::filled(3, 2, 1, 0.0);
        for y in 0..2 {
            for x in 0..3 {
                lr.set(x, y, 0, (x + 10 * y) as f64);
            }
        }
        // replicate-upsample by 2
        let mut hr = ImageGrid::<f64>::filled(6, 4, 1, 0.0);
        for y in 0..4 {
            for x in 0..6 {
                hr.set(x, y, 0, lr.get(x / 2, y / 2, 0));
            }
        }
        let back = apply_d(&hr, 2);
        assert_eq!(back, lr);
    }
}
