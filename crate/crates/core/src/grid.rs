//! Image containers, validity masks and the pinhole camera model.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;

/// A 2-D scalar or vector field over a pixel domain with a per-pixel
/// validity mask.
///
/// Data is stored row-major with interleaved channels:
/// `data[(y * width + x) * channels + c]`. Invalid pixels carry the value
/// `T::default()` as a sentinel and are excluded by the mask, never by value
/// tests. One grid houses depth, RGB intensity, albedo, weights or normals
/// depending on `channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid<T = f64> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
    mask: Vec<bool>,
}

impl<T: Copy + Default> ImageGrid<T> {
    /// All-valid grid filled with `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
            mask: vec![true; width * height],
        }
    }

    /// All-invalid grid filled with the sentinel value.
    pub fn empty(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![T::default(); width * height * channels],
            mask: vec![false; width * height],
        }
    }

    /// Builds a grid from raw parts.
    ///
    /// `data` must have length `width * height * channels` and `mask` length
    /// `width * height`.
    pub fn from_parts(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<T>,
        mask: Vec<bool>,
    ) -> Result<Self, Error> {
        if data.len() != width * height * channels || mask.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                got: (data.len(), mask.len()),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            mask,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixel_index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: T) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Marks a pixel valid or invalid. Invalidation resets the pixel to the
    /// sentinel value so stale data never leaks into sums.
    pub fn set_valid(&mut self, x: usize, y: usize, valid: bool) {
        let p = y * self.width + x;
        self.mask[p] = valid;
        if !valid {
            for c in 0..self.channels {
                self.data[p * self.channels + c] = T::default();
            }
        }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Iterator over the coordinates of all mask-valid pixels.
    pub fn valid_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(move |(p, _)| (p % w, p / w))
    }

    /// Replaces the mask wholesale, resetting newly invalid pixels.
    pub fn apply_mask(&mut self, mask: &[bool]) -> Result<(), Error> {
        if mask.len() != self.mask.len() {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                got: (mask.len(), 0),
            });
        }
        for p in 0..mask.len() {
            if !mask[p] {
                self.mask[p] = false;
                for c in 0..self.channels {
                    self.data[p * self.channels + c] = T::default();
                }
            }
        }
        Ok(())
    }
}

impl ImageGrid<f64> {
    /// Mean over mask-valid samples across all channels.
    pub fn mean_valid(&self) -> Result<f64, Error> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (x, y) in self.valid_pixels() {
            for c in 0..self.channels {
                sum += self.get(x, y, c);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(sum / count as f64)
    }
}

/// Per-pixel boolean AND of two validity masks.
///
/// The result is a 1-channel grid whose mask (and data) is the intersection.
pub fn mask_intersection<T: Copy + Default, U: Copy + Default>(
    a: &ImageGrid<T>,
    b: &ImageGrid<U>,
) -> Result<ImageGrid<bool>, Error> {
    if a.size() != b.size() {
        return Err(Error::DimensionMismatch {
            expected: a.size(),
            got: b.size(),
        });
    }
    let mut out = ImageGrid::<bool>::empty(a.width(), a.height(), 1);
    for y in 0..a.height() {
        for x in 0..a.width() {
            let v = a.is_valid(x, y) && b.is_valid(x, y);
            out.set_valid(x, y, v);
            out.set(x, y, 0, v);
        }
    }
    Ok(out)
}

/// Shrinks a mask by `radius` pixels (8-neighbourhood). Used to carve out
/// interior regions away from silhouettes.
pub fn erode_mask(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    let mut cur: Vec<bool> = mask.to_vec();
    for _ in 0..radius {
        let prev = cur.clone();
        for y in 0..height {
            for x in 0..width {
                if !prev[y * width + x] {
                    continue;
                }
                let mut keep = true;
                'outer: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                            keep = false;
                            break 'outer;
                        }
                        if !prev[ny as usize * width + nx as usize] {
                            keep = false;
                            break 'outer;
                        }
                    }
                }
                cur[y * width + x] = keep;
            }
        }
    }
    cur
}

/// Pinhole camera with a single focal length and a principal point, both in
/// pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(f: f64, cx: f64, cy: f64) -> Result<Self, Error> {
        if !(f > 0.0) || !f.is_finite() || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::InvalidIntrinsics);
        }
        Ok(Self { f, cx, cy })
    }

    /// Intrinsics for an image scaled by `scale` (both f and c scale
    /// linearly with resolution).
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            f: self.f * scale,
            cx: self.cx * scale,
            cy: self.cy * scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_reset_on_invalidate() {
        let mut g = ImageGrid::<f64>::filled(4, 3, 2, 7.0);
        g.set_valid(2, 1, false);
        assert_eq!(g.get(2, 1, 0), 0.0);
        assert_eq!(g.get(2, 1, 1), 0.0);
        assert!(!g.is_valid(2, 1));
        assert_eq!(g.valid_count(), 11);
    }

    #[test]
    fn intersection_trivial_cases() {
        let a = ImageGrid::<f64>::filled(5, 4, 1, 1.0);
        let b = ImageGrid::<f64>::filled(5, 4, 1, 2.0);
        let m = mask_intersection(&a, &b).unwrap();
        assert_eq!(m.valid_count(), 20);

        let e = ImageGrid::<f64>::empty(5, 4, 1);
        let m = mask_intersection(&a, &e).unwrap();
        assert_eq!(m.valid_count(), 0);
    }

    #[test]
    fn intersection_matches_per_pixel_and() {
        // disk mask ∩ half-plane mask, checked against a brute-force AND
        let (w, h) = (21, 21);
        let mut disk = ImageGrid::<f64>::empty(w, h, 1);
        let mut half = ImageGrid::<f64>::empty(w, h, 1);
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 - 10.0;
                let dy = y as f64 - 10.0;
                if dx * dx + dy * dy <= 64.0 {
                    disk.set_valid(x, y, true);
                }
                if x >= 10 {
                    half.set_valid(x, y, true);
                }
            }
        }
        let m = mask_intersection(&disk, &half).unwrap();
        for y in 0..h {
            for x in 0..w {
                assert_eq!(m.is_valid(x, y), disk.is_valid(x, y) && half.is_valid(x, y));
            }
        }
    }

    #[test]
    fn intersection_rejects_size_mismatch() {
        let a = ImageGrid::<f64>::filled(5, 4, 1, 1.0);
        let b = ImageGrid::<f64>::filled(4, 5, 1, 1.0);
        assert!(matches!(
            mask_intersection(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn intrinsics_reject_nonpositive_f() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0).is_err());
        assert!(CameraIntrinsics::new(-5.0, 1.0, 1.0).is_err());
    }
}
