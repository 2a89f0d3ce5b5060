//! PNG ingestion and export: 8-bit RGB frames mapped to `[0, 1]`, 8-bit
//! masks (nonzero = valid) and 16-bit grayscale depth scaled to meters.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, RgbImage};
use mvpsr_core::ImageGrid;

use crate::IoError;

fn open(path: &Path) -> Result<DynamicImage, IoError> {
    image::open(path).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        what: format!("cannot decode PNG: {e}"),
    })
}

/// Reads an 8-bit RGB PNG into a 3-channel grid with values in `[0, 1]`.
pub fn read_rgb(path: &Path) -> Result<ImageGrid<f64>, IoError> {
    let img = open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut grid = ImageGrid::<f64>::filled(w, h, 3, 0.0);
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            grid.set(x as usize, y as usize, c, px.0[c] as f64 / 255.0);
        }
    }
    Ok(grid)
}

/// Writes a 3-channel grid as 8-bit RGB, clamping values to `[0, 1]`.
pub fn write_rgb(path: &Path, grid: &ImageGrid<f64>) -> Result<(), IoError> {
    let (w, h) = grid.size();
    let mut img = RgbImage::new(w as u32, h as u32);
    for (x, y, px) in img.enumerate_pixels_mut() {
        for c in 0..3 {
            let v = grid.get(x as usize, y as usize, c).clamp(0.0, 1.0);
            px.0[c] = (v * 255.0).round() as u8;
        }
    }
    img.save(path).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        what: format!("cannot encode PNG: {e}"),
    })
}

/// Reads an 8-bit grayscale mask; nonzero pixels are valid.
pub fn read_mask(path: &Path) -> Result<(Vec<bool>, usize, usize), IoError> {
    let img = open(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mask = img.pixels().map(|p| p.0[0] != 0).collect();
    Ok((mask, w, h))
}

/// Writes a validity mask as an 8-bit grayscale PNG (255 = valid).
pub fn write_mask(path: &Path, mask: &[bool], w: usize, h: usize) -> Result<(), IoError> {
    let data: Vec<u8> = mask.iter().map(|&v| if v { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(w as u32, h as u32, data).ok_or_else(|| IoError::SizeMismatch {
        what: format!("mask buffer does not match {w}x{h} for {}", path.display()),
    })?;
    img.save(path).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        what: format!("cannot encode PNG: {e}"),
    })
}

/// Reads a 16-bit grayscale depth PNG and scales raw units to meters.
/// Zero raw depth marks the pixel invalid.
pub fn read_depth16(path: &Path, depth_scale: f64) -> Result<ImageGrid<f64>, IoError> {
    let img = open(path)?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut grid = ImageGrid::<f64>::empty(w, h, 1);
    for (x, y, px) in img.enumerate_pixels() {
        let raw = px.0[0];
        if raw != 0 {
            grid.set_valid(x as usize, y as usize, true);
            grid.set(x as usize, y as usize, 0, raw as f64 * depth_scale);
        }
    }
    Ok(grid)
}

/// Writes depth as 16-bit grayscale PNG in raw units of `depth_scale` meters;
/// invalid pixels become raw zero.
pub fn write_depth16(path: &Path, grid: &ImageGrid<f64>, depth_scale: f64) -> Result<(), IoError> {
    let (w, h) = grid.size();
    let mut img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::new(w as u32, h as u32);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let (xu, yu) = (x as usize, y as usize);
        px.0[0] = if grid.is_valid(xu, yu) {
            (grid.get(xu, yu, 0) / depth_scale).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
    }
    img.save(path).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        what: format!("cannot encode PNG: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_round_trip_is_exactly_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        let mut g = ImageGrid::<f64>::filled(6, 4, 3, 0.0);
        for y in 0..4 {
            for x in 0..6 {
                for c in 0..3 {
                    g.set(x, y, c, ((x + 6 * y + c * 29) % 256) as f64 / 255.0);
                }
            }
        }
        write_rgb(&p, &g).unwrap();
        let r = read_rgb(&p).unwrap();
        for y in 0..4 {
            for x in 0..6 {
                for c in 0..3 {
                    assert!((r.get(x, y, c) - g.get(x, y, c)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn depth16_applies_unit_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.png");
        let mut g = ImageGrid::<f64>::empty(3, 2, 1);
        g.set_valid(1, 1, true);
        g.set(1, 1, 0, 2.0);
        write_depth16(&p, &g, 0.001).unwrap();
        let r = read_depth16(&p, 0.001).unwrap();
        // raw value 2000 at scale 0.001 comes back as 2.0 meters
        assert!((r.get(1, 1, 0) - 2.0).abs() < 1e-12);
        assert!(r.is_valid(1, 1));
        // zero raw depth stays invalid
        assert!(!r.is_valid(0, 0));
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let mask = vec![true, false, false, true, true, false];
        write_mask(&p, &mask, 3, 2).unwrap();
        let (r, w, h) = read_mask(&p).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(r, mask);
    }

    #[test]
    fn missing_file_is_a_format_error_with_path() {
        let e = read_rgb(Path::new("/nonexistent/frame.png")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/frame.png"));
    }
}
