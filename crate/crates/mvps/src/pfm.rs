//! PFM images: `Pf` (1 channel) and `PF` (3 channels), little-endian
//! (negative scale field), rows stored bottom-to-top per the format.
//!
//! Values round-trip exactly at f32 precision; masks are not part of the
//! format, so invalid pixels are written as their 0.0 sentinel and readers
//! that need a mask derive it (the dataset loader treats zero depth as
//! invalid).

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use mvpsr_core::ImageGrid;

use crate::IoError;

/// Writes a 1- or 3-channel grid as `Pf` / `PF`.
pub fn write_pfm(path: &Path, grid: &ImageGrid<f64>) -> Result<(), IoError> {
    let (w, h) = grid.size();
    let nc = grid.channels();
    if nc != 1 && nc != 3 {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            what: format!("PFM supports 1 or 3 channels, got {nc}"),
        });
    }
    let mut buf = Vec::with_capacity(64 + w * h * nc * 4);
    let magic = if nc == 1 { "Pf" } else { "PF" };
    write!(buf, "{magic}\n{w} {h}\n-1.0\n").expect("vec write");
    for y in (0..h).rev() {
        for x in 0..w {
            for c in 0..nc {
                buf.extend_from_slice(&(grid.get(x, y, c) as f32).to_le_bytes());
            }
        }
    }
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// Reads a `Pf` / `PF` file into an all-valid grid.
pub fn read_pfm(path: &Path) -> Result<ImageGrid<f64>, IoError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    let bad = |what: &str| IoError::Format {
        path: path.to_path_buf(),
        what: what.to_string(),
    };

    let mut pos = 0usize;
    let mut token = || -> Result<String, IoError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                what: "truncated PFM header".to_string(),
            });
        }
        let end = pos;
        // consume exactly one whitespace after the token
        if pos < bytes.len() {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..end]).into_owned())
    };

    let magic = token()?;
    let nc = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        _ => return Err(bad("not a PFM file (bad magic)")),
    };
    let w: usize = token()?.parse().map_err(|_| bad("bad width"))?;
    let h: usize = token()?.parse().map_err(|_| bad("bad height"))?;
    let scale: f64 = token()?.parse().map_err(|_| bad("bad scale"))?;
    if scale >= 0.0 {
        return Err(bad("big-endian PFM not supported (scale must be negative)"));
    }
    let need = w * h * nc * 4;
    if bytes.len() < pos + need {
        return Err(bad("truncated PFM payload"));
    }
    let mut grid = ImageGrid::<f64>::filled(w, h, nc, 0.0);
    let mut off = pos;
    for y in (0..h).rev() {
        for x in 0..w {
            for c in 0..nc {
                let v = f32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes"));
                grid.set(x, y, c, v as f64);
                off += 4;
            }
        }
    }
    Ok(grid)
}

fn io_err(path: &Path, e: io::Error) -> IoError {
    IoError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_single_channel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.pfm");
        let mut g = ImageGrid::<f64>::filled(5, 3, 1, 0.0);
        for y in 0..3 {
            for x in 0..5 {
                g.set(x, y, 0, (x as f64 + 0.25) * (y as f64 - 1.5));
            }
        }
        write_pfm(&p, &g).unwrap();
        let r = read_pfm(&p).unwrap();
        assert_eq!(r.size(), (5, 3));
        assert_eq!(r.channels(), 1);
        for y in 0..3 {
            for x in 0..5 {
                assert_eq!(r.get(x, y, 0), g.get(x, y, 0) as f32 as f64);
            }
        }
    }

    #[test]
    fn roundtrip_rgb_and_payload_bits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pfm");
        let q = dir.path().join("b.pfm");
        let mut g = ImageGrid::<f64>::filled(4, 4, 3, 0.0);
        for y in 0..4 {
            for x in 0..4 {
                for c in 0..3 {
                    g.set(x, y, c, (x + 7 * y + 13 * c) as f64 / 7.0);
                }
            }
        }
        write_pfm(&p, &g).unwrap();
        let r = read_pfm(&p).unwrap();
        write_pfm(&q, &r).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
    }

    #[test]
    fn rejects_positive_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("be.pfm");
        std::fs::write(&p, b"Pf\n1 1\n1.0\n\x00\x00\x80\x3f").unwrap();
        assert!(matches!(read_pfm(&p), Err(IoError::Format { .. })));
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.pfm");
        std::fs::write(&p, b"P6\n1 1\n255\n").unwrap();
        assert!(matches!(read_pfm(&p), Err(IoError::Format { .. })));
    }
}
