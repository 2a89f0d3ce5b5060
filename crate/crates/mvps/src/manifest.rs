//! The plain-text dataset manifest and the dataset loader.
//!
//! A manifest is a key-value file (`key = value`, `#` comments) with keys
//! `rgb_glob`, `depth_lr`, `mask`, `f`, `cx`, `cy`, `depth_scale` and
//! optional `gt_depth`, `gt_albedo`, `gt_normals`, `gt_poses`. Relative
//! paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mvpsr_core::photometry::LightingVector;
use mvpsr_core::solver::SolverInput;
use mvpsr_core::{CameraIntrinsics, ImageGrid, TwistPose};

use crate::{fmt_full, pfm, png, results, IoError};

/// Parsed manifest: resolved file paths plus intrinsics.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    /// Sorted expansion of `rgb_glob`; entry 0 is the reference frame.
    pub rgb: Vec<PathBuf>,
    pub depth_lr: PathBuf,
    pub mask: PathBuf,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    /// Meters per raw unit for 16-bit PNG depth; PFM depth ignores it.
    pub depth_scale: f64,
    pub gt_depth: Option<PathBuf>,
    pub gt_albedo: Option<PathBuf>,
    pub gt_normals: Option<PathBuf>,
    pub gt_poses: Option<PathBuf>,
}

/// Optional ground truth loaded alongside a dataset.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub depth: Option<ImageGrid<f64>>,
    pub albedo: Option<ImageGrid<f64>>,
    pub normals: Option<ImageGrid<f64>>,
    pub poses: Option<Vec<TwistPose>>,
    pub lights: Option<Vec<LightingVector>>,
}

/// A fully loaded dataset, ready for the solver.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub input: SolverInput,
    pub gt: GroundTruth,
}

/// Splits a key-value file into `(key, value)` pairs, skipping blanks and
/// `#` comments.
pub(crate) fn parse_kv(text: &str, path: &Path) -> Result<Vec<(String, String)>, IoError> {
    let mut pairs = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| IoError::Format {
            path: path.to_path_buf(),
            what: format!("line {}: expected `key = value`, got {line:?}", ln + 1),
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_f64(map: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<f64, IoError> {
    let raw = map.get(key).ok_or_else(|| IoError::Format {
        path: path.to_path_buf(),
        what: format!("missing key `{key}`"),
    })?;
    raw.parse().map_err(|_| IoError::Format {
        path: path.to_path_buf(),
        what: format!("key `{key}`: not a number: {raw:?}"),
    })
}

/// Reads and resolves a manifest file, expanding `rgb_glob`.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let map: BTreeMap<String, String> = parse_kv(&text, path)?.into_iter().collect();
    let resolve = |v: &String| -> PathBuf { base.join(v) };
    let need_path = |key: &str| -> Result<PathBuf, IoError> {
        map.get(key).map(resolve).ok_or_else(|| IoError::Format {
            path: path.to_path_buf(),
            what: format!("missing key `{key}`"),
        })
    };

    let pattern = map.get("rgb_glob").ok_or_else(|| IoError::Format {
        path: path.to_path_buf(),
        what: "missing key `rgb_glob`".to_string(),
    })?;
    let full_pattern = base.join(pattern);
    let mut rgb: Vec<PathBuf> = glob::glob(&full_pattern.to_string_lossy())
        .map_err(|e| IoError::Format {
            path: path.to_path_buf(),
            what: format!("bad rgb_glob {pattern:?}: {e}"),
        })?
        .filter_map(Result::ok)
        .collect();
    rgb.sort();
    if rgb.is_empty() {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            what: format!("rgb_glob {pattern:?} matched no files"),
        });
    }

    Ok(DatasetManifest {
        rgb,
        depth_lr: need_path("depth_lr")?,
        mask: need_path("mask")?,
        f: parse_f64(&map, "f", path)?,
        cx: parse_f64(&map, "cx", path)?,
        cy: parse_f64(&map, "cy", path)?,
        depth_scale: parse_f64(&map, "depth_scale", path)?,
        gt_depth: map.get("gt_depth").map(resolve),
        gt_albedo: map.get("gt_albedo").map(resolve),
        gt_normals: map.get("gt_normals").map(resolve),
        gt_poses: map.get("gt_poses").map(resolve),
    })
}

/// Writes a manifest; `rgb_glob` and file paths are stored as given
/// (interpreted relative to `path`'s directory on load).
pub fn write_manifest(
    path: &Path,
    rgb_glob: &str,
    depth_lr: &str,
    mask: &str,
    k: &CameraIntrinsics,
    depth_scale: f64,
    gt: &[(&str, &str)],
) -> Result<(), IoError> {
    let mut text = String::new();
    text.push_str(&format!("rgb_glob = {rgb_glob}\n"));
    text.push_str(&format!("depth_lr = {depth_lr}\n"));
    text.push_str(&format!("mask = {mask}\n"));
    text.push_str(&format!("f = {}\n", fmt_full(k.f)));
    text.push_str(&format!("cx = {}\n", fmt_full(k.cx)));
    text.push_str(&format!("cy = {}\n", fmt_full(k.cy)));
    text.push_str(&format!("depth_scale = {}\n", fmt_full(depth_scale)));
    for (key, value) in gt {
        text.push_str(&format!("{key} = {value}\n"));
    }
    std::fs::write(path, text).map_err(|e| IoError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Reads a depth file by extension: PFM natively, 16-bit PNG via
/// `depth_scale`. Zero depth marks a pixel invalid either way.
pub fn read_depth(path: &Path, depth_scale: f64) -> Result<ImageGrid<f64>, IoError> {
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase());
    let mut grid = match ext.as_deref() {
        Some("pfm") => pfm::read_pfm(path)?,
        Some("png") => png::read_depth16(path, depth_scale)?,
        _ => {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                what: "depth must be .pfm or .png".to_string(),
            })
        }
    };
    if grid.channels() != 1 {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            what: format!("depth must be single-channel, got {}", grid.channels()),
        });
    }
    let (w, h) = grid.size();
    for y in 0..h {
        for x in 0..w {
            if grid.get(x, y, 0) == 0.0 {
                grid.set_valid(x, y, false);
            }
        }
    }
    Ok(grid)
}

/// Loads the full dataset named by a manifest, validating sizes.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, IoError> {
    let m = read_manifest(manifest_path)?;
    let mut frames = Vec::with_capacity(m.rgb.len());
    for p in &m.rgb {
        let frame = png::read_rgb(p)?;
        if let Some(first) = frames.first() {
            let first: &ImageGrid<f64> = first;
            if frame.size() != first.size() {
                return Err(IoError::SizeMismatch {
                    what: format!(
                        "{}: frame is {:?} but reference frame is {:?}",
                        p.display(),
                        frame.size(),
                        first.size()
                    ),
                });
            }
        }
        frames.push(frame);
    }
    let (hw, hh) = frames[0].size();

    let depth_lr = read_depth(&m.depth_lr, m.depth_scale)?;
    let (lw, lh) = depth_lr.size();
    if lw == 0 || lh == 0 || lw > hw || lh > hh {
        return Err(IoError::SizeMismatch {
            what: format!(
                "{}: LR depth {lw}x{lh} incompatible with frames {hw}x{hh}",
                m.depth_lr.display()
            ),
        });
    }
    // sf is implied by the sizes: LR = ceil(HR / sf) in both dimensions
    let sf = hw.div_ceil(lw);
    if hw.div_ceil(sf) != lw || hh.div_ceil(sf) != lh {
        return Err(IoError::SizeMismatch {
            what: format!(
                "{}: LR depth {lw}x{lh} is not ceil({hw}x{hh} / sf) for any integer sf",
                m.depth_lr.display()
            ),
        });
    }

    let (mask, mw, mh) = png::read_mask(&m.mask)?;
    if (mw, mh) != (hw, hh) {
        return Err(IoError::SizeMismatch {
            what: format!(
                "{}: mask is {mw}x{mh} but frames are {hw}x{hh}",
                m.mask.display()
            ),
        });
    }

    let intrinsics = CameraIntrinsics::new(m.f, m.cx, m.cy)?;

    let gt_depth = m
        .gt_depth
        .as_deref()
        .map(|p| read_depth(p, m.depth_scale))
        .transpose()?;
    let gt_albedo = m.gt_albedo.as_deref().map(pfm::read_pfm).transpose()?;
    let gt_normals = m.gt_normals.as_deref().map(pfm::read_pfm).transpose()?;
    let (gt_poses, gt_lights) = match m.gt_poses.as_deref() {
        Some(p) => {
            let (poses, lights) = results::read_pose_table(p)?;
            (Some(poses), Some(lights))
        }
        None => (None, None),
    };

    Ok(Dataset {
        input: SolverInput {
            frames,
            depth_lr,
            mask,
            intrinsics,
            sf,
        },
        gt: GroundTruth {
            depth: gt_depth,
            albedo: gt_albedo,
            normals: gt_normals,
            poses: gt_poses,
            lights: gt_lights,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_small_dataset(dir: &Path, frame_sizes: &[(usize, usize)]) -> PathBuf {
        for (i, &(w, h)) in frame_sizes.iter().enumerate() {
            let g = ImageGrid::<f64>::filled(w, h, 3, 0.5);
            png::write_rgb(&dir.join(format!("frame_{i:03}.png")), &g).unwrap();
        }
        let (w, h) = frame_sizes[0];
        let lr = ImageGrid::<f64>::filled(w.div_ceil(2), h.div_ceil(2), 1, 1.5);
        pfm::write_pfm(&dir.join("depth_lr.pfm"), &lr).unwrap();
        png::write_mask(&dir.join("mask.png"), &vec![true; w * h], w, h).unwrap();
        let p = dir.join("manifest.txt");
        write_manifest(
            &p,
            "frame_*.png",
            "depth_lr.pfm",
            "mask.png",
            &CameraIntrinsics::new(100.0, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0).unwrap(),
            1.0,
            &[],
        )
        .unwrap();
        p
    }

    #[test]
    fn loads_consistent_dataset_and_derives_sf() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_small_dataset(dir.path(), &[(8, 6), (8, 6), (8, 6)]);
        let ds = load_dataset(&p).unwrap();
        assert_eq!(ds.input.frames.len(), 3);
        assert_eq!(ds.input.sf, 2);
        assert_eq!(ds.input.depth_lr.size(), (4, 3));
        assert!((ds.input.frames[1].get(3, 2, 1) - 0.5).abs() < 1e-2);
    }

    #[test]
    fn frame_size_mismatch_is_reported_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_small_dataset(dir.path(), &[(8, 6), (10, 6), (8, 6)]);
        let e = load_dataset(&p).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("frame_001.png"), "{msg}");
        assert!(msg.contains("size mismatch"), "{msg}");
    }

    #[test]
    fn missing_key_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.txt");
        std::fs::write(&p, "rgb_glob = *.png\n").unwrap();
        let e = read_manifest(&p).unwrap_err();
        assert!(e.to_string().contains("rgb_glob"), "{e}");
    }

    #[test]
    fn zero_depth_pixels_load_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let mut lr = ImageGrid::<f64>::filled(4, 3, 1, 2.0);
        lr.set(1, 1, 0, 0.0);
        let p = dir.path().join("z.pfm");
        pfm::write_pfm(&p, &lr).unwrap();
        let r = read_depth(&p, 1.0).unwrap();
        assert!(!r.is_valid(1, 1));
        assert!(r.is_valid(0, 0));
    }
}
