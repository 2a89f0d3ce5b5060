//! Result directories and on-disk dataset generation.
//!
//! A result directory contains `depth.pfm`, `albedo.pfm` plus the clamped
//! 8-bit `albedo.png` preview, `normals.pfm`, the `poses_lighting.txt`
//! table (one row per frame: `i  xi1..xi6  l1..l4`), `intrinsics.txt`,
//! `diagnostics.txt` and `mesh.obj`. A generated dataset directory contains
//! the frames, LR depth, mask, a manifest and a `gt/` subdirectory in the
//! same result layout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mvpsr_core::geometry::{normals_from_depth, reproject};
use mvpsr_core::photometry::LightingVector;
use mvpsr_core::solver::{SceneEstimate, SweepRecord};
use mvpsr_core::{CameraIntrinsics, ImageGrid, TwistPose};
use nalgebra::{Vector4, Vector6};

use crate::scene::GeneratedDataset;
use crate::{fmt_full, manifest, pfm, png, IoError};

fn io_err(path: &Path, e: std::io::Error) -> IoError {
    IoError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes the per-frame pose/lighting table. Frame 0's twist is six exact
/// zeros (the pinned reference).
pub fn write_pose_table(
    path: &Path,
    poses: &[TwistPose],
    lights: &[LightingVector],
) -> Result<(), IoError> {
    let mut text = String::from("# i  xi1 xi2 xi3 xi4 xi5 xi6  l1 l2 l3 l4\n");
    for (i, (pose, light)) in poses.iter().zip(lights).enumerate() {
        let xi = if i == 0 {
            Vector6::zeros()
        } else {
            pose.twist()
        };
        write!(text, "{i}").expect("string write");
        for k in 0..6 {
            write!(text, " {}", fmt_full(xi[k])).expect("string write");
        }
        for k in 0..4 {
            write!(text, " {}", fmt_full(light[k])).expect("string write");
        }
        text.push('\n');
    }
    write_text(path, &text)
}

/// Reads a pose/lighting table back.
pub fn read_pose_table(path: &Path) -> Result<(Vec<TwistPose>, Vec<LightingVector>), IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut poses = Vec::new();
    let mut lights = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| IoError::Format {
                path: path.to_path_buf(),
                what: format!("line {}: non-numeric pose row", ln + 1),
            })?;
        if nums.len() != 11 {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                what: format!("line {}: expected 11 columns, got {}", ln + 1, nums.len()),
            });
        }
        if nums[0] as usize != poses.len() {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                what: format!("line {}: frame indices out of order", ln + 1),
            });
        }
        let xi = Vector6::from_iterator(nums[1..7].iter().copied());
        poses.push(TwistPose::from_twist(xi));
        lights.push(Vector4::from_iterator(nums[7..11].iter().copied()));
    }
    if poses.is_empty() {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            what: "empty pose table".to_string(),
        });
    }
    Ok((poses, lights))
}

fn write_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<(), IoError> {
    write_text(
        path,
        &format!(
            "f = {}\ncx = {}\ncy = {}\n",
            fmt_full(k.f),
            fmt_full(k.cx),
            fmt_full(k.cy)
        ),
    )
}

/// Reads an `intrinsics.txt` written by [`save_results`] or the generator.
pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let pairs = manifest::parse_kv(&text, path)?;
    let mut f = None;
    let mut cx = None;
    let mut cy = None;
    for (k, v) in pairs {
        let num: f64 = v.parse().map_err(|_| IoError::Format {
            path: path.to_path_buf(),
            what: format!("key `{k}`: not a number: {v:?}"),
        })?;
        match k.as_str() {
            "f" => f = Some(num),
            "cx" => cx = Some(num),
            "cy" => cy = Some(num),
            _ => {}
        }
    }
    match (f, cx, cy) {
        (Some(f), Some(cx), Some(cy)) => Ok(CameraIntrinsics::new(f, cx, cy)?),
        _ => Err(IoError::Format {
            path: path.to_path_buf(),
            what: "intrinsics file needs keys f, cx, cy".to_string(),
        }),
    }
}

/// Triangulates the valid pixels of a depth map into an OBJ mesh. Vertex
/// count equals the valid-pixel count; each 2x2 block of valid pixels
/// contributes two triangles.
pub fn write_obj_mesh(
    path: &Path,
    depth: &ImageGrid<f64>,
    k: &CameraIntrinsics,
) -> Result<(), IoError> {
    let (w, h) = depth.size();
    let mut index = vec![0usize; w * h];
    let mut text = String::new();
    let mut next = 1usize;
    for (x, y) in depth.valid_pixels() {
        let p = reproject(x as f64, y as f64, depth.get(x, y, 0), k);
        writeln!(text, "v {} {} {}", fmt_full(p.x), fmt_full(p.y), fmt_full(p.z))
            .expect("string write");
        index[y * w + x] = next;
        next += 1;
    }
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let a = index[y * w + x];
            let b = index[y * w + x + 1];
            let c = index[(y + 1) * w + x];
            let d = index[(y + 1) * w + x + 1];
            if a != 0 && b != 0 && c != 0 && d != 0 {
                writeln!(text, "f {a} {b} {d}").expect("string write");
                writeln!(text, "f {a} {d} {c}").expect("string write");
            }
        }
    }
    write_text(path, &text)
}

fn format_diagnostics(records: &[SweepRecord]) -> String {
    let mut text = String::new();
    for r in records {
        write!(
            text,
            "level={} sweep={} energy={}",
            r.level,
            r.sweep,
            fmt_full(r.energy)
        )
        .expect("string write");
        for b in &r.blocks {
            write!(
                text,
                " {}={}->{}",
                b.name,
                fmt_full(b.surrogate_before),
                fmt_full(b.surrogate_after)
            )
            .expect("string write");
        }
        write!(text, " elapsed_ms={}", fmt_full(r.elapsed_ms)).expect("string write");
        text.push('\n');
    }
    text
}

/// Writes a complete result directory for an estimate.
pub fn save_results(
    out_dir: &Path,
    estimate: &SceneEstimate,
    k: &CameraIntrinsics,
    records: &[SweepRecord],
) -> Result<(), IoError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    pfm::write_pfm(&out_dir.join("depth.pfm"), &estimate.depth)?;
    pfm::write_pfm(&out_dir.join("albedo.pfm"), &estimate.albedo)?;
    png::write_rgb(&out_dir.join("albedo.png"), &estimate.albedo)?;
    let normals = normals_from_depth(&estimate.depth, k).normals;
    pfm::write_pfm(&out_dir.join("normals.pfm"), &normals)?;
    write_pose_table(
        &out_dir.join("poses_lighting.txt"),
        &estimate.poses,
        &estimate.lights,
    )?;
    write_intrinsics(&out_dir.join("intrinsics.txt"), k)?;
    write_text(&out_dir.join("diagnostics.txt"), &format_diagnostics(records))?;
    write_obj_mesh(&out_dir.join("mesh.obj"), &estimate.depth, k)?;
    Ok(())
}

/// The readable half of a result directory.
#[derive(Debug, Clone)]
pub struct ResultsBundle {
    pub depth: ImageGrid<f64>,
    pub albedo: ImageGrid<f64>,
    pub normals: ImageGrid<f64>,
    pub poses: Vec<TwistPose>,
    pub lights: Vec<LightingVector>,
    pub intrinsics: CameraIntrinsics,
}

/// Reads a result directory back. Zero depth is treated as invalid,
/// matching the write-side sentinel.
pub fn load_results(dir: &Path) -> Result<ResultsBundle, IoError> {
    let depth = manifest::read_depth(&dir.join("depth.pfm"), 1.0)?;
    let albedo = pfm::read_pfm(&dir.join("albedo.pfm"))?;
    let normals = pfm::read_pfm(&dir.join("normals.pfm"))?;
    let (poses, lights) = read_pose_table(&dir.join("poses_lighting.txt"))?;
    let intrinsics = read_intrinsics(&dir.join("intrinsics.txt"))?;
    Ok(ResultsBundle {
        depth,
        albedo,
        normals,
        poses,
        lights,
        intrinsics,
    })
}

/// Writes a generated dataset: frames, LR depth, mask, manifest and the
/// `gt/` subdirectory. Returns the manifest path.
pub fn write_dataset(out_dir: &Path, d: &GeneratedDataset) -> Result<PathBuf, IoError> {
    std::fs::create_dir_all(out_dir.join("gt")).map_err(|e| io_err(out_dir, e))?;
    for (i, frame) in d.frames.iter().enumerate() {
        png::write_rgb(&out_dir.join(format!("frame_{i:03}.png")), frame)?;
    }
    pfm::write_pfm(&out_dir.join("depth_lr.pfm"), &d.depth_lr)?;
    let (w, h) = d.frames[0].size();
    png::write_mask(&out_dir.join("mask.png"), &d.mask, w, h)?;

    pfm::write_pfm(&out_dir.join("gt/depth.pfm"), &d.gt_depth)?;
    pfm::write_pfm(&out_dir.join("gt/albedo.pfm"), &d.gt_albedo)?;
    pfm::write_pfm(&out_dir.join("gt/normals.pfm"), &d.gt_normals)?;
    write_pose_table(
        &out_dir.join("gt/poses_lighting.txt"),
        &d.gt_poses,
        &d.gt_lights,
    )?;
    write_intrinsics(&out_dir.join("gt/intrinsics.txt"), &d.intrinsics)?;

    let manifest_path = out_dir.join("manifest.txt");
    manifest::write_manifest(
        &manifest_path,
        "frame_*.png",
        "depth_lr.pfm",
        "mask.png",
        &d.intrinsics,
        1.0,
        &[
            ("gt_depth", "gt/depth.pfm"),
            ("gt_albedo", "gt/albedo.pfm"),
            ("gt_normals", "gt/normals.pfm"),
            ("gt_poses", "gt/poses_lighting.txt"),
        ],
    )?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mvpsr_core::se3::TwistPose;

    fn small_estimate() -> (SceneEstimate, CameraIntrinsics) {
        let k = CameraIntrinsics::new(40.0, 3.5, 2.5).unwrap();
        let mut depth = ImageGrid::<f64>::empty(8, 6, 1);
        let mut albedo = ImageGrid::<f64>::empty(8, 6, 3);
        for y in 1..5 {
            for x in 2..7 {
                depth.set_valid(x, y, true);
                depth.set(x, y, 0, 1.5 + 0.01 * (x + y) as f64);
                albedo.set_valid(x, y, true);
                for c in 0..3 {
                    albedo.set(x, y, c, 0.1 * (c + 1) as f64);
                }
            }
        }
        let xi = Vector6::new(0.01, -0.02, 0.005, 0.03, -0.01, 0.02);
        let estimate = SceneEstimate {
            depth,
            albedo,
            poses: vec![TwistPose::identity(), TwistPose::from_twist(xi)],
            lights: vec![
                Vector4::new(0.2, 0.0, 0.0, -1.0),
                Vector4::new(0.21, 0.05, -0.02, -0.97),
            ],
        };
        (estimate, k)
    }

    #[test]
    fn save_then_load_round_trips_pfm_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let (est, k) = small_estimate();
        save_results(dir.path(), &est, &k, &[]).unwrap();
        let r = load_results(dir.path()).unwrap();
        for (x, y) in est.depth.valid_pixels() {
            assert_eq!(
                r.depth.get(x, y, 0),
                est.depth.get(x, y, 0) as f32 as f64,
                "depth at ({x},{y})"
            );
        }
        // writing what was loaded reproduces the files byte for byte
        let dir2 = tempfile::tempdir().unwrap();
        pfm::write_pfm(&dir2.path().join("depth.pfm"), &r.depth).unwrap();
        assert_eq!(
            std::fs::read(dir.path().join("depth.pfm")).unwrap(),
            std::fs::read(dir2.path().join("depth.pfm")).unwrap()
        );
    }

    #[test]
    fn frame_zero_pose_row_is_six_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let (est, k) = small_estimate();
        save_results(dir.path(), &est, &k, &[]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("poses_lighting.txt")).unwrap();
        let row: Vec<&str> = text
            .lines()
            .find(|l| l.starts_with('0'))
            .unwrap()
            .split_whitespace()
            .collect();
        for col in &row[1..7] {
            assert_eq!(col.parse::<f64>().unwrap(), 0.0);
        }
        let (poses, lights) = read_pose_table(&dir.path().join("poses_lighting.txt")).unwrap();
        assert_eq!(poses.len(), 2);
        assert!(poses[0].is_identity());
        assert!((poses[1].twist() - est.poses[1].twist()).norm() < 1e-12);
        assert!((lights[1] - est.lights[1]).norm() < 1e-12);
    }

    #[test]
    fn obj_vertex_count_equals_valid_pixel_count() {
        let dir = tempfile::tempdir().unwrap();
        let (est, k) = small_estimate();
        let p = dir.path().join("mesh.obj");
        write_obj_mesh(&p, &est.depth, &k).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let vertices = text.lines().filter(|l| l.starts_with("v ")).count();
        assert_eq!(vertices, est.depth.valid_count());
        let faces = text.lines().filter(|l| l.starts_with("f ")).count();
        // interior 4x3 blocks of the 5x4 valid region, two triangles each
        assert_eq!(faces, 2 * 4 * 3);
    }

    #[test]
    fn dataset_round_trip_through_manifest() {
        let mut cfg = crate::scene::SceneConfig::default();
        cfg.scene.width = 64;
        cfg.scene.height = 48;
        cfg.scene.intrinsics = CameraIntrinsics::new(80.0, 31.5, 23.5).unwrap();
        cfg.trajectory.frames = 3;
        let d = crate::scene::generate(&cfg, 1, Default::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = write_dataset(dir.path(), &d).unwrap();
        let ds = manifest::load_dataset(&manifest_path).unwrap();
        assert_eq!(ds.input.frames.len(), 3);
        assert_eq!(ds.input.sf, 4);
        assert_eq!(ds.input.depth_lr.size(), (16, 12));
        // frames round-trip to 8-bit quantization precision
        for (x, y) in d.frames[1].valid_pixels() {
            for c in 0..3 {
                let a = d.frames[1].get(x, y, c);
                let b = ds.input.frames[1].get(x, y, c);
                assert!((a - b).abs() < 0.5 / 255.0 + 1e-9, "({x},{y},{c}): {a} vs {b}");
            }
        }
        let gt_depth = ds.gt.depth.unwrap();
        for (x, y) in d.gt_depth.valid_pixels() {
            assert_eq!(gt_depth.get(x, y, 0), d.gt_depth.get(x, y, 0) as f32 as f64);
        }
        let poses = ds.gt.poses.unwrap();
        assert_eq!(poses.len(), 3);
        assert!((poses[2].twist() - d.gt_poses[2].twist()).norm() < 1e-12);
    }
}
