//! Scene and trajectory configuration files plus in-memory dataset
//! generation on top of the core renderer.
//!
//! The configuration is a plain-text key-value file. All keys have
//! defaults; the defaults describe the checkerboard sphere at 320x240 used
//! throughout the end-to-end tests. Recognized keys:
//!
//! ```text
//! surface            sphere | wavy_plane | superposition
//! sphere_center      x,y,z            sphere_radius    r
//! plane_depth        d                plane_amplitude  a
//! plane_frequency    w
//! albedo             constant | checkerboard | smooth_noise
//! albedo_rgb         r,g,b
//! checker_colors     r1,g1,b1,r2,g2,b2
//! checker_cell       meters
//! noise_base         r,g,b            noise_amplitude  a
//! noise_scale        s
//! width height f cx cy
//! trajectory         pure_rotation | rotation_translation
//! frames max_rotation max_translation
//! sf kappa ambient
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use mvpsr_core::photometry::LightingVector;
use mvpsr_core::synth::{
    collocated_light, make_lr_depth, trajectory_poses, AlbedoPattern, NoiseModel, RenderOptions,
    SceneRenderer, SceneSpec, Sphere, Surface, TrajectoryMode, TrajectorySpec, WavyPlane,
};
use mvpsr_core::{CameraIntrinsics, ImageGrid, TwistPose};
use nalgebra::Vector3;

use crate::manifest::parse_kv;
use crate::IoError;

/// A fully resolved generation recipe.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub scene: SceneSpec,
    pub trajectory: TrajectorySpec,
    pub sf: usize,
    pub kappa: f64,
    pub ambient: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let width = 320;
        let height = 240;
        Self {
            scene: SceneSpec {
                surface: Surface::Sphere(Sphere {
                    center: Vector3::new(0.0, 0.0, 1.8),
                    radius: 0.4,
                }),
                albedo: AlbedoPattern::Checkerboard {
                    colors: ([0.85, 0.85, 0.85], [0.25, 0.35, 0.75]),
                    cell: 0.12,
                },
                width,
                height,
                intrinsics: CameraIntrinsics::new(
                    400.0,
                    (width as f64 - 1.0) / 2.0,
                    (height as f64 - 1.0) / 2.0,
                )
                .expect("positive focal length"),
            },
            trajectory: TrajectorySpec {
                mode: TrajectoryMode::RotationTranslation,
                frames: 20,
                max_rotation: 0.12,
                max_translation: 0.08,
            },
            sf: 4,
            kappa: 1e-5,
            ambient: 0.2,
        }
    }
}

fn parse_triple(raw: &str, key: &str) -> Result<[f64; 3], IoError> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| IoError::Invalid(format!("key `{key}`: expected three numbers: {raw:?}")))?;
    if parts.len() != 3 {
        return Err(IoError::Invalid(format!(
            "key `{key}`: expected three numbers, got {}",
            parts.len()
        )));
    }
    Ok([parts[0], parts[1], parts[2]])
}

/// Parses a configuration file, starting from [`SceneConfig::default`].
pub fn read_scene_config(path: &Path) -> Result<SceneConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_scene_config(&text, path)
}

fn parse_scene_config(text: &str, path: &Path) -> Result<SceneConfig, IoError> {
    let map: BTreeMap<String, String> = parse_kv(text, path)?.into_iter().collect();
    let mut cfg = SceneConfig::default();
    let bad = |key: &str, raw: &str| IoError::Format {
        path: path.to_path_buf(),
        what: format!("key `{key}`: cannot parse {raw:?}"),
    };
    let get_f64 = |key: &str, default: f64| -> Result<f64, IoError> {
        match map.get(key) {
            Some(raw) => raw.parse().map_err(|_| bad(key, raw)),
            None => Ok(default),
        }
    };
    let get_usize = |key: &str, default: usize| -> Result<usize, IoError> {
        match map.get(key) {
            Some(raw) => raw.parse().map_err(|_| bad(key, raw)),
            None => Ok(default),
        }
    };

    cfg.scene.width = get_usize("width", cfg.scene.width)?;
    cfg.scene.height = get_usize("height", cfg.scene.height)?;
    let f = get_f64("f", cfg.scene.intrinsics.f)?;
    let cx = get_f64("cx", (cfg.scene.width as f64 - 1.0) / 2.0)?;
    let cy = get_f64("cy", (cfg.scene.height as f64 - 1.0) / 2.0)?;
    cfg.scene.intrinsics = CameraIntrinsics::new(f, cx, cy)?;

    let sphere = Sphere {
        center: {
            let c = match map.get("sphere_center") {
                Some(raw) => parse_triple(raw, "sphere_center")?,
                None => [0.0, 0.0, 1.8],
            };
            Vector3::new(c[0], c[1], c[2])
        },
        radius: get_f64("sphere_radius", 0.4)?,
    };
    let plane = WavyPlane {
        base_depth: get_f64("plane_depth", 2.0)?,
        amplitude: get_f64("plane_amplitude", 0.05)?,
        frequency: get_f64("plane_frequency", 6.0)?,
    };
    cfg.scene.surface = match map.get("surface").map(String::as_str) {
        None | Some("sphere") => Surface::Sphere(sphere),
        Some("wavy_plane") => Surface::WavyPlane(plane),
        Some("superposition") => Surface::Superposition(sphere, plane),
        Some(other) => return Err(bad("surface", other)),
    };

    let albedo_rgb = match map.get("albedo_rgb") {
        Some(raw) => parse_triple(raw, "albedo_rgb")?,
        None => [0.8, 0.5, 0.35],
    };
    cfg.scene.albedo = match map.get("albedo").map(String::as_str) {
        None | Some("checkerboard") => {
            let colors = match map.get("checker_colors") {
                Some(raw) => {
                    let parts: Vec<f64> = raw
                        .split(',')
                        .map(|s| s.trim().parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| bad("checker_colors", raw))?;
                    if parts.len() != 6 {
                        return Err(bad("checker_colors", raw));
                    }
                    (
                        [parts[0], parts[1], parts[2]],
                        [parts[3], parts[4], parts[5]],
                    )
                }
                None => ([0.85, 0.85, 0.85], [0.25, 0.35, 0.75]),
            };
            AlbedoPattern::Checkerboard {
                colors,
                cell: get_f64("checker_cell", 0.12)?,
            }
        }
        Some("constant") => AlbedoPattern::Constant(albedo_rgb),
        Some("smooth_noise") => AlbedoPattern::SmoothNoise {
            base: match map.get("noise_base") {
                Some(raw) => parse_triple(raw, "noise_base")?,
                None => albedo_rgb,
            },
            amplitude: get_f64("noise_amplitude", 0.15)?,
            scale: get_f64("noise_scale", 8.0)?,
        },
        Some(other) => return Err(bad("albedo", other)),
    };

    cfg.trajectory = TrajectorySpec {
        mode: match map.get("trajectory").map(String::as_str) {
            None | Some("rotation_translation") => TrajectoryMode::RotationTranslation,
            Some("pure_rotation") => TrajectoryMode::PureRotation,
            Some(other) => return Err(bad("trajectory", other)),
        },
        frames: get_usize("frames", cfg.trajectory.frames)?,
        max_rotation: get_f64("max_rotation", cfg.trajectory.max_rotation)?,
        max_translation: get_f64("max_translation", cfg.trajectory.max_translation)?,
    };
    cfg.sf = get_usize("sf", cfg.sf)?;
    cfg.kappa = get_f64("kappa", cfg.kappa)?;
    cfg.ambient = get_f64("ambient", cfg.ambient)?;

    if cfg.trajectory.frames < 3 {
        return Err(IoError::Invalid(format!(
            "frames = {} but photometric stereo needs at least 3 frames",
            cfg.trajectory.frames
        )));
    }
    if !matches!(cfg.sf, 2 | 4 | 8) {
        return Err(IoError::Invalid(format!(
            "sf = {} but the super-resolution factor must be 2, 4 or 8",
            cfg.sf
        )));
    }
    Ok(cfg)
}

/// Everything a generated dataset contains before touching disk.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub frames: Vec<ImageGrid<f64>>,
    pub depth_lr: ImageGrid<f64>,
    /// High-resolution silhouette of the reference view, row-major.
    pub mask: Vec<bool>,
    pub intrinsics: CameraIntrinsics,
    pub sf: usize,
    pub gt_depth: ImageGrid<f64>,
    pub gt_albedo: ImageGrid<f64>,
    /// Closed-form surface normals of the reference view.
    pub gt_normals: ImageGrid<f64>,
    pub gt_poses: Vec<TwistPose>,
    pub gt_lights: Vec<LightingVector>,
}

/// Renders a dataset in memory: n frames along the trajectory, each lit by
/// the frontal light rotated into the reference frame, plus noisy LR depth
/// and full ground truth.
pub fn generate(
    cfg: &SceneConfig,
    seed: u64,
    options: RenderOptions,
) -> Result<GeneratedDataset, IoError> {
    let renderer = SceneRenderer::new(cfg.scene.clone())?;
    let poses = trajectory_poses(&cfg.trajectory);
    let lights: Vec<LightingVector> = poses
        .iter()
        .map(|p| collocated_light(p, cfg.ambient))
        .collect();
    let mut frames = Vec::with_capacity(poses.len());
    for (pose, light) in poses.iter().zip(&lights) {
        frames.push(renderer.render_frame(pose, light, options)?.rgb);
    }
    let reference = renderer.reference();
    let depth_lr = make_lr_depth(
        &reference.depth,
        cfg.sf,
        &NoiseModel {
            kappa: cfg.kappa,
            seed,
        },
    );
    Ok(GeneratedDataset {
        mask: reference.depth.mask().to_vec(),
        gt_depth: reference.depth.clone(),
        gt_albedo: reference.albedo.clone(),
        gt_normals: reference.normals_exact.clone(),
        intrinsics: cfg.scene.intrinsics,
        sf: cfg.sf,
        frames,
        depth_lr,
        gt_poses: poses,
        gt_lights: lights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_text() {
        let path = Path::new("inline.cfg");
        let cfg = parse_scene_config("", path).unwrap();
        assert_eq!(cfg.scene.width, 320);
        assert_eq!(cfg.trajectory.frames, 20);
        assert_eq!(cfg.sf, 4);
        let text = "surface = wavy_plane\nframes = 5\nsf = 2\ntrajectory = pure_rotation\nkappa = 0\n";
        let cfg = parse_scene_config(text, path).unwrap();
        assert!(matches!(cfg.scene.surface, Surface::WavyPlane(_)));
        assert_eq!(cfg.trajectory.mode, TrajectoryMode::PureRotation);
        assert_eq!(cfg.trajectory.frames, 5);
        assert_eq!(cfg.kappa, 0.0);
    }

    #[test]
    fn too_few_frames_rejected() {
        let e = parse_scene_config("frames = 2\n", Path::new("x")).unwrap_err();
        assert!(e.to_string().contains("at least 3"));
    }

    #[test]
    fn bad_sf_rejected() {
        assert!(parse_scene_config("sf = 3\n", Path::new("x")).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let mut cfg = SceneConfig::default();
        cfg.scene.width = 64;
        cfg.scene.height = 48;
        cfg.scene.intrinsics = CameraIntrinsics::new(80.0, 31.5, 23.5).unwrap();
        cfg.trajectory.frames = 3;
        let a = generate(&cfg, 7, RenderOptions::default()).unwrap();
        let b = generate(&cfg, 7, RenderOptions::default()).unwrap();
        assert_eq!(a.frames[2].data(), b.frames[2].data());
        assert_eq!(a.depth_lr.data(), b.depth_lr.data());
        let c = generate(&cfg, 8, RenderOptions::default()).unwrap();
        assert_ne!(a.depth_lr.data(), c.depth_lr.data());
    }

    #[test]
    fn pure_rotation_ground_truth_poses_have_zero_translation() {
        let mut cfg = SceneConfig::default();
        cfg.scene.width = 64;
        cfg.scene.height = 48;
        cfg.scene.intrinsics = CameraIntrinsics::new(80.0, 31.5, 23.5).unwrap();
        cfg.trajectory.mode = TrajectoryMode::PureRotation;
        cfg.trajectory.frames = 4;
        let d = generate(&cfg, 0, RenderOptions::default()).unwrap();
        for pose in &d.gt_poses {
            assert_eq!(pose.translation().norm(), 0.0);
        }
    }
}
