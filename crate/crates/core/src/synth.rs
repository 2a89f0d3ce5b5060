//! Procedural synthetic scenes: analytic ray-cast surfaces rendered under
//! camera-collocated first-order SH lighting, plus the noisy low-resolution
//! depth generator.
//!
//! Rendering is consistent with the solver's forward model: frames are the
//! reference-frame Lambertian model (built on the same discretized normals
//! the solver uses) resampled through the exact inverse warp, with the
//! physical clamp and optional 8-bit quantization applied on top. Ground
//! truth exposes both the ray-cast depth and the closed-form surface
//! normals.

use alloc::vec::Vec;

use nalgebra::{Vector3, Vector4};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Error;
use crate::geometry;
use crate::grid::{CameraIntrinsics, ImageGrid};
use crate::photometry::LightingVector;
use crate::sampling::{apply_d, bilinear_sample};
use crate::se3::TwistPose;

/// Analytic sphere in reference-camera coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Sphere {
    pub center: Vector3<f64>,
    pub radius: f64,
}

/// Height-field plane `Z = base + amplitude * sin(freq X) * sin(freq Y)` in
/// reference-camera coordinates.
#[derive(Debug, Clone, Copy)]
pub struct WavyPlane {
    pub base_depth: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

/// The renderable surface; `Superposition` takes the nearest hit of both
/// parts.
#[derive(Debug, Clone, Copy)]
pub enum Surface {
    Sphere(Sphere),
    WavyPlane(WavyPlane),
    Superposition(Sphere, WavyPlane),
}

/// Surface reflectance, evaluated at the 3-D hit point.
#[derive(Debug, Clone, Copy)]
pub enum AlbedoPattern {
    Constant([f64; 3]),
    /// Two colors alternating on a world-space XY checker of `cell` metres.
    Checkerboard {
        colors: ([f64; 3], [f64; 3]),
        cell: f64,
    },
    /// Smooth deterministic color texture around `base`.
    SmoothNoise {
        base: [f64; 3],
        amplitude: f64,
        scale: f64,
    },
}

/// Everything needed to render one synthetic scene.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub surface: Surface,
    pub albedo: AlbedoPattern,
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
}

/// Camera trajectory family; frame 0 is always the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryMode {
    PureRotation,
    RotationTranslation,
}

#[derive(Debug, Clone, Copy)]
pub struct TrajectorySpec {
    pub mode: TrajectoryMode,
    pub frames: usize,
    /// Rotation angle of the last frame, radians; earlier frames ramp up
    /// linearly.
    pub max_rotation: f64,
    /// Translation magnitude of the last frame, metres (ignored for pure
    /// rotation).
    pub max_translation: f64,
}

/// Depth-sensor noise: zero-mean Gaussian with per-pixel standard deviation
/// `kappa * z^2`.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    pub kappa: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct RenderOptions {
    /// Quantize RGB to 8 bits and back, like a real camera.
    pub quantize: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { quantize: true }
    }
}

/// Ground truth of the reference view.
#[derive(Debug, Clone)]
pub struct ReferenceScene {
    /// Ray-cast depth; mask is the silhouette.
    pub depth: ImageGrid<f64>,
    /// Albedo sampled at the hit points.
    pub albedo: ImageGrid<f64>,
    /// Closed-form surface normals (3-channel), oriented toward the camera.
    pub normals_exact: ImageGrid<f64>,
}

/// One rendered frame: the RGB image (full-valid, black background) and the
/// frame's own ray-cast depth.
#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub rgb: ImageGrid<f64>,
    pub depth: ImageGrid<f64>,
}

impl Surface {
    /// First hit of the ray `origin + s * dir`, `s > 0`. Returns the ray
    /// parameter and the outward (camera-facing) closed-form normal.
    fn raycast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        match self {
            Surface::Sphere(s) => raycast_sphere(s, origin, dir),
            Surface::WavyPlane(p) => raycast_wavy_plane(p, origin, dir),
            Surface::Superposition(s, p) => {
                let a = raycast_sphere(s, origin, dir);
                let b = raycast_wavy_plane(p, origin, dir);
                match (a, b) {
                    (Some(x), Some(y)) => Some(if x.0 <= y.0 { x } else { y }),
                    (Some(x), None) => Some(x),
                    (None, Some(y)) => Some(y),
                    (None, None) => None,
                }
            }
        }
    }
}

fn raycast_sphere(
    s: &Sphere,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<(f64, Vector3<f64>)> {
    let oc = origin - s.center;
    let a = dir.dot(dir);
    let b = 2.0 * oc.dot(dir);
    let c = oc.dot(&oc) - s.radius * s.radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-b - sq) / (2.0 * a);
    let t1 = (-b + sq) / (2.0 * a);
    let t = if t0 > 1e-9 {
        t0
    } else if t1 > 1e-9 {
        t1
    } else {
        return None;
    };
    let hit = origin + dir * t;
    Some((t, (hit - s.center) / s.radius))
}

fn wavy_height(p: &WavyPlane, x: f64, y: f64) -> f64 {
    p.base_depth + p.amplitude * (p.frequency * x).sin() * (p.frequency * y).sin()
}

fn raycast_wavy_plane(
    p: &WavyPlane,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<(f64, Vector3<f64>)> {
    // F(s) = Z(s) - height(X(s), Y(s)); bracket the first sign change, then
    // bisect. Rays from desk-scale cameras are near-axial, so a fixed sweep
    // is sufficient.
    let f = |s: f64| {
        let q = origin + dir * s;
        q.z - wavy_height(p, q.x, q.y)
    };
    let mut s_prev = 1e-4;
    let mut f_prev = f(s_prev);
    let max_s = 50.0;
    let step = 0.01;
    let mut s = s_prev + step;
    let mut bracket = None;
    while s <= max_s {
        let fs = f(s);
        if f_prev < 0.0 && fs >= 0.0 {
            bracket = Some((s_prev, s));
            break;
        }
        s_prev = s;
        f_prev = fs;
        s += step;
    }
    let (mut lo, mut hi) = bracket?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let hit = origin + dir * t;
    // gradient of Z - h(X, Y); flipped so the normal faces the camera
    let dhx = p.amplitude * p.frequency * (p.frequency * hit.x).cos() * (p.frequency * hit.y).sin();
    let dhy = p.amplitude * p.frequency * (p.frequency * hit.x).sin() * (p.frequency * hit.y).cos();
    let n = Vector3::new(dhx, dhy, -1.0).normalize();
    Some((t, n))
}

impl AlbedoPattern {
    fn eval(&self, hit: &Vector3<f64>) -> [f64; 3] {
        match self {
            AlbedoPattern::Constant(c) => *c,
            AlbedoPattern::Checkerboard { colors, cell } => {
                // Anti-aliased checker: each axis carries a triangle wave
                // that is +1 at even-cell centers, -1 at odd-cell centers
                // and crosses zero at the edges; clamping it to a transition
                // band of a quarter cell gives printed-pattern edges
                // that stay resolved under resampling.
                let sigma = |u: f64| {
                    let p = u / (2.0 * cell) + 0.25;
                    let tri = 1.0 - 4.0 * (p - p.floor() - 0.5).abs();
                    let t = (tri * 2.0).clamp(-1.0, 1.0);
                    // odd smoothstep keeps the profile C1 at the band edges
                    0.5 * t * (3.0 - t * t)
                };
                let t = 0.5 * (1.0 + sigma(hit.x) * sigma(hit.y));
                let mut out = [0.0; 3];
                for (c, o) in out.iter_mut().enumerate() {
                    *o = colors.0[c] * t + colors.1[c] * (1.0 - t);
                }
                out
            }
            AlbedoPattern::SmoothNoise {
                base,
                amplitude,
                scale,
            } => {
                let mut out = [0.0; 3];
                for (c, o) in out.iter_mut().enumerate() {
                    let phase = 0.37 * c as f64;
                    let v = (scale * hit.x + phase).sin() * (scale * hit.y - 1.3 * phase).cos();
                    *o = (base[c] + amplitude * v).clamp(0.0, 1.0);
                }
                out
            }
        }
    }
}

/// Renders frames of one scene. The reference view is ray-cast once at
/// construction; the frame model is rebuilt per lighting vector.
#[derive(Debug, Clone)]
pub struct SceneRenderer {
    spec: SceneSpec,
    reference: ReferenceScene,
}

impl SceneRenderer {
    pub fn new(spec: SceneSpec) -> Result<Self, Error> {
        let (w, h) = (spec.width, spec.height);
        let k = spec.intrinsics;
        let mut depth = ImageGrid::<f64>::empty(w, h, 1);
        let mut albedo = ImageGrid::<f64>::empty(w, h, 3);
        let mut normals = ImageGrid::<f64>::empty(w, h, 3);
        let origin = Vector3::zeros();
        for y in 0..h {
            for x in 0..w {
                let dir = Vector3::new(
                    (x as f64 - k.cx) / k.f,
                    (y as f64 - k.cy) / k.f,
                    1.0,
                );
                let Some((s, n)) = spec.surface.raycast(&origin, &dir) else {
                    continue;
                };
                let hit = origin + dir * s;
                depth.set_valid(x, y, true);
                depth.set(x, y, 0, s);
                let rho = spec.albedo.eval(&hit);
                albedo.set_valid(x, y, true);
                normals.set_valid(x, y, true);
                for c in 0..3 {
                    albedo.set(x, y, c, rho[c]);
                    normals.set(x, y, c, n[c]);
                }
            }
        }
        if depth.valid_count() == 0 {
            return Err(Error::EmptySilhouette);
        }
        Ok(Self {
            spec,
            reference: ReferenceScene {
                depth,
                albedo,
                normals_exact: normals,
            },
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn reference(&self) -> &ReferenceScene {
        &self.reference
    }

    /// The reference-frame Lambertian model under lighting `l`:
    /// `rho * max(0, <m(n), l>)` with normals discretized from the ray-cast
    /// depth exactly as the solver discretizes them.
    pub fn model_image(&self, l: &LightingVector) -> ImageGrid<f64> {
        let nf = geometry::normals_from_depth(&self.reference.depth, &self.spec.intrinsics);
        let (w, h) = self.reference.depth.size();
        let mut out = ImageGrid::<f64>::empty(w, h, 3);
        for (x, y) in nf.normals.valid_pixels() {
            if !self.reference.albedo.is_valid(x, y) {
                continue;
            }
            let s = l[0]
                + l[1] * nf.normals.get(x, y, 0)
                + l[2] * nf.normals.get(x, y, 1)
                + l[3] * nf.normals.get(x, y, 2);
            let s = s.max(0.0);
            out.set_valid(x, y, true);
            for c in 0..3 {
                out.set(x, y, c, self.reference.albedo.get(x, y, c) * s);
            }
        }
        out
    }

    /// Renders the scene from `pose` (reference-to-frame transform) under
    /// lighting `l` (expressed in the reference frame).
    ///
    /// The RGB grid is full-valid with a black background; depth carries the
    /// frame's own silhouette mask.
    pub fn render_frame(
        &self,
        pose: &TwistPose,
        l: &LightingVector,
        opts: RenderOptions,
    ) -> Result<RenderedFrame, Error> {
        let (w, h) = (self.spec.width, self.spec.height);
        let k = self.spec.intrinsics;
        let nf = geometry::normals_from_depth(&self.reference.depth, &k);
        let inv = pose.inverse();
        let cam_origin = *inv.translation();
        let mut rgb = ImageGrid::<f64>::filled(w, h, 3, 0.0);
        let mut depth = ImageGrid::<f64>::empty(w, h, 1);
        let mut hits = 0usize;
        for y in 0..h {
            for x in 0..w {
                let dir_cam = Vector3::new(
                    (x as f64 - k.cx) / k.f,
                    (y as f64 - k.cy) / k.f,
                    1.0,
                );
                let dir = inv.rotation() * dir_cam;
                let Some((s, _)) = self.spec.surface.raycast(&cam_origin, &dir) else {
                    continue;
                };
                hits += 1;
                depth.set_valid(x, y, true);
                depth.set(x, y, 0, s);
                // hit point is already in reference coordinates
                let hit = cam_origin + dir * s;
                let Some((px, py)) = geometry::project(&hit, &k) else {
                    continue;
                };
                // The identity pose reprojects onto the grid exactly up to
                // rounding; snap so boundary pixels do not lose a corner.
                let px = snap_integer(px);
                let py = snap_integer(py);
                // The shading normal is the discretized reference normal,
                // interpolated at the reprojection; the normal field is
                // smooth, so interpolating it (rather than the RGB model,
                // whose albedo edges are sharp) keeps the moved frames
                // consistent with the reference model to high order. The
                // albedo itself is evaluated in closed form at the hit.
                let n: Option<Vector3<f64>> = (|| {
                    let nx = bilinear_sample(&nf.normals, px, py, 0)?;
                    let ny = bilinear_sample(&nf.normals, px, py, 1)?;
                    let nz = bilinear_sample(&nf.normals, px, py, 2)?;
                    let v = Vector3::new(nx, ny, nz);
                    let norm = v.norm();
                    (norm > 0.0).then(|| v / norm)
                })();
                if let Some(n) = n {
                    let s = (l[0] + l[1] * n[0] + l[2] * n[1] + l[3] * n[2]).max(0.0);
                    let rho = self.spec.albedo.eval(&hit);
                    for c in 0..3 {
                        let v = rho[c] * s;
                        let v = if opts.quantize { quantize8(v) } else { v };
                        rgb.set(x, y, c, v);
                    }
                }
            }
        }
        if hits == 0 {
            return Err(Error::EmptySilhouette);
        }
        Ok(RenderedFrame { rgb, depth })
    }
}

#[inline]
fn snap_integer(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

#[inline]
fn quantize8(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Applies `D` and adds the depth-dependent sensor noise
/// (`sigma = kappa * z^2`, counter-seeded per pixel so parallel rendering
/// can never change the output).
pub fn make_lr_depth(z_gt: &ImageGrid<f64>, sf: usize, noise: &NoiseModel) -> ImageGrid<f64> {
    let mut lr = apply_d(z_gt, sf);
    if noise.kappa == 0.0 {
        return lr;
    }
    let w = lr.width();
    for (x, y) in lr.valid_pixels().collect::<Vec<_>>() {
        let z = lr.get(x, y, 0);
        let sigma = noise.kappa * z * z;
        let g = normal_draw(noise.seed, (y * w + x) as u64);
        lr.set(x, y, 0, z + sigma * g);
    }
    lr
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal draw from a (seed, counter) pair via Box-Muller.
fn normal_draw(seed: u64, counter: u64) -> f64 {
    let s = splitmix64(seed ^ splitmix64(counter.wrapping_add(0x5851_F42D_4C95_7F2D)));
    let u1 = ((splitmix64(s) >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = (splitmix64(s.wrapping_add(1)) >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
}

/// Ground-truth poses for a trajectory; frame 0 is the identity, later
/// frames ramp linearly to the configured magnitudes with rotation axes
/// spread in the image plane (in-plane axes tilt the collocated light, which
/// is what creates illumination diversity).
pub fn trajectory_poses(spec: &TrajectorySpec) -> Vec<TwistPose> {
    let n = spec.frames;
    let mut out = Vec::with_capacity(n);
    out.push(TwistPose::identity());
    for i in 1..n {
        // A smooth spiral: the rotation axis sweeps the in-plane circle once
        // over the sequence while the magnitude ramps up, so consecutive
        // poses stay close (the solver's warm-start chain assumes a small
        // inter-frame baseline) yet the set of axes, and with it the
        // collocated lighting, still covers all directions.
        let frac = i as f64 / (n.max(2) - 1) as f64;
        let phi = core::f64::consts::TAU * i as f64 / n as f64 + 0.7;
        let axis = Vector3::new(phi.cos(), phi.sin(), 0.0);
        let w = axis * (spec.max_rotation * frac);
        let rot = TwistPose::from_twist(nalgebra::Vector6::new(0.0, 0.0, 0.0, w.x, w.y, w.z));
        let t = match spec.mode {
            TrajectoryMode::PureRotation => Vector3::zeros(),
            TrajectoryMode::RotationTranslation => {
                Vector3::new((phi + 1.1).cos(), (phi + 1.1).sin(), 0.4 * (2.2 * frac).cos())
                    .normalize()
                    * (spec.max_translation * frac)
            }
        };
        out.push(TwistPose::from_parts(*rot.rotation(), t));
    }
    out
}

/// Lighting of a camera-collocated source seen from the reference frame:
/// the frontal direction rotated by `R_i^T`, plus a fixed ambient term.
pub fn collocated_light(pose: &TwistPose, ambient: f64) -> LightingVector {
    let d = pose.rotation().transpose() * Vector3::new(0.0, 0.0, -1.0);
    Vector4::new(ambient, d.x, d.y, d.z)
}
