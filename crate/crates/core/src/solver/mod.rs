//! Coarse-to-fine alternating minimization of the robust photometric energy
//! with the low-resolution depth prior.
//!
//! Each sweep refreshes the IRLS weights and runs the four block updates in
//! order: poses (Gauss-Newton on twist perturbations), depth (a linear
//! least-squares problem solved matrix-free with conjugate gradients),
//! albedo (closed form per pixel) and lighting (a 4x4 system per frame).
//! Every block minimizes the frozen-weight surrogate `1/2 sum w r^2`, so
//! each reported block transition is non-increasing.

mod albedo;
mod depth;
mod lighting;
mod poses;

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector4;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Error;
use crate::geometry::{self, NormalField};
use crate::grid::{CameraIntrinsics, ImageGrid};
use crate::photometry::{self, EnergyMode, LightingVector};
use crate::pyramid::{build_pyramid, PyramidLevel};
use crate::sampling::{bilinear_resize, prior_sse};
use crate::se3::TwistPose;

/// Solver configuration with the published defaults.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Cauchy robustifier scale.
    pub lambda: f64,
    /// Dimensionless prior strength before normalization.
    pub tau_tilde: f64,
    /// Pyramid levels (1 disables coarse-to-fine).
    pub levels: usize,
    /// Relative energy-change stopping tolerance per level.
    pub tol: f64,
    /// Sweep cap per level.
    pub max_sweeps: usize,
    /// Gauss-Newton iteration cap per pose block.
    pub gn_max_iters: usize,
    /// Gauss-Newton step-norm stopping tolerance.
    pub gn_step_tol: f64,
    /// Conjugate-gradient relative residual tolerance.
    pub cg_tol: f64,
    /// Conjugate-gradient iteration cap.
    pub cg_max_iters: usize,
    /// Tikhonov damping, centered at the previous value, for rank-deficient
    /// pose and lighting systems.
    pub damping: f64,
    /// Rings of silhouette pixels removed from the reconstruction domain at
    /// every level, keeping residual samples clear of the object-background
    /// edge in the frames.
    pub erosion: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.04,
            tau_tilde: 10.0,
            levels: 5,
            tol: 1e-5,
            max_sweeps: 50,
            gn_max_iters: 10,
            gn_step_tol: 1e-6,
            cg_tol: 1e-8,
            cg_max_iters: 500,
            damping: 1e-9,
            erosion: 5,
        }
    }
}

/// One multi-view super-resolution problem instance.
#[derive(Debug, Clone)]
pub struct SolverInput {
    /// The n high-resolution RGB frames; frame 0 is the reference.
    pub frames: Vec<ImageGrid<f64>>,
    /// The single low-resolution depth map, sized `ceil(HR / sf)`.
    pub depth_lr: ImageGrid<f64>,
    /// Reference-frame silhouette at high resolution, row-major.
    pub mask: Vec<bool>,
    /// High-resolution intrinsics.
    pub intrinsics: CameraIntrinsics,
    /// Super-resolution factor.
    pub sf: usize,
}

/// The jointly estimated scene.
#[derive(Debug, Clone)]
pub struct SceneEstimate {
    /// High-resolution depth over the reconstruction domain.
    pub depth: ImageGrid<f64>,
    /// High-resolution RGB albedo over the same domain.
    pub albedo: ImageGrid<f64>,
    /// Per-frame reference-to-frame poses; pose 0 is pinned to the identity.
    pub poses: Vec<TwistPose>,
    /// Per-frame first-order SH lighting vectors.
    pub lights: Vec<LightingVector>,
}

/// Surrogate energy of one block update at its frozen weights.
#[derive(Debug, Clone, Copy)]
pub struct BlockRecord {
    pub name: &'static str,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
}

/// Diagnostics of one alternating sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub level: usize,
    pub sweep: usize,
    /// Full robust energy (photometric plus weighted prior) after the sweep.
    pub energy: f64,
    pub blocks: Vec<BlockRecord>,
    /// Wall-clock duration of the sweep in milliseconds.
    #[cfg(feature = "std")]
    pub elapsed_ms: f64,
}

/// Result of [`solve`]: the estimate plus per-sweep diagnostics.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub estimate: SceneEstimate,
    pub records: Vec<SweepRecord>,
}

/// Everything fixed within one pyramid level.
pub(crate) struct Level {
    pub frames: Vec<ImageGrid<f64>>,
    /// Per-frame central-difference image gradients (d/dx, d/dy).
    pub grads: Vec<(ImageGrid<f64>, ImageGrid<f64>)>,
    pub z0: ImageGrid<f64>,
    pub k: CameraIntrinsics,
    pub sf: usize,
    pub tau: f64,
}

/// Joint estimation over the full pyramid.
pub fn solve(input: &SolverInput, config: &SolverConfig) -> Result<SolveResult, Error> {
    validate(input, config)?;
    let n = input.frames.len();
    let (hw, hh) = input.frames[0].size();

    // Pyramids: one per frame, one for the silhouette, one for the prior.
    let frame_pyrs: Vec<Vec<PyramidLevel>> = input
        .frames
        .iter()
        .map(|f| build_pyramid(f, input.intrinsics, config.levels))
        .collect::<Result<_, _>>()?;
    let mut mask_grid = ImageGrid::<f64>::empty(hw, hh, 1);
    for y in 0..hh {
        for x in 0..hw {
            if input.mask[y * hw + x] {
                mask_grid.set_valid(x, y, true);
                mask_grid.set(x, y, 0, 1.0);
            }
        }
    }
    let mask_pyr = build_pyramid(&mask_grid, input.intrinsics, config.levels)?;
    let lr_intr = input.intrinsics.scaled(1.0 / input.sf as f64);
    let z0_pyr = build_pyramid(&input.depth_lr, lr_intr, config.levels)?;

    let mut estimate: Option<SceneEstimate> = None;
    let mut records = Vec::new();

    for li in 0..config.levels {
        let hr = &frame_pyrs[0][li];
        let (lw, lh) = hr.image.size();
        let frames: Vec<ImageGrid<f64>> =
            frame_pyrs.iter().map(|p| p[li].image.clone()).collect();
        let grads = frames.iter().map(image_gradients).collect();

        // Reconstruction domain: the (conservatively downsampled) silhouette,
        // eroded so no residual samples straddle the object-to-background
        // edge of a frame. Warps map the silhouette near the silhouette, and
        // interpolating across that edge otherwise biases the pose block
        // toward poses that enlarge the object in the source frames.
        let mut domain: Vec<bool> = mask_pyr[li].image.mask().to_vec();
        // The edge-mixing band is a few pixels wide at any resolution, so the
        // guard shrinks with the level; the full configured width only
        // applies at full resolution, where the bias was measured.
        let guard = (config.erosion >> (config.levels - 1 - li)).max(2);
        erode_domain(&mut domain, lw, lh, guard);

        // Conservative downsampling can starve the coarsest levels of a
        // small object; skip levels with too little support and start the
        // cascade at the first one that can carry an estimate.
        let domain_count = domain.iter().filter(|&&v| v).count();
        if domain_count < 9 || z0_pyr[li].image.valid_count() < 4 {
            continue;
        }

        let mut est = match estimate.take() {
            None => {
                // Coarsest level: depth is a bilinear resampling of the prior
                // depth; albedo is the reference frame divided by the shading
                // this depth predicts under the initial lighting. Leaving the
                // shading baked into the albedo would make the pose and depth
                // blocks of the first sweep (which run before the albedo
                // block) chase a doubly-shaded model.
                let mut z = bilinear_resize(&input.depth_lr, lw, lh);
                let mut rho = bilinear_resize(&input.frames[0], lw, lh);
                let light0 = Vector4::new(0.2, 0.0, 0.0, -1.0);
                let s = photometry::shading_field(
                    &geometry::normals_from_depth(&z, &hr.intrinsics),
                    &light0,
                );
                for (x, y) in rho.clone().valid_pixels() {
                    let sv = if s.is_valid(x, y) { s.get(x, y, 0) } else { 0.0 };
                    if sv > 1e-3 {
                        for c in 0..rho.channels() {
                            let v = (rho.get(x, y, c) / sv).min(2.0);
                            rho.set(x, y, c, v);
                        }
                    }
                }
                restrict_to_domain(&mut z, &mut rho, &mut domain);
                SceneEstimate {
                    depth: z,
                    albedo: rho,
                    poses: vec![TwistPose::identity(); n],
                    lights: vec![light0; n],
                }
            }
            Some(prev) => {
                let mut z = bilinear_resize(&prev.depth, lw, lh);
                let mut rho = bilinear_resize(&prev.albedo, lw, lh);
                fill_holes(&mut z, &domain);
                fill_holes(&mut rho, &domain);
                restrict_to_domain(&mut z, &mut rho, &mut domain);
                SceneEstimate {
                    depth: z,
                    albedo: rho,
                    poses: prev.poses,
                    lights: prev.lights,
                }
            }
        };

        let level = Level {
            tau: normalized_tau(&frames, &z0_pyr[li].image, &est.depth, config.tau_tilde)?,
            frames,
            grads,
            z0: z0_pyr[li].image.clone(),
            k: hr.intrinsics,
            sf: input.sf,
        };

        let mut prev_energy = total_energy(&level, &est, config.lambda)?;
        // Pre-sweep states of the last few sweeps, oldest first, for the
        // secant bases of the over-relaxation below.
        let mut history: Vec<SceneEstimate> = Vec::new();
        for sweep in 0..config.max_sweeps {
            #[cfg(feature = "std")]
            let t0 = std::time::Instant::now();

            let before_sweep = est.clone();
            // Two block cycles per sweep: the displacement the extrapolation
            // below acts on then spans two cycles, which cancels most of the
            // zigzag component of plain alternation.
            let blocks = run_sweep(&level, &mut est, config, 2)?;
            let mut energy = total_energy(&level, &est, config.lambda)?;

            // Safeguarded over-relaxation. The blocks are strongly coupled
            // (a pose error is compensated by lighting and a depth tilt), so
            // plain alternation crawls along a narrow valley at a few percent
            // per sweep. Extrapolating the state along the latest sweep
            // displacement, and along the longer secants where the zigzag
            // component of alternation cancels, collapses many sweeps into
            // one; only candidates that lower the true energy are kept.
            let after_sweep = est.clone();
            let bases = [
                Some(&before_sweep),
                history.last(),
                history.first().filter(|_| history.len() == 3),
            ];
            for base in bases {
                let Some(base) = base else { continue };
                for gamma in [
                    1.0, 3.0, 7.0, 15.0, 31.0, 63.0, 127.0, 255.0, 511.0, 1023.0,
                ] {
                    let Some(cand) = extrapolate(base, &after_sweep, gamma) else {
                        break;
                    };
                    let Ok(e) = total_energy(&level, &cand, config.lambda) else {
                        break;
                    };
                    if e.is_finite() && e < energy {
                        est = cand;
                        energy = e;
                    } else {
                        break;
                    }
                }
            }
            history.push(before_sweep);
            if history.len() > 3 {
                history.remove(0);
            }
            records.push(SweepRecord {
                level: li,
                sweep,
                energy,
                blocks,
                #[cfg(feature = "std")]
                elapsed_ms: t0.elapsed().as_secs_f64() * 1e3,
            });
            let rel = (prev_energy - energy).abs() / prev_energy.abs().max(1e-300);
            prev_energy = energy;
            if rel < config.tol {
                break;
            }
        }
        estimate = Some(est);
    }

    Ok(SolveResult {
        estimate: estimate.expect("at least one level"),
        records,
    })
}

/// `cur + gamma * (cur - prev)` over every state variable: depth and albedo
/// per valid pixel, poses and lights per frame in their vector coordinates.
/// Returns `None` when the extrapolated depth leaves the positive range.
fn extrapolate(prev: &SceneEstimate, cur: &SceneEstimate, gamma: f64) -> Option<SceneEstimate> {
    let mut out = cur.clone();
    for (x, y) in cur.depth.valid_pixels() {
        if !prev.depth.is_valid(x, y) {
            return None;
        }
        let v = cur.depth.get(x, y, 0);
        let nv = v + gamma * (v - prev.depth.get(x, y, 0));
        if nv <= geometry::DEPTH_EPS {
            return None;
        }
        out.depth.set(x, y, 0, nv);
    }
    for (x, y) in cur.albedo.valid_pixels() {
        if !prev.albedo.is_valid(x, y) {
            return None;
        }
        for c in 0..cur.albedo.channels() {
            let v = cur.albedo.get(x, y, c);
            out.albedo.set(x, y, c, v + gamma * (v - prev.albedo.get(x, y, c)));
        }
    }
    for i in 0..cur.poses.len() {
        let tw = cur.poses[i].twist();
        out.poses[i] = TwistPose::from_twist(tw + gamma * (tw - prev.poses[i].twist()));
        out.lights[i] = cur.lights[i] + gamma * (cur.lights[i] - prev.lights[i]);
    }
    Some(out)
}

/// Builds the finest-resolution level for a caller-provided state.
fn finest_level(
    input: &SolverInput,
    est: &SceneEstimate,
    config: &SolverConfig,
) -> Result<Level, Error> {
    validate(input, config)?;
    let frames = input.frames.clone();
    let grads = frames.iter().map(image_gradients).collect();
    Ok(Level {
        tau: normalized_tau(&frames, &input.depth_lr, &est.depth, config.tau_tilde)?,
        frames,
        grads,
        z0: input.depth_lr.clone(),
        k: input.intrinsics,
        sf: input.sf,
    })
}

/// Runs one alternating sweep at full resolution from a caller-provided
/// state, for fixed-point and descent diagnostics.
pub fn run_single_sweep(
    input: &SolverInput,
    est: &mut SceneEstimate,
    config: &SolverConfig,
) -> Result<Vec<BlockRecord>, Error> {
    let level = finest_level(input, est, config)?;
    run_sweep(&level, est, config, 1)
}

/// Full robust energy (photometric plus weighted prior) of a state on the
/// full-resolution problem.
pub fn state_energy(
    input: &SolverInput,
    est: &SceneEstimate,
    config: &SolverConfig,
) -> Result<f64, Error> {
    let level = finest_level(input, est, config)?;
    total_energy(&level, est, config.lambda)
}

/// One alternating sweep of `cycles` block cycles: weights are refrozen
/// before every block.
fn run_sweep(
    level: &Level,
    est: &mut SceneEstimate,
    config: &SolverConfig,
    cycles: usize,
) -> Result<Vec<BlockRecord>, Error> {
    let mut out = Vec::with_capacity(4 * cycles);
    for _ in 0..cycles {
        let w = freeze_weights(level, est, config.lambda)?;
        let (pb, pa) = poses::update(level, est, &w, config);

        let w = freeze_weights(level, est, config.lambda)?;
        let (db, da) = depth::update(level, est, &w, config)?;

        let w = freeze_weights(level, est, config.lambda)?;
        let (ab, aa) = albedo::update(level, est, &w);

        let w = freeze_weights(level, est, config.lambda)?;
        let (lb, la) = lighting::update(level, est, &w, config);

        out.extend_from_slice(&[
            BlockRecord {
                name: "poses",
                surrogate_before: pb,
                surrogate_after: pa,
            },
            BlockRecord {
                name: "depth",
                surrogate_before: db,
                surrogate_after: da,
            },
            BlockRecord {
                name: "albedo",
                surrogate_before: ab,
                surrogate_after: aa,
            },
            BlockRecord {
                name: "lighting",
                surrogate_before: lb,
                surrogate_after: la,
            },
        ]);
    }
    Ok(out)
}

/// Per-frame residual grids at the current state, sharing one normal field.
pub(crate) fn residuals_all(level: &Level, est: &SceneEstimate) -> (Vec<ImageGrid<f64>>, NormalField) {
    let nf = geometry::normals_from_depth(&est.depth, &level.k);
    let res = level
        .frames
        .iter()
        .zip(&est.poses)
        .zip(&est.lights)
        .map(|((frame, pose), l)| {
            let warped = photometry::warp_image(frame, pose, &est.depth, &level.k);
            photometry::residual_from_parts(&warped, &nf, &est.albedo, l)
        })
        .collect();
    (res, nf)
}

fn freeze_weights(
    level: &Level,
    est: &SceneEstimate,
    lambda: f64,
) -> Result<Vec<ImageGrid<f64>>, Error> {
    let (res, _) = residuals_all(level, est);
    if res.iter().all(|r| r.valid_count() == 0) {
        return Err(Error::EmptyMask);
    }
    Ok(photometry::irls_weights(&res, lambda))
}

/// Full objective: robust photometric energy plus the weighted depth prior.
pub(crate) fn total_energy(
    level: &Level,
    est: &SceneEstimate,
    lambda: f64,
) -> Result<f64, Error> {
    let (res, _) = residuals_all(level, est);
    let photo = photometry::robust_energy(&res, lambda, EnergyMode::Robust)?;
    let (sse, _) = prior_sse(&est.depth, &level.z0, level.sf);
    Ok(photo + level.tau * sse)
}

/// Balances the prior against the photometric term:
/// `tau = tau_tilde * n * mean(I)^2 * |domain| * channels
///        / (mean(z0)^2 * |LR domain|)`.
fn normalized_tau(
    frames: &[ImageGrid<f64>],
    z0: &ImageGrid<f64>,
    z: &ImageGrid<f64>,
    tau_tilde: f64,
) -> Result<f64, Error> {
    let n = frames.len() as f64;
    let nc = frames[0].channels() as f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for f in frames {
        for (x, y) in f.valid_pixels() {
            for c in 0..f.channels() {
                sum += f.get(x, y, c);
                count += 1;
            }
        }
    }
    if count == 0 || z0.valid_count() == 0 {
        return Err(Error::EmptyMask);
    }
    let mean_i = sum / count as f64;
    let mean_z0 = z0.mean_valid()?;
    let n_hr = z.valid_count() as f64;
    let n_lr = z0.valid_count() as f64;
    Ok(tau_tilde * n * mean_i * mean_i * n_hr * nc / (mean_z0 * mean_z0 * n_lr))
}

/// Central-difference image gradients with one-sided fallback, used by the
/// pose Gauss-Newton step (sampled at warped positions).
fn image_gradients(img: &ImageGrid<f64>) -> (ImageGrid<f64>, ImageGrid<f64>) {
    let (w, h) = img.size();
    let nc = img.channels();
    let mut gx = ImageGrid::<f64>::empty(w, h, nc);
    let mut gy = ImageGrid::<f64>::empty(w, h, nc);
    for (x, y) in img.valid_pixels() {
        let xl = x > 0 && img.is_valid(x - 1, y);
        let xr = x + 1 < w && img.is_valid(x + 1, y);
        let yu = y > 0 && img.is_valid(x, y - 1);
        let yd = y + 1 < h && img.is_valid(x, y + 1);
        gx.set_valid(x, y, true);
        gy.set_valid(x, y, true);
        for c in 0..nc {
            let v = img.get(x, y, c);
            let dx = match (xl, xr) {
                (true, true) => 0.5 * (img.get(x + 1, y, c) - img.get(x - 1, y, c)),
                (false, true) => img.get(x + 1, y, c) - v,
                (true, false) => v - img.get(x - 1, y, c),
                (false, false) => 0.0,
            };
            let dy = match (yu, yd) {
                (true, true) => 0.5 * (img.get(x, y + 1, c) - img.get(x, y - 1, c)),
                (false, true) => img.get(x, y + 1, c) - v,
                (true, false) => v - img.get(x, y - 1, c),
                (false, false) => 0.0,
            };
            gx.set(x, y, c, dx);
            gy.set(x, y, c, dy);
        }
    }
    (gx, gy)
}

/// Removes `iters` rings of 4-neighbour boundary pixels from the domain.
/// Image borders count as outside.
fn erode_domain(domain: &mut [bool], w: usize, h: usize, iters: usize) {
    for _ in 0..iters {
        let prev = domain.to_vec();
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                if !prev[p] {
                    continue;
                }
                let boundary = x == 0
                    || y == 0
                    || x + 1 == w
                    || y + 1 == h
                    || !prev[p - 1]
                    || !prev[p + 1]
                    || !prev[p - w]
                    || !prev[p + w];
                if boundary {
                    domain[p] = false;
                }
            }
        }
    }
}

/// Fills domain pixels that lost their value during resampling with the mean
/// of their valid 4-neighbours, repeated until stable.
fn fill_holes(grid: &mut ImageGrid<f64>, domain: &[bool]) {
    let (w, h) = grid.size();
    let nc = grid.channels();
    loop {
        let mut fills: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if !domain[y * w + x] || grid.is_valid(x, y) {
                    continue;
                }
                let mut acc = vec![0.0f64; nc];
                let mut cnt = 0usize;
                let neighbors = [
                    (x.wrapping_sub(1), y),
                    (x + 1, y),
                    (x, y.wrapping_sub(1)),
                    (x, y + 1),
                ];
                for (nx, ny) in neighbors {
                    if nx < w && ny < h && grid.is_valid(nx, ny) {
                        for (c, a) in acc.iter_mut().enumerate() {
                            *a += grid.get(nx, ny, c);
                        }
                        cnt += 1;
                    }
                }
                if cnt > 0 {
                    for a in &mut acc {
                        *a /= cnt as f64;
                    }
                    fills.push((x, y, acc));
                }
            }
        }
        if fills.is_empty() {
            break;
        }
        for (x, y, vals) in fills {
            grid.set_valid(x, y, true);
            for (c, v) in vals.into_iter().enumerate() {
                grid.set(x, y, c, v);
            }
        }
    }
}

/// Clamps the domain to pixels where both depth and albedo exist, then makes
/// the grids' masks exactly the domain.
fn restrict_to_domain(z: &mut ImageGrid<f64>, rho: &mut ImageGrid<f64>, domain: &mut Vec<bool>) {
    let (w, h) = z.size();
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            domain[p] = domain[p]
                && z.is_valid(x, y)
                && rho.is_valid(x, y)
                && z.get(x, y, 0) > geometry::DEPTH_EPS;
        }
    }
    // masks are already supersets of the domain, so apply_mask cannot fail
    let _ = z.apply_mask(domain);
    let _ = rho.apply_mask(domain);
}

fn validate(input: &SolverInput, config: &SolverConfig) -> Result<(), Error> {
    if input.frames.is_empty() {
        return Err(Error::InvalidParameter { what: "frames" });
    }
    let (w, h) = input.frames[0].size();
    for f in &input.frames {
        if f.size() != (w, h) || f.channels() != input.frames[0].channels() {
            return Err(Error::DimensionMismatch {
                expected: (w, h),
                got: f.size(),
            });
        }
    }
    if input.mask.len() != w * h {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            got: (input.mask.len(), 0),
        });
    }
    if input.sf == 0 {
        return Err(Error::InvalidParameter { what: "sf" });
    }
    let expect = (w.div_ceil(input.sf), h.div_ceil(input.sf));
    if input.depth_lr.size() != expect {
        return Err(Error::DimensionMismatch {
            expected: expect,
            got: input.depth_lr.size(),
        });
    }
    if config.levels == 0 || config.max_sweeps == 0 {
        return Err(Error::InvalidParameter { what: "levels" });
    }
    if !(config.lambda > 0.0) || !(config.tau_tilde >= 0.0) {
        return Err(Error::InvalidParameter { what: "lambda" });
    }
    Ok(())
}
