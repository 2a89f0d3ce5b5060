//! Pose block: damped Gauss-Newton on a left-multiplied twist perturbation,
//! one frame at a time, with step halving against the frozen-weight
//! surrogate. Frame 0 stays pinned to the identity.

use alloc::vec::Vec;

use nalgebra::{SMatrix, SVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry;
use crate::grid::ImageGrid;
use crate::photometry::LightingVector;
use crate::sampling::catmull_rom_sample_or_black;
use crate::se3::TwistPose;

use super::{Level, SceneEstimate, SolverConfig};

/// Updates all non-reference poses; returns the summed frozen-weight
/// surrogate before and after.
pub(crate) fn update(
    level: &Level,
    est: &mut SceneEstimate,
    weights: &[ImageGrid<f64>],
    config: &SolverConfig,
) -> (f64, f64) {
    let nf = geometry::normals_from_depth(&est.depth, &level.k);
    let z = est.depth.clone();
    let rho = est.albedo.clone();

    let mut before_total = 0.0;
    let mut after_total = 0.0;
    for i in 0..level.frames.len() {
        let light = est.lights[i];
        if i == 0 {
            // reference frame: fixed gauge, but still counted in the record
            let (e, _) = evaluate(level, i, &z, &rho, &nf, &est.poses[0], &light, &weights[i]);
            before_total += e;
            after_total += e;
            continue;
        }
        let mut pose = est.poses[i].clone();
        let (mut current, _) = evaluate(level, i, &z, &rho, &nf, &pose, &light, &weights[i]);
        before_total += current;

        // Trajectory-smoothness seeding: a frame whose pose has not been
        // found yet (or drifted off) is usually closer to its predecessor's
        // fresh estimate, or to a constant-velocity extrapolation of the
        // last two, than to its own current value. Start Gauss-Newton from
        // whichever candidate carries the lowest frozen-weight energy; the
        // recorded before-value stays at the current pose, so the block
        // remains non-increasing.
        let mut seeds: Vec<TwistPose> = Vec::new();
        seeds.push(est.poses[i - 1].clone());
        if i >= 2 {
            let tw = est.poses[i - 1].twist() * 2.0 - est.poses[i - 2].twist();
            seeds.push(TwistPose::from_twist(tw));
        }
        // The identity rescues a pose that wandered off at a coarser level:
        // early in the cascade the inter-frame motion is sub-pixel, so the
        // identity is always inside the Gauss-Newton basin there.
        seeds.push(TwistPose::identity());
        for cand in seeds {
            let (e, count) = evaluate(level, i, &z, &rho, &nf, &cand, &light, &weights[i]);
            if count > 0 && e < current {
                pose = cand;
                current = e;
            }
        }

        for _ in 0..config.gn_max_iters {
            let Some((h, g)) =
                normal_equations(level, i, &z, &rho, &nf, &pose, &light, &weights[i])
            else {
                break;
            };
            let mut step = None;
            let mut damp = config.damping;
            for _ in 0..6 {
                let mut hd = h;
                for d in 0..6 {
                    hd[(d, d)] += damp;
                }
                if let Some(chol) = hd.cholesky() {
                    step = Some(chol.solve(&(-g)));
                    break;
                }
                damp = (damp * 100.0).max(1e-12);
            }
            let Some(mut delta) = step else { break };
            let step_norm = delta.norm();

            let mut accepted = false;
            for _ in 0..6 {
                let cand_pose = TwistPose::from_twist(delta).compose(&pose);
                let (e, count) =
                    evaluate(level, i, &z, &rho, &nf, &cand_pose, &light, &weights[i]);
                if count > 0 && e <= current {
                    pose = cand_pose;
                    current = e;
                    accepted = true;
                    break;
                }
                delta *= 0.5;
            }
            if !accepted || step_norm < config.gn_step_tol {
                break;
            }
        }
        est.poses[i] = pose;
        after_total += current;
    }
    (before_total, after_total)
}

/// Frozen-weight surrogate of one frame at a candidate pose and light, and
/// the number of contributing terms.
#[allow(clippy::too_many_arguments)]
fn evaluate(
    level: &Level,
    i: usize,
    z: &ImageGrid<f64>,
    rho: &ImageGrid<f64>,
    nf: &geometry::NormalField,
    pose: &TwistPose,
    light: &LightingVector,
    w: &ImageGrid<f64>,
) -> (f64, usize) {
    let frame = &level.frames[i];
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, y) in rho.valid_pixels() {
        if !w.is_valid(x, y) || !z.is_valid(x, y) || !nf.normals.is_valid(x, y) {
            continue;
        }
        let zv = z.get(x, y, 0);
        if zv <= geometry::DEPTH_EPS {
            continue;
        }
        let Some((qx, qy)) = geometry::warp(x as f64, y as f64, zv, pose, &level.k) else {
            continue;
        };
        let s = light[0]
            + light[1] * nf.normals.get(x, y, 0)
            + light[2] * nf.normals.get(x, y, 1)
            + light[3] * nf.normals.get(x, y, 2);
        for c in 0..3 {
            let Some(iv) = catmull_rom_sample_or_black(frame, qx, qy, c) else {
                break;
            };
            let r = iv - rho.get(x, y, c) * s;
            total += 0.5 * w.get(x, y, c) * r * r;
            count += 1;
        }
    }
    (total, count)
}

/// 6x6 Gauss-Newton normal equations of one frame at the current pose.
#[allow(clippy::too_many_arguments)]
fn normal_equations(
    level: &Level,
    i: usize,
    z: &ImageGrid<f64>,
    rho: &ImageGrid<f64>,
    nf: &geometry::NormalField,
    pose: &TwistPose,
    light: &LightingVector,
    w: &ImageGrid<f64>,
) -> Option<(SMatrix<f64, 6, 6>, SVector<f64, 6>)> {
    let frame = &level.frames[i];
    let (gx, gy) = &level.grads[i];
    let mut h = SMatrix::<f64, 6, 6>::zeros();
    let mut g = SVector::<f64, 6>::zeros();
    let mut any = false;
    for (x, y) in rho.valid_pixels() {
        if !w.is_valid(x, y) || !z.is_valid(x, y) || !nf.normals.is_valid(x, y) {
            continue;
        }
        let zv = z.get(x, y, 0);
        if zv <= geometry::DEPTH_EPS {
            continue;
        }
        let Some(j) = geometry::warp_jacobian(x as f64, y as f64, zv, pose, &level.k) else {
            continue;
        };
        let Some((qx, qy)) = geometry::warp(x as f64, y as f64, zv, pose, &level.k) else {
            continue;
        };
        let m = [
            1.0,
            nf.normals.get(x, y, 0),
            nf.normals.get(x, y, 1),
            nf.normals.get(x, y, 2),
        ];
        let s = light[0] + light[1] * m[1] + light[2] * m[2] + light[3] * m[3];
        for c in 0..3 {
            let (Some(iv), Some(dx), Some(dy)) = (
                catmull_rom_sample_or_black(frame, qx, qy, c),
                catmull_rom_sample_or_black(gx, qx, qy, c),
                catmull_rom_sample_or_black(gy, qx, qy, c),
            ) else {
                continue;
            };
            let rc = rho.get(x, y, c);
            let r = iv - rc * s;
            let wv = w.get(x, y, c);
            let mut row = SVector::<f64, 6>::zeros();
            for col in 0..6 {
                row[col] = dx * j[(0, col)] + dy * j[(1, col)];
            }
            h += wv * row * row.transpose();
            g += wv * r * row;
            any = true;
        }
    }
    if any {
        Some((h, g))
    } else {
        None
    }
}
