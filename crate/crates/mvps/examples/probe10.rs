//! Full-res sweeps from scratch-initialized depth/albedo with poses and
//! lights seeded at ground truth, to isolate the depth/albedo blocks.

use mvpsr_core::sampling::bilinear_resize;
use mvpsr_core::solver::{run_single_sweep, SceneEstimate, SolverConfig, SolverInput};
use mvpsr_core::synth::RenderOptions;

use mvps::metrics::evaluate;
use mvps::scene::{generate, SceneConfig};

fn erode(domain: &mut [bool], w: usize, h: usize, iters: usize) {
    for _ in 0..iters {
        let prev = domain.to_vec();
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                if !prev[p] {
                    continue;
                }
                if x == 0
                    || y == 0
                    || x + 1 == w
                    || y + 1 == h
                    || !prev[p - 1]
                    || !prev[p + 1]
                    || !prev[p - w]
                    || !prev[p + w]
                {
                    domain[p] = false;
                }
            }
        }
    }
}

fn main() {
    let cfg = SceneConfig::default();
    let d = generate(&cfg, 0, RenderOptions { quantize: true }).unwrap();
    let (w, h) = d.frames[0].size();
    let input = SolverInput {
        frames: d.frames.clone(),
        depth_lr: d.depth_lr.clone(),
        mask: d.mask.clone(),
        intrinsics: d.intrinsics,
        sf: d.sf,
    };
    let config = SolverConfig::default();
    let mut domain = d.mask.clone();
    erode(&mut domain, w, h, 5);
    let mut z = bilinear_resize(&d.depth_lr, w, h);
    let mut rho = bilinear_resize(&d.frames[0], w, h);
    let _ = z.apply_mask(&domain);
    let _ = rho.apply_mask(&domain);
    let s = mvpsr_core::photometry::shading_field(
        &mvpsr_core::geometry::normals_from_depth(&z, &d.intrinsics),
        &nalgebra::Vector4::new(0.2, 0.0, 0.0, -1.0),
    );
    for (x, y) in rho.clone().valid_pixels() {
        let sv = if s.is_valid(x, y) { s.get(x, y, 0) } else { 0.0 };
        if sv > 1e-3 {
            for c in 0..3 {
                let v = (rho.get(x, y, c) / sv).min(2.0);
                rho.set(x, y, c, v);
            }
        }
    }
    let mut est = SceneEstimate {
        depth: z,
        albedo: rho,
        poses: d.gt_poses.clone(),
        lights: d.gt_lights.clone(),
    };
    let r = evaluate(&est.depth, &d.gt_depth, &d.intrinsics).unwrap();
    println!("init: MAE {:.4} RMSE {:.6}", r.mae_deg, r.rmse);
    for sweep in 0..20 {
        run_single_sweep(&input, &mut est, &config).unwrap();
        let r = evaluate(&est.depth, &d.gt_depth, &d.intrinsics).unwrap();
        let perr: f64 = est
            .poses
            .iter()
            .zip(&d.gt_poses)
            .map(|(a, b)| (a.twist() - b.twist()).norm_squared())
            .sum::<f64>()
            .sqrt();
        println!(
            "sweep {sweep}: MAE {:.4} RMSE {:.6} dpose {perr:.3e}",
            r.mae_deg, r.rmse
        );
    }
}
