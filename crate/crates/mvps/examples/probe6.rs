//! Silhouette-bias probe: pose-axis landscape and drift with an eroded
//! reference mask.

use mvpsr_core::solver::{
    run_single_sweep, state_energy, SceneEstimate, SolverConfig, SolverInput,
};
use mvpsr_core::synth::RenderOptions;

use mvps::metrics::evaluate;
use mvps::scene::{generate, SceneConfig};

fn erode(mask: &[bool], w: usize, h: usize, iters: usize) -> Vec<bool> {
    let mut cur = mask.to_vec();
    for _ in 0..iters {
        let mut next = cur.clone();
        for y in 0..h {
            for x in 0..w {
                if !cur[y * w + x] {
                    continue;
                }
                let edge = x == 0
                    || y == 0
                    || x + 1 == w
                    || y + 1 == h
                    || !cur[y * w + x - 1]
                    || !cur[y * w + x + 1]
                    || !cur[(y - 1) * w + x]
                    || !cur[(y + 1) * w + x];
                if edge {
                    next[y * w + x] = false;
                }
            }
        }
        cur = next;
    }
    cur
}

fn main() {
    let mut cfg = SceneConfig::default();
    let args: Vec<String> = std::env::args().collect();
    let quantize = !args.iter().any(|a| a == "noquant");
    if let Some(r) = args.iter().position(|a| a == "rot") {
        cfg.trajectory.max_rotation = args[r + 1].parse().unwrap();
    }
    let d = generate(&cfg, 0, RenderOptions { quantize }).unwrap();
    let (w, h) = d.frames[0].size();
    for erosion in [5usize] {
        let mask = erode(&d.mask, w, h, erosion);
        let input = SolverInput {
            frames: d.frames.clone(),
            depth_lr: d.depth_lr.clone(),
            mask,
            intrinsics: d.intrinsics,
            sf: d.sf,
        };
        let config = SolverConfig::default();
        let gt = SceneEstimate {
            depth: d.gt_depth.clone(),
            albedo: d.gt_albedo.clone(),
            poses: d.gt_poses.clone(),
            lights: d.gt_lights.clone(),
        };
        // restrict GT estimate to the eroded domain
        let mut gt = gt;
        let _ = gt.depth.apply_mask(&input.mask);
        let _ = gt.albedo.apply_mask(&input.mask);
        println!(
            "erosion {erosion}: energy at GT {:.4e}",
            state_energy(&input, &gt, &config).unwrap()
        );
        print!("  axis2 scan:");
        for step in [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
            let mut est = gt.clone();
            let mut tw = est.poses[5].twist();
            tw[2] += step * 1e-3;
            est.poses[5] = mvpsr_core::se3::TwistPose::from_twist(tw);
            print!(" {:.5e}", state_energy(&input, &est, &config).unwrap());
        }
        println!();
        let mut est = gt.clone();
        for sweep in 0..25 {
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
                "  sweep {sweep}: MAE {:.4} RMSE {:.6} dpose {perr:.3e} energy {:.4e}",
                r.mae_deg,
                r.rmse,
                state_energy(&input, &est, &config).unwrap()
            );
        }
    }
}
