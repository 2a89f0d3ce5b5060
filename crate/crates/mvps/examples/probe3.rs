//! Stability probe: start at ground truth on the default scene and watch
//! whether full-resolution sweeps stay nearby.

use mvpsr_core::solver::{run_single_sweep, SceneEstimate, SolverConfig, SolverInput};
use mvpsr_core::synth::RenderOptions;

use mvps::metrics::evaluate;
use mvps::scene::{generate, SceneConfig};

fn main() {
    let cfg = SceneConfig::default();
    let d = generate(&cfg, 0, RenderOptions::default()).unwrap();
    let input = SolverInput {
        frames: d.frames.clone(),
        depth_lr: d.depth_lr.clone(),
        mask: d.mask.clone(),
        intrinsics: d.intrinsics,
        sf: d.sf,
    };
    let config = SolverConfig::default();
    let mut est = SceneEstimate {
        depth: d.gt_depth.clone(),
        albedo: d.gt_albedo.clone(),
        poses: d.gt_poses.clone(),
        lights: d.gt_lights.clone(),
    };
    let r0 = evaluate(&est.depth, &d.gt_depth, &d.intrinsics).unwrap();
    println!("start MAE {:.4} RMSE {:.6}", r0.mae_deg, r0.rmse);
    for sweep in 0..8 {
        let blocks = run_single_sweep(&input, &mut est, &config).unwrap();
        let r = evaluate(&est.depth, &d.gt_depth, &d.intrinsics).unwrap();
        print!("sweep {sweep}: MAE {:.4} RMSE {:.6} |", r.mae_deg, r.rmse);
        for b in blocks {
            print!(" {} {:.3e}->{:.3e}", &b.name[..1], b.surrogate_before, b.surrogate_after);
        }
        let perr: f64 = est
            .poses
            .iter()
            .zip(&d.gt_poses)
            .map(|(a, b)| (a.twist() - b.twist()).norm_squared())
            .sum::<f64>()
            .sqrt();
        println!(" dpose {perr:.3e}");
    }
}
