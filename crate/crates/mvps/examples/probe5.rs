//! Landscape probe: robust energy around ground truth along one pose axis.

use mvpsr_core::solver::{state_energy, SceneEstimate, SolverConfig, SolverInput};
use mvpsr_core::synth::RenderOptions;

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
    let gt = SceneEstimate {
        depth: d.gt_depth.clone(),
        albedo: d.gt_albedo.clone(),
        poses: d.gt_poses.clone(),
        lights: d.gt_lights.clone(),
    };
    println!("energy at GT: {:.6e}", state_energy(&input, &gt, &config).unwrap());

    // perturb pose 5 along each twist axis
    for axis in 0..6 {
        print!("axis {axis}:");
        for step in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
            let mut est = gt.clone();
            let mut tw = est.poses[5].twist();
            let scale = if axis < 3 { 1e-3 } else { 5e-4 };
            tw[axis] += step * scale;
            est.poses[5] = mvpsr_core::se3::TwistPose::from_twist(tw);
            let e = state_energy(&input, &est, &config).unwrap();
            print!(" {e:.5e}");
        }
        println!();
    }
}
