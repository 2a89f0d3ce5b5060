//! Seed-rescue mechanism test: all poses at ground truth except one outlier.

use mvpsr_core::solver::{run_single_sweep, SceneEstimate, SolverConfig, SolverInput};
use mvpsr_core::synth::RenderOptions;
use nalgebra::Vector6;

use mvps::scene::{generate, SceneConfig};

fn main() {
    let cfg = SceneConfig::default();
    let d = generate(&cfg, 0, RenderOptions { quantize: true }).unwrap();
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
    est.poses[16] = mvpsr_core::se3::TwistPose::from_twist(Vector6::new(
        0.5464, -0.4713, 0.0183, -0.3133, -0.3155, 0.0084,
    ));
    // frozen-weight surrogate of frame 16 at the stuck pose vs candidates
    {
        use mvpsr_core::geometry::normals_from_depth;
        use mvpsr_core::photometry::{irls_weights, residual_from_parts, warp_image};
        let nf = normals_from_depth(&est.depth, &d.intrinsics);
        let res: Vec<_> = (0..20)
            .map(|i| {
                let warped = warp_image(&d.frames[i], &est.poses[i], &est.depth, &d.intrinsics);
                residual_from_parts(&warped, &nf, &est.albedo, &est.lights[i])
            })
            .collect();
        let w = irls_weights(&res, config.lambda);
        let surro = |pose: &mvpsr_core::se3::TwistPose| -> (f64, usize) {
            let warped = warp_image(&d.frames[16], pose, &est.depth, &d.intrinsics);
            let r = residual_from_parts(&warped, &nf, &est.albedo, &est.lights[16]);
            let mut tot = 0.0;
            let mut cnt = 0;
            for (x, y) in r.valid_pixels() {
                if !w[16].is_valid(x, y) {
                    continue;
                }
                for c in 0..3 {
                    tot += 0.5 * w[16].get(x, y, c) * r.get(x, y, c).powi(2);
                    cnt += 1;
                }
            }
            (tot, cnt)
        };
        let (e_stuck, c_stuck) = surro(&est.poses[16]);
        let (e_prev, c_prev) = surro(&est.poses[15]);
        let (e_gt, c_gt) = surro(&d.gt_poses[16]);
        println!("surrogate stuck {e_stuck:.4e} ({c_stuck}), prev {e_prev:.4e} ({c_prev}), gt {e_gt:.4e} ({c_gt})");
        let wsum: f64 = w[16]
            .valid_pixels()
            .map(|(x, y)| (0..3).map(|c| w[16].get(x, y, c)).sum::<f64>())
            .sum();
        println!("weight grid 16: valid {} sum {wsum:.4e}", w[16].valid_count());
    }
    for sweep in 0..3 {
        run_single_sweep(&input, &mut est, &config).unwrap();
        let terr = (est.poses[16].twist() - d.gt_poses[16].twist()).norm();
        println!("sweep {sweep}: pose 16 twist err {terr:.4e}");
    }
}
