//! End-to-end probe on the default (checkerboard sphere) scene.

use mvpsr_core::sampling::bilinear_resize;
use mvpsr_core::solver::{solve, SolverConfig, SolverInput};
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
    let (w, h) = d.frames[0].size();
    let baseline = bilinear_resize(&d.depth_lr, w, h);
    let rb = evaluate(&baseline, &d.gt_depth, &d.intrinsics).unwrap();
    println!("baseline MAE {:.4} RMSE {:.6}", rb.mae_deg, rb.rmse);

    let config = SolverConfig::default();
    let t0 = std::time::Instant::now();
    let result = solve(&input, &config).unwrap();
    println!("solve took {:.1}s", t0.elapsed().as_secs_f64());
    let r = evaluate(&result.estimate.depth, &d.gt_depth, &d.intrinsics).unwrap();
    println!("estimate MAE {:.4} RMSE {:.6} (count {})", r.mae_deg, r.rmse, r.rmse_count);

    for rec in &result.records {
        if rec.sweep == 0 {
            println!("level {} starts at energy {:.4e}", rec.level, rec.energy);
        }
    }
    for level in 0..config.levels {
        let n = result.records.iter().filter(|r| r.level == level).count();
        if n > 0 {
            let last = result
                .records
                .iter()
                .filter(|r| r.level == level)
                .next_back()
                .unwrap();
            println!("level {level}: {n} sweeps, final energy {:.4e}", last.energy);
        }
    }
    std::fs::create_dir_all("/tmp/probe2").unwrap();
    mvps::pfm::write_pfm(std::path::Path::new("/tmp/probe2/est.pfm"), &result.estimate.depth).unwrap();
    mvps::pfm::write_pfm(std::path::Path::new("/tmp/probe2/gt.pfm"), &d.gt_depth).unwrap();
    mvps::pfm::write_pfm(std::path::Path::new("/tmp/probe2/baseline.pfm"), &baseline).unwrap();
    mvps::pfm::write_pfm(std::path::Path::new("/tmp/probe2/albedo.pfm"), &result.estimate.albedo).unwrap();

    // pose errors
    for (i, (p, g)) in result.estimate.poses.iter().zip(&d.gt_poses).enumerate() {
        if i % 5 == 0 || i == 19 {
            println!(
                "pose {i}: twist err {:.3e}, light err {:.3e}",
                (p.twist() - g.twist()).norm(),
                (result.estimate.lights[i] - d.gt_lights[i]).norm()
            );
        }
    }
}
