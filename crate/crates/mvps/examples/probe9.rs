//! From-scratch solve with a configurable pyramid depth.

use mvpsr_core::solver::{solve, SolverConfig, SolverInput};
use mvpsr_core::synth::RenderOptions;

use mvps::metrics::evaluate;
use mvps::scene::{generate, SceneConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let levels: usize = args.get(1).map(|a| a.parse().unwrap()).unwrap_or(1);
    let max_sweeps: usize = args.get(2).map(|a| a.parse().unwrap()).unwrap_or(50);
    let cfg = SceneConfig::default();
    let d = generate(&cfg, 0, RenderOptions { quantize: true }).unwrap();
    let input = SolverInput {
        frames: d.frames.clone(),
        depth_lr: d.depth_lr.clone(),
        mask: d.mask.clone(),
        intrinsics: d.intrinsics,
        sf: d.sf,
    };
    let config = SolverConfig {
        levels,
        max_sweeps,
        ..SolverConfig::default()
    };
    let t0 = std::time::Instant::now();
    let out = solve(&input, &config).unwrap();
    println!("levels {levels}: solve took {:.1}s", t0.elapsed().as_secs_f64());
    let r = evaluate(&out.estimate.depth, &d.gt_depth, &d.intrinsics).unwrap();
    println!("estimate MAE {:.4} RMSE {:.6} (count {})", r.mae_deg, r.rmse, r.mae_count);
    for li in 0..levels {
        let recs: Vec<_> = out.records.iter().filter(|r| r.level == li).collect();
        if recs.is_empty() {
            continue;
        }
        println!(
            "level {li}: {} sweeps, energy {:.4e} -> {:.4e}",
            recs.len(),
            recs.first().unwrap().energy,
            recs.last().unwrap().energy
        );
    }
    for i in [1, 5, 10, 15, 16, 17, 18, 19] {
        let terr = (out.estimate.poses[i].twist() - d.gt_poses[i].twist()).norm();
        println!("pose {i}: twist err {terr:.3e}");
    }
    for i in [17, 18, 19] {
        let e = out.estimate.poses[i].twist();
        let g = d.gt_poses[i].twist();
        println!(
            "pose {i} est [{:+.4} {:+.4} {:+.4} | {:+.4} {:+.4} {:+.4}]",
            e[0], e[1], e[2], e[3], e[4], e[5]
        );
        println!(
            "pose {i} gt  [{:+.4} {:+.4} {:+.4} | {:+.4} {:+.4} {:+.4}]",
            g[0], g[1], g[2], g[3], g[4], g[5]
        );
    }
    let mut est = out.estimate.clone();
    for sweep in 0..30 {
        mvpsr_core::solver::run_single_sweep(&input, &mut est, &config).unwrap();
        if sweep % 3 == 0 {
            let r = evaluate(&est.depth, &d.gt_depth, &d.intrinsics).unwrap();
            let perr: f64 = est
                .poses
                .iter()
                .zip(&d.gt_poses)
                .map(|(a, b)| (a.twist() - b.twist()).norm_squared())
                .sum::<f64>()
                .sqrt();
            let e = mvpsr_core::solver::state_energy(&input, &est, &config).unwrap();
            println!(
                "extra sweep {sweep}: MAE {:.4} RMSE {:.6} dpose {perr:.3e} energy {e:.4e}",
                r.mae_deg, r.rmse
            );
        }
    }
    // per-frame robust energy at the final state
    let nf = mvpsr_core::geometry::normals_from_depth(&out.estimate.depth, &d.intrinsics);
    for i in 0..d.frames.len() {
        let warped = mvpsr_core::photometry::warp_image(
            &d.frames[i],
            &out.estimate.poses[i],
            &out.estimate.depth,
            &d.intrinsics,
        );
        let res = mvpsr_core::photometry::residual_from_parts(
            &warped,
            &nf,
            &out.estimate.albedo,
            &out.estimate.lights[i],
        );
        let mut e = 0.0;
        let mut cnt = 0usize;
        for (x, y) in res.valid_pixels() {
            for c in 0..3 {
                let r = res.get(x, y, c);
                e += 0.5 * 0.04f64.powi(2) * (1.0 + (r / 0.04).powi(2)).ln();
                cnt += 1;
            }
        }
        println!("frame {i:2}: energy {:.4e} ({} samples)", e, cnt);
    }
}
