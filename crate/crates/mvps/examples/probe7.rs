//! Residual anatomy at ground truth: which pixels and frames carry the
//! robust energy floor.

use mvpsr_core::geometry::normals_from_depth;
use mvpsr_core::photometry::{residual_from_parts, warp_image};
use mvpsr_core::solver::{SceneEstimate, SolverInput};
use mvpsr_core::synth::RenderOptions;

use mvps::scene::{generate, SceneConfig};

fn main() {
    let mut cfg = SceneConfig::default();
    let quantize = std::env::args().nth(1).as_deref() != Some("noquant");
    if std::env::args().nth(2).as_deref() == Some("nonoise") {
        cfg.kappa = 0.0;
    }
    let d = generate(&cfg, 0, RenderOptions { quantize }).unwrap();
    let input = SolverInput {
        frames: d.frames.clone(),
        depth_lr: d.depth_lr.clone(),
        mask: d.mask.clone(),
        intrinsics: d.intrinsics,
        sf: d.sf,
    };
    let est = SceneEstimate {
        depth: d.gt_depth.clone(),
        albedo: d.gt_albedo.clone(),
        poses: d.gt_poses.clone(),
        lights: d.gt_lights.clone(),
    };
    let lambda = 0.04f64;
    let nf = normals_from_depth(&est.depth, &input.intrinsics);

    // albedo gradient magnitude per pixel
    let (w, h) = d.gt_albedo.size();
    let mut agrad = vec![0.0f64; w * h];
    for (x, y) in d.gt_albedo.valid_pixels() {
        if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
            continue;
        }
        let mut g = 0.0f64;
        for c in 0..3 {
            if d.gt_albedo.is_valid(x + 1, y) && d.gt_albedo.is_valid(x - 1, y) {
                g += (d.gt_albedo.get(x + 1, y, c) - d.gt_albedo.get(x - 1, y, c)).abs();
            }
            if d.gt_albedo.is_valid(x, y + 1) && d.gt_albedo.is_valid(x, y - 1) {
                g += (d.gt_albedo.get(x, y + 1, c) - d.gt_albedo.get(x, y - 1, c)).abs();
            }
        }
        agrad[y * w + x] = g;
    }

    let mut by_bin = [0.0f64; 4]; // agrad bins: 0, <0.05, <0.2, >=0.2
    let mut count_bin = [0usize; 4];
    println!("frame | twist norm | robust energy | rms residual");
    for (i, frame) in input.frames.iter().enumerate() {
        let warped = warp_image(frame, &est.poses[i], &est.depth, &input.intrinsics);
        let res = residual_from_parts(&warped, &nf, &est.albedo, &est.lights[i]);
        let mut e = 0.0;
        let mut ss = 0.0;
        let mut n = 0usize;
        for (x, y) in res.valid_pixels() {
            let bin = match agrad[y * w + x] {
                g if g == 0.0 => 0,
                g if g < 0.05 => 1,
                g if g < 0.2 => 2,
                _ => 3,
            };
            for c in 0..3 {
                let r = res.get(x, y, c);
                let phi = 0.5 * lambda * lambda * (1.0 + (r / lambda).powi(2)).ln();
                e += phi;
                by_bin[bin] += phi;
                count_bin[bin] += 1;
                ss += r * r;
                n += 1;
            }
        }
        if i % 4 == 0 || i == 19 {
            println!(
                "{i:5} | {:.4} | {e:.4} | {:.5}",
                est.poses[i].twist().norm(),
                (ss / n as f64).sqrt()
            );
        }
    }
    println!("energy by albedo-gradient bin (flat, low, mid, edge):");
    for b in 0..4 {
        println!(
            "  bin {b}: energy {:.4}, samples {}, per-sample {:.3e}",
            by_bin[b],
            count_bin[b],
            by_bin[b] / count_bin[b].max(1) as f64
        );
    }
}
