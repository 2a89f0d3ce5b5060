//! Residual anatomy at ground truth, binned by distance to the silhouette.

use mvpsr_core::geometry::normals_from_depth;
use mvpsr_core::photometry::{residual_from_parts, warp_image};
use mvpsr_core::solver::{SceneEstimate, SolverInput};
use mvpsr_core::synth::RenderOptions;

use mvps::scene::{generate, SceneConfig};

fn main() {
    let cfg = SceneConfig::default();
    let quantize = std::env::args().nth(1).as_deref() != Some("noquant");
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
    let (w, h) = d.gt_albedo.size();

    // ring index: erosion iteration at which the pixel leaves the mask
    let mut ring = vec![usize::MAX; w * h];
    let mut cur = input.mask.clone();
    for it in 0..30usize {
        let prev = cur.clone();
        let mut any = false;
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
                    ring[p] = it;
                    cur[p] = false;
                    any = true;
                }
            }
        }
        if !any {
            break;
        }
    }

    let nbins = 16usize;
    let mut energy = vec![0.0f64; nbins];
    let mut sumsq = vec![0.0f64; nbins];
    let mut count = vec![0usize; nbins];
    for (i, frame) in input.frames.iter().enumerate() {
        let warped = warp_image(frame, &est.poses[i], &est.depth, &input.intrinsics);
        let res = residual_from_parts(&warped, &nf, &est.albedo, &est.lights[i]);
        let _ = i;
        for (x, y) in res.valid_pixels() {
            let r0 = ring[y * w + x];
            let bin = r0.min(nbins - 1);
            for c in 0..3 {
                let r = res.get(x, y, c);
                let phi = 0.5 * lambda * lambda * (1.0 + (r / lambda).powi(2)).ln();
                energy[bin] += phi;
                sumsq[bin] += r * r;
                count[bin] += 1;
            }
        }
    }
    println!("ring | samples | energy | rms");
    for b in 0..nbins {
        println!(
            "{b:4} | {:7} | {:8.4} | {:.5}",
            count[b],
            energy[b],
            (sumsq[b] / count[b].max(1) as f64).sqrt()
        );
    }
}
