//! Depth block: with the warp, the area element and the IRLS weights frozen
//! at the sweep's current depth, the shading residual is affine in the depth
//! gradient, so the surrogate plus prior is an unconstrained linear
//! least-squares problem in the depth values. It is solved matrix-free with
//! Jacobi-preconditioned conjugate gradients started at the current depth,
//! which keeps the block monotone.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Error;
use crate::geometry::{self, Diff};
use crate::grid::ImageGrid;
use crate::photometry;

use super::{Level, SceneEstimate, SolverConfig};

/// Per-pixel quadratic reduction of the photometric surrogate: residuals of
/// every frame and channel collapse into a 2x2 form over the local depth
/// gradient plus a constant.
struct PixelQuad {
    p11: f64,
    p12: f64,
    p22: f64,
    q1: f64,
    q2: f64,
}

struct DepthSystem {
    width: usize,
    tau: f64,
    /// HR pixel -> variable index, usize::MAX when outside the domain.
    idx: Vec<usize>,
    /// variable -> pixel coordinates.
    vars: Vec<(usize, usize)>,
    stencil: Vec<(Diff, Diff)>,
    quad: Vec<PixelQuad>,
    /// constant term of the photometric surrogate
    c0: f64,
    /// prior data: per LR pixel with a nonempty block and valid z0, the
    /// variable list and target value.
    blocks: Vec<(Vec<usize>, f64)>,
}

/// Updates the depth map in place; returns the linearized surrogate (plus
/// prior) before and after.
pub(crate) fn update(
    level: &Level,
    est: &mut SceneEstimate,
    weights: &[ImageGrid<f64>],
    config: &SolverConfig,
) -> Result<(f64, f64), Error> {
    let sys = assemble(level, est, weights)?;
    let x0: Vec<f64> = sys
        .vars
        .iter()
        .map(|&(x, y)| est.depth.get(x, y, 0))
        .collect();
    let before = sys.objective(&x0);

    let b = sys.rhs();
    let x = sys.solve_cg(&x0, &b, config);
    let after_full = sys.objective(&x);
    if !after_full.is_finite() || after_full > before {
        return Ok((before, before));
    }

    // The surrogate linearizes the shading in the depth gradient, so unlike
    // the other blocks it does not majorize the true energy; a large CG step
    // can lower the surrogate while wrecking the real objective beyond the
    // reach of the saturated robust loss. Backtrack along the CG direction
    // against the true energy (the surrogate is convex along the segment, so
    // every backtracked point still lowers the surrogate).
    let before_true = super::total_energy(level, est, config.lambda)?;
    let mut alpha = 1.0;
    for _ in 0..8 {
        let mut positive = true;
        for (j, &(px, py)) in sys.vars.iter().enumerate() {
            let v = x0[j] + alpha * (x[j] - x0[j]);
            if v <= geometry::DEPTH_EPS {
                positive = false;
            }
            est.depth.set(px, py, 0, v);
        }
        if positive {
            let e = super::total_energy(level, est, config.lambda)?;
            if e.is_finite() && e <= before_true {
                let xa: Vec<f64> = sys
                    .vars
                    .iter()
                    .enumerate()
                    .map(|(j, _)| x0[j] + alpha * (x[j] - x0[j]))
                    .collect();
                return Ok((before, sys.objective(&xa)));
            }
        }
        alpha *= 0.5;
    }
    for (j, &(px, py)) in sys.vars.iter().enumerate() {
        est.depth.set(px, py, 0, x0[j]);
    }
    Ok((before, before))
}

fn assemble(
    level: &Level,
    est: &SceneEstimate,
    weights: &[ImageGrid<f64>],
) -> Result<DepthSystem, Error> {
    let z = &est.depth;
    let (w, h) = z.size();
    let mut idx = vec![usize::MAX; w * h];
    let mut vars = Vec::new();
    for (x, y) in z.valid_pixels() {
        idx[y * w + x] = vars.len();
        vars.push((x, y));
    }
    if vars.is_empty() {
        return Err(Error::EmptyMask);
    }
    let stencil: Vec<(Diff, Diff)> = vars
        .iter()
        .map(|&(x, y)| geometry::gradient_stencil(z, x, y))
        .collect();

    let nf = geometry::normals_from_depth(z, &level.k);
    let mut quad: Vec<PixelQuad> = (0..vars.len())
        .map(|_| PixelQuad {
            p11: 0.0,
            p12: 0.0,
            p22: 0.0,
            q1: 0.0,
            q2: 0.0,
        })
        .collect();
    let mut c0 = 0.0;

    for (i, frame) in level.frames.iter().enumerate() {
        let warped = photometry::warp_image(frame, &est.poses[i], z, &level.k);
        let l = &est.lights[i];
        for (j, &(x, y)) in vars.iter().enumerate() {
            if !warped.is_valid(x, y)
                || !weights[i].is_valid(x, y)
                || !nf.area.is_valid(x, y)
                || !est.albedo.is_valid(x, y)
            {
                continue;
            }
            let da = nf.area.get(x, y, 0);
            let u = x as f64 - level.k.cx;
            let v = y as f64 - level.k.cy;
            for c in 0..3 {
                let rho = est.albedo.get(x, y, c);
                let wv = weights[i].get(x, y, c);
                let alpha = rho / da * (l[1] * level.k.f - l[3] * u);
                let beta = rho / da * (l[2] * level.k.f - l[3] * v);
                let t = warped.get(x, y, c) - rho * (l[0] - l[3] / da);
                quad[j].p11 += wv * alpha * alpha;
                quad[j].p12 += wv * alpha * beta;
                quad[j].p22 += wv * beta * beta;
                quad[j].q1 += wv * t * alpha;
                quad[j].q2 += wv * t * beta;
                c0 += 0.5 * wv * t * t;
            }
        }
    }

    // prior blocks over the valid intersection of D z and z0; partially
    // covered blocks are skipped to match prior_sse, since their clipped
    // mean is not what the sensor observed
    let mut blocks = Vec::new();
    for ly in 0..level.z0.height() {
        for lx in 0..level.z0.width() {
            if !level.z0.is_valid(lx, ly) {
                continue;
            }
            let mut members = Vec::new();
            let mut full = true;
            for fy in (ly * level.sf)..((ly + 1) * level.sf).min(h) {
                for fx in (lx * level.sf)..((lx + 1) * level.sf).min(w) {
                    let j = idx[fy * w + fx];
                    if j != usize::MAX {
                        members.push(j);
                    } else {
                        full = false;
                    }
                }
            }
            if full && !members.is_empty() {
                blocks.push((members, level.z0.get(lx, ly, 0)));
            }
        }
    }

    Ok(DepthSystem {
        width: w,
        tau: level.tau,
        idx,
        vars,
        stencil,
        quad,
        c0,
        blocks,
    })
}

impl DepthSystem {
    #[inline]
    fn var_at(&self, x: usize, y: usize) -> usize {
        self.idx[y * self.width + x]
    }

    /// Depth-gradient of a variable vector at pixel `j` under the frozen
    /// stencil. `Diff::None` axes contribute zero.
    #[inline]
    fn grad(&self, v: &[f64], j: usize) -> (f64, f64) {
        let (x, y) = self.vars[j];
        let (sx, sy) = self.stencil[j];
        let vc = v[j];
        let gx = match sx {
            Diff::Forward => v[self.var_at(x + 1, y)] - vc,
            Diff::Backward => vc - v[self.var_at(x - 1, y)],
            Diff::None => 0.0,
        };
        let gy = match sy {
            Diff::Forward => v[self.var_at(x, y + 1)] - vc,
            Diff::Backward => vc - v[self.var_at(x, y - 1)],
            Diff::None => 0.0,
        };
        (gx, gy)
    }

    /// Scatters the pair `(ax, ay)` through the adjoint of the stencil.
    #[inline]
    fn scatter(&self, out: &mut [f64], j: usize, ax: f64, ay: f64) {
        let (x, y) = self.vars[j];
        let (sx, sy) = self.stencil[j];
        match sx {
            Diff::Forward => {
                out[self.var_at(x + 1, y)] += ax;
                out[j] -= ax;
            }
            Diff::Backward => {
                out[j] += ax;
                out[self.var_at(x - 1, y)] -= ax;
            }
            Diff::None => {}
        }
        match sy {
            Diff::Forward => {
                out[self.var_at(x, y + 1)] += ay;
                out[j] -= ay;
            }
            Diff::Backward => {
                out[j] += ay;
                out[self.var_at(x, y - 1)] -= ay;
            }
            Diff::None => {}
        }
    }

    /// `A v` with `A = G^T P G + 2 tau D^T D`.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..self.vars.len() {
            let (gx, gy) = self.grad(v, j);
            let q = &self.quad[j];
            let ax = q.p11 * gx + q.p12 * gy;
            let ay = q.p12 * gx + q.p22 * gy;
            self.scatter(out, j, ax, ay);
        }
        for (members, _) in &self.blocks {
            let inv = 1.0 / members.len() as f64;
            let mean: f64 = members.iter().map(|&j| v[j]).sum::<f64>() * inv;
            let push = 2.0 * self.tau * mean * inv;
            for &j in members {
                out[j] += push;
            }
        }
    }

    /// `b = G^T q + 2 tau D^T z0`.
    fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.vars.len()];
        for j in 0..self.vars.len() {
            let q = &self.quad[j];
            self.scatter(&mut b, j, q.q1, q.q2);
        }
        for (members, z0) in &self.blocks {
            let push = 2.0 * self.tau * z0 / members.len() as f64;
            for &j in members {
                b[j] += push;
            }
        }
        b
    }

    /// Exact diagonal of `A`, for Jacobi preconditioning.
    fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.vars.len()];
        for j in 0..self.vars.len() {
            let (x, y) = self.vars[j];
            let (sx, sy) = self.stencil[j];
            let q = &self.quad[j];
            // own stencil: coefficient -1 (forward) or +1 (backward) per axis
            let cx = match sx {
                Diff::Forward => -1.0,
                Diff::Backward => 1.0,
                Diff::None => 0.0,
            };
            let cy = match sy {
                Diff::Forward => -1.0,
                Diff::Backward => 1.0,
                Diff::None => 0.0,
            };
            diag[j] += q.p11 * cx * cx + 2.0 * q.p12 * cx * cy + q.p22 * cy * cy;
            // neighbours referencing this pixel with unit coefficient
            match sx {
                Diff::Forward => diag[self.var_at(x + 1, y)] += q.p11,
                Diff::Backward => diag[self.var_at(x - 1, y)] += q.p11,
                Diff::None => {}
            }
            match sy {
                Diff::Forward => diag[self.var_at(x, y + 1)] += q.p22,
                Diff::Backward => diag[self.var_at(x, y - 1)] += q.p22,
                Diff::None => {}
            }
        }
        for (members, _) in &self.blocks {
            let d = 2.0 * self.tau / (members.len() as f64 * members.len() as f64);
            for &j in members {
                diag[j] += d;
            }
        }
        for d in &mut diag {
            if !(*d > 0.0) || !d.is_finite() {
                *d = 1.0;
            }
        }
        diag
    }

    /// Linearized surrogate plus prior at a variable vector.
    fn objective(&self, v: &[f64]) -> f64 {
        let mut total = self.c0;
        for j in 0..self.vars.len() {
            let (gx, gy) = self.grad(v, j);
            let q = &self.quad[j];
            total += 0.5 * (q.p11 * gx * gx + 2.0 * q.p12 * gx * gy + q.p22 * gy * gy)
                - (q.q1 * gx + q.q2 * gy);
        }
        for (members, z0) in &self.blocks {
            let mean: f64 = members.iter().map(|&j| v[j]).sum::<f64>() / members.len() as f64;
            let d = mean - z0;
            total += self.tau * d * d;
        }
        total
    }

    /// Jacobi-preconditioned conjugate gradients from `x0`.
    ///
    /// The system is centered at `x0` with a small Tikhonov term
    /// `eps ||x - x0||^2` scaled to the mean curvature: pixels the shading
    /// and the prior barely constrain (silhouette boundary, holes in the
    /// LR coverage) would otherwise drift along near-null directions. The
    /// centered minimizer still cannot increase the uncentered objective
    /// relative to `x0`.
    fn solve_cg(&self, x0: &[f64], b: &[f64], config: &SolverConfig) -> Vec<f64> {
        let n = x0.len();
        let mut diag = self.diagonal();
        let eps = 1e-6 * diag.iter().sum::<f64>() / n as f64;
        for d in &mut diag {
            *d += eps;
        }
        let mut x = x0.to_vec();
        let mut ax = vec![0.0; n];
        self.apply(&x, &mut ax);
        // residual of (A + eps I) x = b + eps x0; at x = x0 the eps parts
        // cancel exactly
        let mut r: Vec<f64> = (0..n)
            .map(|j| b[j] + eps * x0[j] - ax[j] - eps * x[j])
            .collect();
        let bnorm = (0..n)
            .map(|j| {
                let v = b[j] + eps * x0[j];
                v * v
            })
            .sum::<f64>()
            .sqrt()
            .max(1e-300);
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, c)| a * c).sum();
        let mut ap = vec![0.0; n];
        for _ in 0..config.cg_max_iters {
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= config.cg_tol * bnorm {
                break;
            }
            self.apply(&p, &mut ap);
            for j in 0..n {
                ap[j] += eps * p[j];
            }
            let pap: f64 = p.iter().zip(&ap).map(|(a, c)| a * c).sum();
            if !(pap > 0.0) || !pap.is_finite() {
                break;
            }
            let alpha = rz / pap;
            for j in 0..n {
                x[j] += alpha * p[j];
                r[j] -= alpha * ap[j];
            }
            for j in 0..n {
                z[j] = r[j] / diag[j];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, c)| a * c).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for j in 0..n {
                p[j] = z[j] + beta * p[j];
            }
        }
        x
    }
}
