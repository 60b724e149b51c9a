use flowcore::{resample_flow, FlowField, Image};
use rayon::prelude::*;

use crate::pyramid::build_pyramid;
use crate::{Result, StepFlowError};

/// Pyramidal local least-squares estimator configuration.
///
/// Estimation runs coarse to fine; each level refines the upsampled flow
/// with `iterations` per-pixel least-squares updates over a
/// `(2r+1) x (2r+1)` window under brightness constancy. Pixels whose
/// structure matrix is degenerate (minimum eigenvalue per window pixel
/// below `min_eigenvalue`) receive no update and are flagged
/// low-confidence in the validity mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub levels: usize,
    pub iterations: usize,
    pub window_radius: usize,
    pub min_eigenvalue: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            iterations: 5,
            window_radius: 3,
            min_eigenvalue: 1e-4,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 {
            return Err(StepFlowError::InvalidConfig("levels must be >= 1".into()));
        }
        if self.window_radius < 1 {
            return Err(StepFlowError::InvalidConfig(
                "window radius must be >= 1".into(),
            ));
        }
        if self.iterations < 1 {
            return Err(StepFlowError::InvalidConfig(
                "iterations must be >= 1".into(),
            ));
        }
        if self.min_eigenvalue.is_nan() || self.min_eigenvalue < 0.0 {
            return Err(StepFlowError::InvalidConfig(
                "min eigenvalue must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Dense flow from `src` to `dst` on the source grid, so
/// `warp_image(dst, flow)` approximates `src`. Color inputs are reduced to
/// luma before estimation.
pub fn estimate_flow(src: &Image, dst: &Image, cfg: &EstimatorConfig) -> Result<FlowField> {
    cfg.validate()?;
    if src.width() != dst.width() || src.height() != dst.height() {
        return Err(StepFlowError::DimensionMismatch(format!(
            "src {}x{} vs dst {}x{}",
            src.width(),
            src.height(),
            dst.width(),
            dst.height()
        )));
    }
    let src_pyr = build_pyramid(&src.to_luma(), cfg.levels);
    let dst_pyr = build_pyramid(&dst.to_luma(), cfg.levels);
    let levels = src_pyr.len();

    let coarsest = &src_pyr[levels - 1];
    let mut flow = FlowField::zeros(coarsest.width(), coarsest.height());
    let mut gated = vec![false; coarsest.width() * coarsest.height()];

    for level in (0..levels).rev() {
        let (ls, ld) = (&src_pyr[level], &dst_pyr[level]);
        if flow.width() != ls.width() || flow.height() != ls.height() {
            flow = resample_flow(&flow, ls.width(), ls.height());
        }
        gated = refine_level(ls, ld, &mut flow, cfg);
    }

    // Low-confidence pixels and out-of-grid lookups at the finest level
    // define the validity mask.
    let (w, h) = (flow.width(), flow.height());
    for y in 0..h {
        for x in 0..w {
            let v = flow.get(x, y);
            let lx = x as f64 + v[0] as f64;
            let ly = y as f64 + v[1] as f64;
            let inside = lx >= 0.0 && ly >= 0.0 && lx <= (w - 1) as f64 && ly <= (h - 1) as f64;
            flow.set_valid(x, y, inside && !gated[y * w + x]);
        }
    }
    Ok(flow)
}

/// Estimate the K stepwise flows of a frame chain:
/// `flows[t] = estimate_flow(frames[t], frames[t+1])`. Pairs are
/// independent and run in parallel; errors carry the step index.
pub fn estimate_chain(frames: &[Image], cfg: &EstimatorConfig) -> Result<Vec<FlowField>> {
    if frames.len() < 2 {
        return Err(StepFlowError::TooFewFrames(frames.len()));
    }
    frames
        .par_windows(2)
        .enumerate()
        .map(|(index, pair)| {
            estimate_flow(&pair[0], &pair[1], cfg).map_err(|e| StepFlowError::AtStep {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Summed-area table with a zero row/column prefix, f64 entries.
struct Sat {
    w: usize,
    data: Vec<f64>,
}

impl Sat {
    fn build(values: impl Iterator<Item = f64>, w: usize, h: usize) -> Sat {
        let mut data = vec![0.0f64; (w + 1) * (h + 1)];
        let mut values = values;
        for y in 1..=h {
            let mut row_sum = 0.0;
            for x in 1..=w {
                row_sum += values.next().expect("value count");
                data[y * (w + 1) + x] = data[(y - 1) * (w + 1) + x] + row_sum;
            }
        }
        Sat { w, data }
    }

    /// Inclusive rectangle sum over `[xa, xb] x [ya, yb]`.
    #[inline]
    fn rect(&self, xa: usize, ya: usize, xb: usize, yb: usize) -> f64 {
        let s = self.w + 1;
        self.data[(yb + 1) * s + xb + 1] + self.data[ya * s + xa]
            - self.data[ya * s + xb + 1]
            - self.data[(yb + 1) * s + xa]
    }
}

fn gradients(img: &Image) -> (Vec<f32>, Vec<f32>) {
    let (w, h) = (img.width(), img.height());
    let d = img.data();
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            gx[y * w + x] = 0.5 * (d[y * w + xp] - d[y * w + xm]);
            gy[y * w + x] = 0.5 * (d[yp * w + x] - d[ym * w + x]);
        }
    }
    (gx, gy)
}

/// One pyramid level: precompute the per-pixel structure matrix from source
/// gradients, then run fixed-point iterations updating the flow in place.
/// Returns the low-confidence (gated) mask for this level.
fn refine_level(src: &Image, dst: &Image, flow: &mut FlowField, cfg: &EstimatorConfig) -> Vec<bool> {
    let (w, h) = (src.width(), src.height());
    let r = cfg.window_radius;
    let (gx, gy) = gradients(src);

    let sat_xx = Sat::build(gx.iter().map(|v| (*v as f64) * (*v as f64)), w, h);
    let sat_yy = Sat::build(gy.iter().map(|v| (*v as f64) * (*v as f64)), w, h);
    let sat_xy = Sat::build(gx.iter().zip(&gy).map(|(a, b)| *a as f64 * *b as f64), w, h);

    // Inverse structure matrix (i11, i12, i22) per pixel; NaN marks gated.
    let mut inv = vec![[0.0f64; 3]; w * h];
    let mut gated = vec![false; w * h];
    for y in 0..h {
        let ya = y.saturating_sub(r);
        let yb = (y + r).min(h - 1);
        for x in 0..w {
            let xa = x.saturating_sub(r);
            let xb = (x + r).min(w - 1);
            let a = sat_xx.rect(xa, ya, xb, yb);
            let b = sat_xy.rect(xa, ya, xb, yb);
            let c = sat_yy.rect(xa, ya, xb, yb);
            let n = ((xb - xa + 1) * (yb - ya + 1)) as f64;
            let tr = a + c;
            let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
            let eig_min = 0.5 * (tr - disc);
            if eig_min < cfg.min_eigenvalue * n {
                gated[y * w + x] = true;
                continue;
            }
            let det = a * c - b * b;
            inv[y * w + x] = [c / det, -b / det, a / det];
        }
    }

    let src_d = src.data();
    let dst_d = dst.data();
    let step_cap = r as f64 + 1.0;

    for _ in 0..cfg.iterations {
        let gated_ref = &gated;
        let inv_ref = &inv;
        let gx_ref = &gx;
        let gy_ref = &gy;
        flow.vectors_mut()
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(y, row)| {
                let ya = y.saturating_sub(r);
                let yb = (y + r).min(h - 1);
                for (x, v) in row.iter_mut().enumerate() {
                    let i = y * w + x;
                    if gated_ref[i] {
                        continue;
                    }
                    let (nx, ny) = (v[0] as f64, v[1] as f64);
                    // Window samples share one fractional offset.
                    let bx = nx.floor();
                    let by = ny.floor();
                    let fx = nx - bx;
                    let fy = ny - by;
                    let w00 = (1.0 - fx) * (1.0 - fy);
                    let w10 = fx * (1.0 - fy);
                    let w01 = (1.0 - fx) * fy;
                    let w11 = fx * fy;
                    let (bx, by) = (bx as isize, by as isize);

                    let xa = x.saturating_sub(r);
                    let xb = (x + r).min(w - 1);
                    let mut rhs_x = 0.0f64;
                    let mut rhs_y = 0.0f64;
                    for py in ya..=yb {
                        let sy0 = (py as isize + by).clamp(0, h as isize - 1) as usize;
                        let sy1 = (py as isize + by + 1).clamp(0, h as isize - 1) as usize;
                        for px in xa..=xb {
                            let sx0 = (px as isize + bx).clamp(0, w as isize - 1) as usize;
                            let sx1 = (px as isize + bx + 1).clamp(0, w as isize - 1) as usize;
                            let warped = w00 * dst_d[sy0 * w + sx0] as f64
                                + w10 * dst_d[sy0 * w + sx1] as f64
                                + w01 * dst_d[sy1 * w + sx0] as f64
                                + w11 * dst_d[sy1 * w + sx1] as f64;
                            let it = src_d[py * w + px] as f64 - warped;
                            rhs_x += it * gx_ref[py * w + px] as f64;
                            rhs_y += it * gy_ref[py * w + px] as f64;
                        }
                    }
                    let m = &inv_ref[i];
                    let dx = (m[0] * rhs_x + m[1] * rhs_y).clamp(-step_cap, step_cap);
                    let dy = (m[1] * rhs_x + m[2] * rhs_y).clamp(-step_cap, step_cap);
                    v[0] = (nx + dx) as f32;
                    v[1] = (ny + dy) as f32;
                }
            });
    }
    gated
}
