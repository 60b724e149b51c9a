use flowcore::FlowField;

use crate::real::Real;
use crate::tensor::Tensor;
use crate::{RefinerError, Result};

#[inline]
fn rho(e: f64) -> f64 {
    if e.abs() < 1.0 {
        0.5 * e * e
    } else {
        e.abs() - 0.5
    }
}

#[inline]
fn rho_grad(e: f64) -> f64 {
    if e.abs() < 1.0 {
        e
    } else if e > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Pixel-wise Smooth-L1 between two flow fields, averaged over the valid
/// pixels and both displacement components: `0.5 e^2` for `|e| < 1`,
/// `|e| - 0.5` otherwise.
pub fn smooth_l1(pred: &FlowField, gt: &FlowField, mask: &[bool]) -> Result<f64> {
    if !pred.same_dims(gt) || mask.len() != pred.vectors().len() {
        return Err(RefinerError::BadDimensions(format!(
            "loss over {}x{} vs {}x{} (mask {})",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height(),
            mask.len()
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((p, g), &m) in pred.vectors().iter().zip(gt.vectors()).zip(mask) {
        if m {
            sum += rho(p[0] as f64 - g[0] as f64) + rho(p[1] as f64 - g[1] as f64);
            n += 1;
        }
    }
    if n == 0 {
        return Err(RefinerError::EmptyMask);
    }
    Ok(sum / (2 * n) as f64)
}

/// Tensor form used in training: returns the loss and its gradient with
/// respect to the predicted (refined) flow, zero at masked-out pixels.
pub fn smooth_l1_tensor<T: Real>(
    pred: &Tensor<T>,
    gt: &Tensor<T>,
    mask: &[bool],
) -> Result<(f64, Tensor<T>)> {
    debug_assert_eq!(pred.c, 2);
    if (pred.c, pred.h, pred.w) != (gt.c, gt.h, gt.w) || mask.len() != pred.plane() {
        return Err(RefinerError::BadDimensions(
            "loss tensor shapes disagree".into(),
        ));
    }
    let n_valid = mask.iter().filter(|m| **m).count();
    if n_valid == 0 {
        return Err(RefinerError::EmptyMask);
    }
    let norm = 1.0 / (2 * n_valid) as f64;
    let mut sum = 0.0;
    let mut grad = Tensor::zeros(pred.c, pred.h, pred.w);
    for c in 0..2 {
        let pc = pred.channel(c);
        let gc = gt.channel(c);
        let dc = grad.channel_mut(c);
        for i in 0..mask.len() {
            if mask[i] {
                let e = pc[i].to_f64() - gc[i].to_f64();
                sum += rho(e);
                dc[i] = T::from_f64(rho_grad(e) * norm);
            }
        }
    }
    Ok((sum * norm, grad))
}
