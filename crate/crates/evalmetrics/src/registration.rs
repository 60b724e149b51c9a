use flowcore::{FlowField, Image};

use crate::{MetricsError, Result};

/// Mean end-point error in pixels over masked pixels:
/// `mean ||F(x) - F*(x)||_2`.
pub fn epe(flow: &FlowField, reference: &FlowField, mask: &[bool]) -> Result<f64> {
    if !flow.same_dims(reference) {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            flow.width(),
            flow.height(),
            reference.width(),
            reference.height()
        )));
    }
    if mask.len() != flow.vectors().len() {
        return Err(MetricsError::DimensionMismatch(format!(
            "mask length {} vs {} pixels",
            mask.len(),
            flow.vectors().len()
        )));
    }
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for ((a, b), &m) in flow.vectors().iter().zip(reference.vectors()).zip(mask) {
        if m {
            let dx = a[0] as f64 - b[0] as f64;
            let dy = a[1] as f64 - b[1] as f64;
            sum += (dx * dx + dy * dy).sqrt();
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(sum / n as f64)
}

/// Enhanced correlation distance between two images: `1 - cos(theta)` of the
/// zero-mean flattened intensities, in `[0, 2]`. Color inputs are reduced to
/// luma first, making the score invariant to positive affine intensity maps.
pub fn ecc(a: &Image, b: &Image, mask: Option<&[bool]>) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let la = a.to_luma();
    let lb = b.to_luma();
    let n_px = la.data().len();
    if let Some(m) = mask {
        if m.len() != n_px {
            return Err(MetricsError::DimensionMismatch(format!(
                "mask length {} vs {} pixels",
                m.len(),
                n_px
            )));
        }
    }

    let selected = |i: usize| mask.is_none_or(|m| m[i]);
    let count = (0..n_px).filter(|&i| selected(i)).count();
    if count == 0 {
        return Err(MetricsError::EmptyMask);
    }
    let mean = |img: &Image| -> f64 {
        let mut s = 0.0;
        for (i, &v) in img.data().iter().enumerate() {
            if selected(i) {
                s += v as f64;
            }
        }
        s / count as f64
    };
    let ma = mean(&la);
    let mb = mean(&lb);

    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for i in 0..n_px {
        if selected(i) {
            let u = la.data()[i] as f64 - ma;
            let v = lb.data()[i] as f64 - mb;
            dot += u * v;
            na += u * u;
            nb += v * v;
        }
    }
    if na < 1e-24 || nb < 1e-24 {
        return Err(MetricsError::ZeroVariance);
    }
    let cos = (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epe_of_identical_fields_is_zero() {
        let f = FlowField::from_fn(8, 8, |x, y| [x as f32, y as f32]);
        let mask = vec![true; 64];
        assert_eq!(epe(&f, &f, &mask).unwrap(), 0.0);
    }

    #[test]
    fn epe_of_three_four_error_is_five() {
        let a = FlowField::constant(10, 10, 3.0, 4.0);
        let b = FlowField::zeros(10, 10);
        let mask = vec![true; 100];
        assert!((epe(&a, &b, &mask).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn epe_is_symmetric_and_needs_pixels() {
        let a = FlowField::constant(4, 4, 1.0, 2.0);
        let b = FlowField::constant(4, 4, -1.0, 0.5);
        let mask = vec![true; 16];
        assert_eq!(epe(&a, &b, &mask).unwrap(), epe(&b, &a, &mask).unwrap());
        assert!(matches!(
            epe(&a, &b, &[false; 16]),
            Err(MetricsError::EmptyMask)
        ));
    }

    #[test]
    fn ecc_identical_is_zero_and_negation_is_two() {
        let img = Image::from_fn(8, 8, 1, |x, y, _| ((x * 7 + y * 3) % 11) as f32 / 11.0);
        assert!(ecc(&img, &img, None).unwrap().abs() < 1e-12);

        // Reflect about the mean: zero-mean negation.
        let mean: f32 = img.data().iter().sum::<f32>() / 64.0;
        let neg = Image::from_fn(8, 8, 1, |x, y, _| 2.0 * mean - img.get(x, y, 0));
        let d = ecc(&img, &neg, None).unwrap();
        assert!((d - 2.0).abs() < 1e-6, "got {d}");
    }

    #[test]
    fn ecc_is_invariant_to_positive_affine_intensity() {
        let img = Image::from_fn(12, 12, 1, |x, y, _| ((x * 5 + y) % 13) as f32 / 13.0);
        let scaled = Image::from_fn(12, 12, 1, |x, y, _| 0.4 * img.get(x, y, 0) + 0.3);
        let d = ecc(&img, &scaled, None).unwrap();
        assert!(d.abs() < 1e-7, "got {d}");
    }

    #[test]
    fn ecc_rejects_constant_images() {
        let a = Image::from_fn(4, 4, 1, |_, _, _| 0.5);
        let b = Image::from_fn(4, 4, 1, |x, _, _| x as f32 / 4.0);
        assert!(matches!(ecc(&a, &b, None), Err(MetricsError::ZeroVariance)));
    }
}
