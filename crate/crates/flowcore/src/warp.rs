use crate::{bilinear_sample, FlowError, FlowField, Image, Result, ValidMaskPolicy};

/// Backward-warp `target` onto the reference grid the flow lives on:
/// `output(x) = target(x + flow(x))`, so with the flow between a reference
/// image and `target` the output is `target` aligned to the reference.
///
/// The returned mask is true where the flow pixel is valid and the lookup
/// stayed inside the target grid.
pub fn warp_image(
    target: &Image,
    flow: &FlowField,
    policy: ValidMaskPolicy,
) -> Result<(Image, Vec<bool>)> {
    if target.width() != flow.width() || target.height() != flow.height() {
        return Err(FlowError::DimensionMismatch(format!(
            "target {}x{} vs flow {}x{}",
            target.width(),
            target.height(),
            flow.width(),
            flow.height()
        )));
    }
    let (w, h, ch) = (target.width(), target.height(), target.channels());
    let mut out = Image::zeros(w, h, ch);
    let mut mask = vec![false; w * h];
    let mut px = [0.0f32; 3];
    for y in 0..h {
        for x in 0..w {
            let v = flow.get(x, y);
            let sx = x as f64 + v[0] as f64;
            let sy = y as f64 + v[1] as f64;
            let in_bounds = bilinear_sample(target, sx, sy, policy, &mut px[..ch]);
            let base = (y * w + x) * ch;
            out.data_mut()[base..base + ch].copy_from_slice(&px[..ch]);
            mask[y * w + x] = in_bounds && flow.is_valid(x, y);
        }
    }
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flow_is_identity() {
        let img = Image::from_fn(12, 9, 3, |x, y, c| ((x * 3 + y * 7 + c) % 13) as f32 / 13.0);
        let flow = FlowField::zeros(12, 9);
        let (out, mask) = warp_image(&img, &flow, ValidMaskPolicy::ClampToEdge).unwrap();
        assert_eq!(out, img);
        assert!(mask.iter().all(|&m| m));
    }

    #[test]
    fn unit_shift_reads_next_column() {
        let w = 8;
        let img = Image::from_fn(w, 4, 1, |x, _, _| x as f32 / w as f32);
        let flow = FlowField::constant(w, 4, 1.0, 0.0);
        let (out, mask) = warp_image(&img, &flow, ValidMaskPolicy::ClampToEdge).unwrap();
        for y in 0..4 {
            for x in 0..w - 1 {
                assert_eq!(out.get(x, y, 0), img.get(x + 1, y, 0));
                assert!(mask[y * w + x]);
            }
            // Rightmost column looks up past the grid.
            assert!(!mask[y * w + w - 1]);
        }
    }

    #[test]
    fn dimension_mismatch_errors() {
        let img = Image::zeros(4, 4, 1);
        let flow = FlowField::zeros(5, 4);
        assert!(warp_image(&img, &flow, ValidMaskPolicy::ClampToEdge).is_err());
    }

    #[test]
    fn invalid_flow_pixels_propagate_to_mask() {
        let img = Image::from_fn(4, 4, 1, |x, y, _| (x + y) as f32 / 8.0);
        let mut flow = FlowField::zeros(4, 4);
        flow.set_valid(2, 2, false);
        let (_, mask) = warp_image(&img, &flow, ValidMaskPolicy::ClampToEdge).unwrap();
        assert!(!mask[2 * 4 + 2]);
        assert!(mask[0]);
    }
}
