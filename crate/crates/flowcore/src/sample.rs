use crate::Image;

/// Border handling for samples that fall outside the pixel grid.
///
/// `ClampToEdge` clamps the coordinate into `[0, W-1] x [0, H-1]` before
/// blending; `MarkInvalid` returns zero content instead. Either way the
/// in-bounds flag reports whether the unclamped point was inside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidMaskPolicy {
    ClampToEdge,
    MarkInvalid,
}

#[inline]
fn blend_setup(coord: f64, extent: usize) -> (usize, usize, f64) {
    let max = (extent - 1) as f64;
    let c = coord.clamp(0.0, max);
    let i0 = (c.floor() as usize).min(extent.saturating_sub(2));
    let i1 = (i0 + 1).min(extent - 1);
    (i0, i1, c - i0 as f64)
}

/// Bilinear sample of all channels at real coordinates `(x, y)`, writing
/// `img.channels()` values into `out`. Returns the in-bounds flag.
///
/// Integer coordinates reproduce stored pixel values exactly.
pub fn bilinear_sample(
    img: &Image,
    x: f64,
    y: f64,
    policy: ValidMaskPolicy,
    out: &mut [f32],
) -> bool {
    debug_assert_eq!(out.len(), img.channels());
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let in_bounds = x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64;
    if !in_bounds && policy == ValidMaskPolicy::MarkInvalid {
        out.fill(0.0);
        return false;
    }
    let (x0, x1, fx) = blend_setup(x, w);
    let (y0, y1, fy) = blend_setup(y, h);
    let w00 = (1.0 - fx) * (1.0 - fy);
    let w10 = fx * (1.0 - fy);
    let w01 = (1.0 - fx) * fy;
    let w11 = fx * fy;
    let data = img.data();
    let r0 = (y0 * w + x0) * ch;
    let r1 = (y0 * w + x1) * ch;
    let r2 = (y1 * w + x0) * ch;
    let r3 = (y1 * w + x1) * ch;
    for c in 0..ch {
        let v = w00 * data[r0 + c] as f64
            + w10 * data[r1 + c] as f64
            + w01 * data[r2 + c] as f64
            + w11 * data[r3 + c] as f64;
        out[c] = v as f32;
    }
    in_bounds
}

/// Single-channel convenience wrapper for grayscale images.
pub fn bilinear_sample_scalar(img: &Image, x: f64, y: f64, policy: ValidMaskPolicy) -> (f32, bool) {
    debug_assert_eq!(img.channels(), 1);
    let mut out = [0.0f32];
    let ok = bilinear_sample(img, x, y, policy, &mut out);
    (out[0], ok)
}

/// Bilinear blend over a raw scalar grid (row-major, no channel interleave).
/// Coordinates are clamped to the grid. Used for flow-component lookups.
#[inline]
pub(crate) fn sample_grid_f32(data: &[f32], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let (x0, x1, fx) = blend_setup(x, w);
    let (y0, y1, fy) = blend_setup(y, h);
    let v00 = data[y0 * w + x0] as f64;
    let v10 = data[y0 * w + x1] as f64;
    let v01 = data[y1 * w + x0] as f64;
    let v11 = data[y1 * w + x1] as f64;
    v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
}

/// Bilinear blend of a boolean mask; `true` only when every neighbor that
/// receives nonzero weight is itself valid.
#[inline]
pub(crate) fn sample_mask(valid: &[bool], w: usize, h: usize, x: f64, y: f64) -> bool {
    let (x0, x1, fx) = blend_setup(x, w);
    let (y0, y1, fy) = blend_setup(y, h);
    let mut acc = 0.0;
    acc += if valid[y0 * w + x0] { (1.0 - fx) * (1.0 - fy) } else { 0.0 };
    acc += if valid[y0 * w + x1] { fx * (1.0 - fy) } else { 0.0 };
    acc += if valid[y1 * w + x0] { (1.0 - fx) * fy } else { 0.0 };
    acc += if valid[y1 * w + x1] { fx * fy } else { 0.0 };
    acc >= 1.0 - 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_coordinate_is_exact() {
        let img = Image::from_fn(8, 8, 1, |x, y, _| ((x * 8 + y) % 11) as f32 / 11.0);
        let mut out = [0.0];
        let ok = bilinear_sample(&img, 3.0, 5.0, ValidMaskPolicy::ClampToEdge, &mut out);
        assert!(ok);
        assert_eq!(out[0], img.get(3, 5, 0));
    }

    #[test]
    fn midpoint_blends_linearly() {
        let mut img = Image::zeros(2, 1, 1);
        img.data_mut()[0] = 0.2;
        img.data_mut()[1] = 0.6;
        let (v, ok) = bilinear_sample_scalar(&img, 0.5, 0.0, ValidMaskPolicy::ClampToEdge);
        assert!(ok);
        assert!((v - 0.4).abs() < 1e-7);
    }

    #[test]
    fn out_of_bounds_clamps_and_flags() {
        let img = Image::from_fn(4, 4, 1, |x, y, _| (x + y) as f32 / 8.0);
        let (v, ok) = bilinear_sample_scalar(&img, -10.0, -10.0, ValidMaskPolicy::ClampToEdge);
        assert!(!ok);
        assert_eq!(v, img.get(0, 0, 0));

        let (v, ok) = bilinear_sample_scalar(&img, -10.0, -10.0, ValidMaskPolicy::MarkInvalid);
        assert!(!ok);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn corner_point_is_in_bounds() {
        let img = Image::from_fn(4, 4, 1, |x, y, _| (x + y) as f32 / 8.0);
        let (v, ok) = bilinear_sample_scalar(&img, 3.0, 3.0, ValidMaskPolicy::ClampToEdge);
        assert!(ok);
        assert_eq!(v, img.get(3, 3, 0));
    }

    #[test]
    fn single_pixel_image() {
        let img = Image::new(1, 1, 1, vec![0.7]).unwrap();
        let (v, ok) = bilinear_sample_scalar(&img, 0.0, 0.0, ValidMaskPolicy::ClampToEdge);
        assert!(ok);
        assert_eq!(v, 0.7);
    }
}
