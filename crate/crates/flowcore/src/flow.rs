use crate::sample::{sample_grid_f32, sample_mask};
use crate::{FlowError, Result};

/// Dense per-pixel displacement field with a validity mask.
///
/// `vectors[y * width + x]` is the `(dx, dy)` lookup displacement, in pixels,
/// defined on the reference grid. A pixel whose value is unknown (gated
/// estimator, composed lookup that left the grid) is marked invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f32; 2]>,
    valid: Vec<bool>,
}

impl FlowField {
    /// Zero flow, all pixels valid.
    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "flow field must be non-empty");
        Self {
            width,
            height,
            vectors: vec![[0.0, 0.0]; width * height],
            valid: vec![true; width * height],
        }
    }

    /// Constant flow, all pixels valid.
    pub fn constant(width: usize, height: usize, dx: f32, dy: f32) -> Self {
        let mut f = Self::zeros(width, height);
        f.vectors.fill([dx, dy]);
        f
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        vectors: Vec<[f32; 2]>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FlowError::DimensionMismatch("empty flow field".into()));
        }
        if vectors.len() != width * height || valid.len() != width * height {
            return Err(FlowError::DimensionMismatch(format!(
                "flow storage {} / mask {} does not match {}x{}",
                vectors.len(),
                valid.len(),
                width,
                height
            )));
        }
        if let Some(i) = vectors
            .iter()
            .position(|v| !v[0].is_finite() || !v[1].is_finite())
        {
            return Err(FlowError::NonFinite { path: None, index: i });
        }
        Ok(Self {
            width,
            height,
            vectors,
            valid,
        })
    }

    /// Fill from a generator called per `(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 2]) -> Self {
        let mut out = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                out.vectors[y * width + x] = f(x, y);
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.vectors[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: [f32; 2]) {
        self.vectors[y * self.width + x] = v;
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    #[inline]
    pub fn set_valid(&mut self, x: usize, y: usize, v: bool) {
        self.valid[y * self.width + x] = v;
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [[f32; 2]] {
        &mut self.vectors
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_mask_mut(&mut self) -> &mut [bool] {
        &mut self.valid
    }

    /// Fraction of pixels marked valid.
    pub fn valid_fraction(&self) -> f64 {
        let n = self.valid.iter().filter(|v| **v).count();
        n as f64 / self.valid.len() as f64
    }

    pub fn same_dims(&self, other: &FlowField) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Axis-aligned crop; displacements are unchanged (they stay in pixel units).
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<FlowField> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(FlowError::DimensionMismatch(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut vectors = Vec::with_capacity(width * height);
        let mut valid = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            vectors.extend_from_slice(&self.vectors[y * self.width + x0..][..width]);
            valid.extend_from_slice(&self.valid[y * self.width + x0..][..width]);
        }
        FlowField::from_parts(width, height, vectors, valid)
    }
}

/// Bilinearly resample a flow field onto a new grid, rescaling displacement
/// magnitudes by `(new_width / width, new_height / height)` so the result
/// stays in pixel units at its own resolution.
pub fn resample_flow(flow: &FlowField, new_width: usize, new_height: usize) -> FlowField {
    assert!(new_width > 0 && new_height > 0, "target dims must be >= 1");
    let (w, h) = (flow.width(), flow.height());
    if new_width == w && new_height == h {
        return flow.clone();
    }
    let sx = w as f64 / new_width as f64;
    let sy = h as f64 / new_height as f64;
    let gain_x = new_width as f64 / w as f64;
    let gain_y = new_height as f64 / h as f64;

    // Split components into planar grids once; sampling is then contiguous.
    let dx: Vec<f32> = flow.vectors.iter().map(|v| v[0]).collect();
    let dy: Vec<f32> = flow.vectors.iter().map(|v| v[1]).collect();

    let mut out = FlowField::zeros(new_width, new_height);
    for oy in 0..new_height {
        let src_y = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        for ox in 0..new_width {
            let src_x = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let vx = sample_grid_f32(&dx, w, h, src_x, src_y) * gain_x;
            let vy = sample_grid_f32(&dy, w, h, src_x, src_y) * gain_y;
            out.vectors[oy * new_width + ox] = [vx as f32, vy as f32];
            out.valid[oy * new_width + ox] = sample_mask(&flow.valid, w, h, src_x, src_y);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_resample_is_exact() {
        let f = FlowField::from_fn(9, 7, |x, y| [x as f32 * 0.3, y as f32 - 2.0]);
        let r = resample_flow(&f, 9, 7);
        assert_eq!(f, r);
    }

    #[test]
    fn constant_field_rescales_magnitudes() {
        let f = FlowField::constant(16, 16, 4.0, 0.0);
        let r = resample_flow(&f, 8, 8);
        for v in r.vectors() {
            assert!((v[0] - 2.0).abs() < 1e-6);
            assert!(v[1].abs() < 1e-6);
        }
        assert!((1.0 - r.valid_fraction()).abs() < 1e-12);
    }

    #[test]
    fn invalid_pixels_survive_resampling() {
        let mut f = FlowField::constant(8, 8, 1.0, 1.0);
        f.set_valid(3, 3, false);
        let r = resample_flow(&f, 16, 16);
        assert!(!r.is_valid(7, 7));
        assert!(r.is_valid(0, 0));
    }

    #[test]
    fn crop_preserves_vectors() {
        let f = FlowField::from_fn(6, 6, |x, y| [x as f32, y as f32]);
        let c = f.crop(2, 1, 3, 4).unwrap();
        assert_eq!(c.get(0, 0), [2.0, 1.0]);
        assert_eq!(c.get(2, 3), [4.0, 4.0]);
    }
}
