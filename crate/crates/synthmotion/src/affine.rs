use flowcore::{bilinear_sample, FlowField, Image, ValidMaskPolicy};
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::{Result, SynthError};

/// General 2x3 affine map `y = m * x + t` over pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine2 {
    /// Row-major linear part `[[a, b], [c, d]]`.
    pub m: [[f64; 2]; 2],
    /// Translation `(tx, ty)`.
    pub t: [f64; 2],
}

impl Affine2 {
    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0], [0.0, 1.0]],
            t: [0.0, 0.0],
        }
    }

    #[inline]
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * p[0] + self.m[0][1] * p[1] + self.t[0],
            self.m[1][0] * p[0] + self.m[1][1] * p[1] + self.t[1],
        ]
    }

    /// Function composition `self ∘ other`: `other` is applied first.
    pub fn compose(&self, other: &Affine2) -> Affine2 {
        let a = &self.m;
        let b = &other.m;
        Affine2 {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
            t: self.apply(other.t),
        }
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Result<Affine2> {
        let det = self.det();
        if det.abs() < 1e-12 {
            return Err(SynthError::NonInvertible { det });
        }
        let inv = [
            [self.m[1][1] / det, -self.m[0][1] / det],
            [-self.m[1][0] / det, self.m[0][0] / det],
        ];
        Ok(Affine2 {
            m: inv,
            t: [
                -(inv[0][0] * self.t[0] + inv[0][1] * self.t[1]),
                -(inv[1][0] * self.t[0] + inv[1][1] * self.t[1]),
            ],
        })
    }

    /// Largest absolute entry difference over the six coefficients.
    pub fn max_abs_diff(&self, other: &Affine2) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                d = d.max((self.m[r][c] - other.m[r][c]).abs());
            }
            d = d.max((self.t[r] - other.t[r]).abs());
        }
        d
    }
}

/// Rotation-scale-translation perturbation about a center point.
///
/// The map is `M(x) = R(theta) * S(sx, sy) * (x - center) + center + (tx, ty)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    /// Rotation in radians, |theta| < pi/2.
    pub rotation: f64,
    /// Axis scales, each in (0.5, 2).
    pub scale_x: f64,
    pub scale_y: f64,
    /// Translation in pixels.
    pub translate_x: f64,
    pub translate_y: f64,
    /// Decomposition center in pixels.
    pub center_x: f64,
    pub center_y: f64,
}

impl AffineTransform {
    pub fn identity(center_x: f64, center_y: f64) -> Self {
        Self {
            rotation: 0.0,
            scale_x: 1.0,
            scale_y: 1.0,
            translate_x: 0.0,
            translate_y: 0.0,
            center_x,
            center_y,
        }
    }

    /// The composed 2x3 matrix.
    pub fn matrix(&self) -> Affine2 {
        let (s, c) = self.rotation.sin_cos();
        let m = [
            [c * self.scale_x, -s * self.scale_y],
            [s * self.scale_x, c * self.scale_y],
        ];
        // b = center + t - A * center
        let t = [
            self.center_x + self.translate_x - (m[0][0] * self.center_x + m[0][1] * self.center_y),
            self.center_y + self.translate_y - (m[1][0] * self.center_x + m[1][1] * self.center_y),
        ];
        Affine2 { m, t }
    }

    /// Interpolate toward the identity in parameter space: the angle,
    /// log-scales, and translation are each multiplied by `alpha`, keeping
    /// the center fixed. `fractional(0)` is the identity, `fractional(1)`
    /// is the transform itself.
    pub fn fractional(&self, alpha: f64) -> AffineTransform {
        AffineTransform {
            rotation: self.rotation * alpha,
            scale_x: (self.scale_x.ln() * alpha).exp(),
            scale_y: (self.scale_y.ln() * alpha).exp(),
            translate_x: self.translate_x * alpha,
            translate_y: self.translate_y * alpha,
            center_x: self.center_x,
            center_y: self.center_y,
        }
    }
}

/// The transform mapping morph frame `k` to frame `k+1` of a `steps`-step
/// fractional chain, in `apply_affine` semantics:
/// `frame_{k+1} = apply_affine(frame_k, step_transform(m, k, steps))`.
///
/// Folding the steps in chain order reproduces the full matrix, and the
/// analytic step flows `affine_flow(step_transform(..))` compose to the
/// direct flow.
pub fn step_transform(m: &AffineTransform, k: usize, steps: usize) -> Result<Affine2> {
    assert!(k < steps, "step index {k} out of range for {steps} steps");
    let a = m.fractional(k as f64 / steps as f64).matrix();
    let b = m.fractional((k + 1) as f64 / steps as f64).matrix();
    Ok(a.inverse()?.compose(&b))
}

/// Sampling bounds for random perturbations.
///
/// Translation is bounded by a fraction of the image width on both axes.
/// Defaults give roughly 20 px of worst-case displacement at 256x256.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbBounds {
    /// Maximum |rotation| in radians.
    pub max_rotation: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Maximum |translation| as a fraction of image width.
    pub max_translate_frac: f64,
}

impl Default for PerturbBounds {
    fn default() -> Self {
        Self {
            max_rotation: 5.0_f64.to_radians(),
            scale_min: 0.95,
            scale_max: 1.05,
            max_translate_frac: 0.05,
        }
    }
}

impl PerturbBounds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.max_rotation) {
            return Err(SynthError::BadBounds(format!(
                "max_rotation {} outside [0, pi/2)",
                self.max_rotation
            )));
        }
        if !(self.scale_min > 0.5 && self.scale_max < 2.0 && self.scale_min <= self.scale_max) {
            return Err(SynthError::BadBounds(format!(
                "scale range [{}, {}] must sit inside (0.5, 2)",
                self.scale_min, self.scale_max
            )));
        }
        if !(0.0..0.5).contains(&self.max_translate_frac) {
            return Err(SynthError::BadBounds(format!(
                "max_translate_frac {} outside [0, 0.5)",
                self.max_translate_frac
            )));
        }
        Ok(())
    }

    /// Scale every bound by `gain` (used to push suites to larger motions).
    pub fn scaled(&self, gain: f64) -> PerturbBounds {
        PerturbBounds {
            max_rotation: self.max_rotation * gain,
            scale_min: 1.0 - (1.0 - self.scale_min) * gain,
            scale_max: 1.0 + (self.scale_max - 1.0) * gain,
            max_translate_frac: self.max_translate_frac * gain,
        }
    }
}

/// Draw a random transform uniformly within bounds, centered on the image.
/// Deterministic for a fixed rng state.
pub fn sample_affine(
    rng: &mut impl RngExt,
    bounds: &PerturbBounds,
    width: usize,
    height: usize,
) -> Result<AffineTransform> {
    bounds.validate()?;
    let max_t = bounds.max_translate_frac * width as f64;
    Ok(AffineTransform {
        rotation: rng.random_range(-bounds.max_rotation..=bounds.max_rotation),
        scale_x: rng.random_range(bounds.scale_min..=bounds.scale_max),
        scale_y: rng.random_range(bounds.scale_min..=bounds.scale_max),
        translate_x: rng.random_range(-max_t..=max_t),
        translate_y: rng.random_range(-max_t..=max_t),
        center_x: (width as f64 - 1.0) / 2.0,
        center_y: (height as f64 - 1.0) / 2.0,
    })
}

/// Exact ground-truth flow of a perturbation: `F(x) = M^{-1}(x) - x`, so
/// backward-warping the `M`-perturbed image with `F` restores the original.
pub fn affine_flow(m: &Affine2, width: usize, height: usize) -> Result<FlowField> {
    let inv = m.inverse()?;
    Ok(FlowField::from_fn(width, height, |x, y| {
        let p = inv.apply([x as f64, y as f64]);
        [(p[0] - x as f64) as f32, (p[1] - y as f64) as f32]
    }))
}

/// Resample an image through an affine map: `output(x) = img(M(x))` with
/// clamp-to-edge sampling.
pub fn apply_affine(img: &Image, m: &Affine2) -> Image {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = Image::zeros(w, h, ch);
    let mut px = [0.0f32; 3];
    for y in 0..h {
        for x in 0..w {
            let p = m.apply([x as f64, y as f64]);
            bilinear_sample(img, p[0], p[1], ValidMaskPolicy::ClampToEdge, &mut px[..ch]);
            let base = (y * w + x) * ch;
            out.data_mut()[base..base + ch].copy_from_slice(&px[..ch]);
        }
    }
    out
}

/// Largest displacement magnitude of `affine_flow(m)` over the image.
/// The field is affine in the pixel coordinate, so it peaks at a corner.
pub fn max_displacement(m: &Affine2, width: usize, height: usize) -> Result<f64> {
    let inv = m.inverse()?;
    let (wf, hf) = ((width - 1) as f64, (height - 1) as f64);
    let mut best: f64 = 0.0;
    for corner in [[0.0, 0.0], [wf, 0.0], [0.0, hf], [wf, hf]] {
        let p = inv.apply(corner);
        let d = ((p[0] - corner[0]).powi(2) + (p[1] - corner[1]).powi(2)).sqrt();
        best = best.max(d);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_transform_gives_zero_flow() {
        let m = AffineTransform::identity(7.5, 7.5).matrix();
        let f = affine_flow(&m, 16, 16).unwrap();
        assert!(f.vectors().iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
    }

    #[test]
    fn pure_translation_gives_constant_negated_flow() {
        let mut t = AffineTransform::identity(7.5, 7.5);
        t.translate_x = 3.0;
        t.translate_y = -2.0;
        let f = affine_flow(&t.matrix(), 16, 16).unwrap();
        for v in f.vectors() {
            assert!((v[0] + 3.0).abs() < 1e-6);
            assert!((v[1] - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn fractional_endpoints_are_exact() {
        let t = AffineTransform {
            rotation: 0.2,
            scale_x: 1.04,
            scale_y: 0.97,
            translate_x: 5.0,
            translate_y: -3.0,
            center_x: 10.0,
            center_y: 12.0,
        };
        assert_eq!(t.fractional(1.0), t);
        let id = t.fractional(0.0);
        assert_eq!(id.rotation, 0.0);
        assert_eq!(id.scale_x, 1.0);
        assert_eq!(id.scale_y, 1.0);
        assert_eq!(id.translate_x, 0.0);
    }

    #[test]
    fn half_translation_is_linear() {
        let mut t = AffineTransform::identity(0.0, 0.0);
        t.translate_x = 4.0;
        let half = t.fractional(0.5);
        assert!((half.translate_x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn step_transforms_fold_back_to_full_matrix() {
        let t = AffineTransform {
            rotation: 10.0_f64.to_radians(),
            scale_x: 1.05,
            scale_y: 0.96,
            translate_x: 7.0,
            translate_y: -4.0,
            center_x: 127.5,
            center_y: 127.5,
        };
        let k = 5;
        let mut acc = Affine2::identity();
        for step in 0..k {
            acc = acc.compose(&step_transform(&t, step, k).unwrap());
        }
        let diff = acc.max_abs_diff(&t.matrix());
        assert!(diff < 1e-9, "closure diff {diff}");
    }

    #[test]
    fn sampling_is_deterministic_and_in_bounds() {
        let bounds = PerturbBounds::default();
        let a = sample_affine(&mut ChaCha8Rng::seed_from_u64(42), &bounds, 256, 256).unwrap();
        let b = sample_affine(&mut ChaCha8Rng::seed_from_u64(42), &bounds, 256, 256).unwrap();
        assert_eq!(a, b);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let t = sample_affine(&mut rng, &bounds, 256, 256).unwrap();
            assert!(t.rotation.abs() <= bounds.max_rotation);
            assert!(t.scale_x >= bounds.scale_min && t.scale_x <= bounds.scale_max);
            assert!(t.scale_y >= bounds.scale_min && t.scale_y <= bounds.scale_max);
            assert!(t.translate_x.abs() <= 0.05 * 256.0);
            assert!(t.translate_y.abs() <= 0.05 * 256.0);
        }
    }

    #[test]
    fn zero_width_bounds_give_identity() {
        let bounds = PerturbBounds {
            max_rotation: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
            max_translate_frac: 0.0,
        };
        let t = sample_affine(&mut ChaCha8Rng::seed_from_u64(1), &bounds, 64, 64).unwrap();
        assert_eq!(t, AffineTransform::identity(31.5, 31.5));
    }

    #[test]
    fn degenerate_bounds_error() {
        let bounds = PerturbBounds {
            scale_min: 1.2,
            scale_max: 0.9,
            ..PerturbBounds::default()
        };
        assert!(sample_affine(&mut ChaCha8Rng::seed_from_u64(0), &bounds, 64, 64).is_err());
    }

    #[test]
    fn apply_identity_is_exact() {
        let img = Image::from_fn(9, 9, 1, |x, y, _| ((x * 5 + y * 3) % 7) as f32 / 7.0);
        let out = apply_affine(&img, &Affine2::identity());
        assert_eq!(img, out);
    }

    #[test]
    fn apply_unit_translation_shifts_content() {
        let img = Image::from_fn(8, 8, 1, |x, _, _| x as f32 / 8.0);
        let mut t = AffineTransform::identity(3.5, 3.5);
        t.translate_x = 1.0;
        let out = apply_affine(&img, &t.matrix());
        for y in 0..8 {
            for x in 0..7 {
                assert!((out.get(x, y, 0) - img.get(x + 1, y, 0)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        let t = AffineTransform {
            rotation: -0.3,
            scale_x: 1.1,
            scale_y: 0.9,
            translate_x: 2.0,
            translate_y: 5.0,
            center_x: 10.0,
            center_y: 20.0,
        }
        .matrix();
        let round = t.compose(&t.inverse().unwrap());
        assert!(round.max_abs_diff(&Affine2::identity()) < 1e-12);
    }
}
