use flowcore::{FlowField, Image};
use rand::RngExt;

use crate::affine::{affine_flow, apply_affine, step_transform, AffineTransform};
use crate::slerp::slerp;
use crate::{Result, SynthError};

/// Smooth brightness perturbation blended along the chain, standing in for
/// appearance drift between morph frames. Two coarse random fields are
/// spherically interpolated at each fraction and faded in with a
/// `sin(pi * alpha)` envelope so the chain endpoints stay untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppearanceRamp {
    /// Peak absolute brightness offset.
    pub amplitude: f64,
    /// Coarse grid size per axis.
    pub cells: usize,
}

impl Default for AppearanceRamp {
    fn default() -> Self {
        Self {
            amplitude: 0.03,
            cells: 4,
        }
    }
}

/// A geometric morph chain: K+1 frames, K analytic stepwise flows, and the
/// analytic direct flow from frame 0 to frame K.
#[derive(Debug, Clone)]
pub struct MorphChain {
    pub frames: Vec<Image>,
    pub step_flows: Vec<FlowField>,
    pub direct_flow: FlowField,
}

fn coarse_field(rng: &mut impl RngExt, cells: usize, amplitude: f64) -> Vec<f64> {
    (0..cells * cells)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect()
}

fn upsample_scalar(grid: &[f64], cells: usize, width: usize, height: usize) -> Vec<f64> {
    let n = cells;
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let v = ((y as f64 + 0.5) * n as f64 / height as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let y0 = (v.floor() as usize).min(n.saturating_sub(2));
        let fy = v - y0 as f64;
        for x in 0..width {
            let u = ((x as f64 + 0.5) * n as f64 / width as f64 - 0.5).clamp(0.0, (n - 1) as f64);
            let x0 = (u.floor() as usize).min(n.saturating_sub(2));
            let fx = u - x0 as f64;
            out.push(
                grid[y0 * n + x0] * (1.0 - fx) * (1.0 - fy)
                    + grid[y0 * n + x0 + 1] * fx * (1.0 - fy)
                    + grid[(y0 + 1) * n + x0] * (1.0 - fx) * fy
                    + grid[(y0 + 1) * n + x0 + 1] * fx * fy,
            );
        }
    }
    out
}

/// Build a K-step fractional-affine morph chain from a base image.
///
/// Frame `t` is the base resampled through the fractional transform at
/// `t/K`; stepwise flows are analytic, and composing them reconstructs the
/// direct flow up to interpolation error.
pub fn make_morph_chain(
    base: &Image,
    m: &AffineTransform,
    k: usize,
    appearance: Option<&AppearanceRamp>,
    rng: &mut impl RngExt,
) -> Result<MorphChain> {
    if k == 0 {
        return Err(SynthError::EmptyChain);
    }
    let (w, h) = (base.width(), base.height());

    let ramp = appearance
        .map(|r| {
            if r.cells < 2 {
                return Err(SynthError::BadBounds("appearance cells must be >= 2".into()));
            }
            let a0 = coarse_field(rng, r.cells, r.amplitude);
            let a1 = coarse_field(rng, r.cells, r.amplitude);
            Ok((r.cells, a0, a1))
        })
        .transpose()?;

    let mut frames = Vec::with_capacity(k + 1);
    for t in 0..=k {
        let alpha = t as f64 / k as f64;
        let mut frame = if t == 0 {
            base.clone()
        } else {
            apply_affine(base, &m.fractional(alpha).matrix())
        };
        if let Some((cells, a0, a1)) = &ramp {
            let envelope = (std::f64::consts::PI * alpha).sin();
            if envelope > 0.0 {
                let blended = slerp(a0, a1, alpha)?;
                let field = upsample_scalar(&blended, *cells, w, h);
                let ch = frame.channels();
                let data = frame.data_mut();
                for (i, offset) in field.iter().enumerate() {
                    let d = (envelope * offset) as f32;
                    for c in 0..ch {
                        let v = &mut data[i * ch + c];
                        *v = (*v + d).clamp(0.0, 1.0);
                    }
                }
            }
        }
        frames.push(frame);
    }

    let step_flows = (0..k)
        .map(|t| affine_flow(&step_transform(m, t, k)?, w, h))
        .collect::<Result<Vec<_>>>()?;
    let direct_flow = affine_flow(&m.matrix(), w, h)?;

    Ok(MorphChain {
        frames,
        step_flows,
        direct_flow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowcore::compose_chain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn epe(a: &FlowField, b: &FlowField) -> f64 {
        let mut sum = 0.0;
        let mut n = 0;
        for (i, (va, vb)) in a.vectors().iter().zip(b.vectors()).enumerate() {
            if a.valid_mask()[i] && b.valid_mask()[i] {
                sum += ((va[0] - vb[0]) as f64).hypot((va[1] - vb[1]) as f64);
                n += 1;
            }
        }
        sum / n as f64
    }

    #[test]
    fn zero_steps_is_an_error() {
        let base = Image::zeros(8, 8, 1);
        let m = AffineTransform::identity(3.5, 3.5);
        assert!(matches!(
            make_morph_chain(&base, &m, 0, None, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(SynthError::EmptyChain)
        ));
    }

    #[test]
    fn single_step_chain_degenerates_to_direct_pair() {
        let base = crate::texture::synth_texture(
            32,
            32,
            1,
            &crate::TextureParams::default(),
            &mut ChaCha8Rng::seed_from_u64(2),
        );
        let mut m = AffineTransform::identity(15.5, 15.5);
        m.translate_x = 2.0;
        let chain = make_morph_chain(&base, &m, 1, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(chain.frames.len(), 2);
        assert_eq!(chain.step_flows.len(), 1);
        assert_eq!(chain.step_flows[0].vectors(), chain.direct_flow.vectors());
    }

    #[test]
    fn identity_transform_gives_identical_frames_and_zero_flows() {
        let base = crate::texture::synth_texture(
            24,
            24,
            1,
            &crate::TextureParams::default(),
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        let m = AffineTransform::identity(11.5, 11.5);
        let chain = make_morph_chain(&base, &m, 5, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for frame in &chain.frames {
            assert_eq!(frame, &base);
        }
        for f in &chain.step_flows {
            assert!(f.vectors().iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
        }
    }

    #[test]
    fn composed_step_flows_match_direct_flow() {
        let m = AffineTransform {
            rotation: 4.0_f64.to_radians(),
            scale_x: 1.03,
            scale_y: 0.97,
            translate_x: 9.0,
            translate_y: -6.0,
            center_x: 127.5,
            center_y: 127.5,
        };
        let base = Image::zeros(256, 256, 1);
        let chain = make_morph_chain(&base, &m, 5, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let composed = compose_chain(&chain.step_flows).unwrap();
        let err = epe(&composed, &chain.direct_flow);
        assert!(err < 0.05, "chain composition EPE {err}");
    }

    #[test]
    fn appearance_ramp_keeps_endpoints_clean() {
        let base = crate::texture::synth_texture(
            32,
            32,
            3,
            &crate::TextureParams::default(),
            &mut ChaCha8Rng::seed_from_u64(6),
        );
        let mut m = AffineTransform::identity(15.5, 15.5);
        m.translate_x = 1.0;
        let ramp = AppearanceRamp::default();
        let chain =
            make_morph_chain(&base, &m, 4, Some(&ramp), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(chain.frames[0], base);
        // A middle frame differs from the pure geometric resample.
        let clean = apply_affine(&base, &m.fractional(0.5).matrix());
        assert_ne!(chain.frames[2], clean);
    }
}
