//! Estimator behavior against analytic ground truth: small translations
//! must be recovered accurately, and chained short-range estimation must
//! beat a single long-range attempt.

use flowcore::{compose_chain, FlowField, Image};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stepflow::{estimate_chain, estimate_flow, EstimatorConfig};
use synthmotion::{
    affine_flow, apply_affine, make_morph_chain, AffineTransform, TextureParams,
};

/// EPE over valid pixels at least `margin` away from the border.
fn interior_epe(flow: &FlowField, gt: &FlowField, margin: usize) -> f64 {
    let (w, h) = (flow.width(), flow.height());
    let mut mask = vec![false; w * h];
    for y in margin..h - margin {
        for x in margin..w - margin {
            mask[y * w + x] = flow.is_valid(x, y) && gt.is_valid(x, y);
        }
    }
    evalmetrics::epe(flow, gt, &mask).unwrap()
}

fn translation(tx: f64, ty: f64, w: usize, h: usize) -> AffineTransform {
    let mut t = AffineTransform::identity((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    t.translate_x = tx;
    t.translate_y = ty;
    t
}

#[test]
fn small_translation_on_radial_gradient_is_recovered() {
    let w = 128;
    // Concentric rings: smooth, with gradient direction varying across
    // every window.
    let img = Image::from_fn(w, w, 1, |x, y, _| {
        let dx = x as f64 - 63.5;
        let dy = y as f64 - 63.5;
        let r = (dx * dx + dy * dy).sqrt();
        (0.5 + 0.35 * (r / 16.0 * std::f64::consts::TAU).cos()) as f32
    });
    let m = translation(2.0, 0.0, w, w).matrix();
    let moved = apply_affine(&img, &m);
    let gt = affine_flow(&m, w, w).unwrap();

    let flow = estimate_flow(&img, &moved, &EstimatorConfig::default()).unwrap();
    let epe = interior_epe(&flow, &gt, 4);
    assert!(epe < 0.3, "interior EPE {epe}");
}

#[test]
fn integer_shifts_up_to_two_px_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let img = synthmotion::synth_texture(128, 128, 1, &TextureParams::default(), &mut rng);
    for (tx, ty) in [(1.0, 0.0), (0.0, -2.0), (2.0, 1.0)] {
        let m = translation(tx, ty, 128, 128).matrix();
        let moved = apply_affine(&img, &m);
        let gt = affine_flow(&m, 128, 128).unwrap();
        let flow = estimate_flow(&img, &moved, &EstimatorConfig::default()).unwrap();
        let epe = interior_epe(&flow, &gt, 4);
        assert!(epe < 0.3, "shift ({tx},{ty}): interior EPE {epe}");
    }
}

#[test]
fn long_range_direct_fails_where_chained_composition_succeeds() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let img = synthmotion::synth_texture(256, 256, 1, &TextureParams::default(), &mut rng);
    let t = translation(30.0, 0.0, 256, 256);
    let gt = affine_flow(&t.matrix(), 256, 256).unwrap();
    let cfg = EstimatorConfig::default();

    let moved = apply_affine(&img, &t.matrix());
    let direct = estimate_flow(&img, &moved, &cfg).unwrap();
    let direct_epe = interior_epe(&direct, &gt, 31);

    let chain = make_morph_chain(&img, &t, 5, None, &mut rng).unwrap();
    let steps = estimate_chain(&chain.frames, &cfg).unwrap();
    let composed = compose_chain(&steps).unwrap();
    let composed_epe = interior_epe(&composed, &gt, 31);

    assert!(
        direct_epe > 5.0,
        "direct estimate unexpectedly good: {direct_epe}"
    );
    assert!(
        composed_epe < 1.0,
        "composed estimate too weak: {composed_epe}"
    );
}

#[test]
fn chain_of_identical_frames_gives_near_zero_flows() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let img = synthmotion::synth_texture(64, 64, 1, &TextureParams::default(), &mut rng);
    let flows = estimate_chain(
        &[img.clone(), img.clone()],
        &EstimatorConfig::default(),
    )
    .unwrap();
    assert_eq!(flows.len(), 1);
    let mean: f64 = flows[0]
        .vectors()
        .iter()
        .map(|v| (v[0] as f64).hypot(v[1] as f64))
        .sum::<f64>()
        / flows[0].vectors().len() as f64;
    assert!(mean < 0.05, "mean |F| = {mean}");
}
