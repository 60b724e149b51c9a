use flowcore::{compose_chain, compose_flows, resample_flow, FlowField};
use proptest::prelude::*;

/// Mean end-point error between two fields over their common valid pixels.
fn mean_epe(a: &FlowField, b: &FlowField) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if !a.is_valid(x, y) || !b.is_valid(x, y) {
                continue;
            }
            let va = a.get(x, y);
            let vb = b.get(x, y);
            let dx = (va[0] - vb[0]) as f64;
            let dy = (va[1] - vb[1]) as f64;
            sum += (dx * dx + dy * dy).sqrt();
            n += 1;
        }
    }
    assert!(n > 0, "no common valid pixels");
    sum / n as f64
}

/// Smooth low-frequency analytic field with sub-pixel magnitudes.
fn smooth_field(w: usize, h: usize, ax: f64, ay: f64, phase: f64) -> FlowField {
    FlowField::from_fn(w, h, |x, y| {
        let u = x as f64 / w as f64;
        let v = y as f64 / h as f64;
        [
            (ax * (2.0 * std::f64::consts::PI * (u + 0.5 * v) + phase).sin()) as f32,
            (ay * (2.0 * std::f64::consts::PI * (v - 0.3 * u) - phase).cos()) as f32,
        ]
    })
}

#[test]
fn composition_is_associative_up_to_interpolation() {
    // Smooth analytic flows at 256x256; both associations must agree to
    // well under a twentieth of a pixel.
    let f = smooth_field(256, 256, 1.5, 1.0, 0.3);
    let g = smooth_field(256, 256, 1.2, 0.8, 1.1);
    let h = smooth_field(256, 256, 0.9, 1.4, 2.0);

    let left = compose_flows(&compose_flows(&f, &g).unwrap(), &h).unwrap();
    let right = compose_flows(&f, &compose_flows(&g, &h).unwrap()).unwrap();
    let epe = mean_epe(&left, &right);
    assert!(epe < 0.05, "associativity EPE {epe}");
}

#[test]
fn chain_fold_matches_pairwise_composition() {
    let flows: Vec<FlowField> = (0..4)
        .map(|i| smooth_field(64, 48, 0.8, 0.6, i as f64))
        .collect();
    let folded = compose_chain(&flows).unwrap();
    let mut manual = flows[0].clone();
    for f in &flows[1..] {
        manual = compose_flows(&manual, f).unwrap();
    }
    assert_eq!(folded, manual);
}

#[test]
fn smooth_field_survives_down_up_resampling() {
    // The original field is the oracle: a 2x round trip must stay within
    // 0.2 px mean EPE for smooth content.
    let f = smooth_field(128, 96, 3.0, 2.0, 0.7);
    let down = resample_flow(&f, 64, 48);
    let up = resample_flow(&down, 128, 96);
    let epe = mean_epe(&f, &up);
    assert!(epe < 0.2, "down/up EPE {epe}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compose_with_zero_is_identity(
        seed in 0u64..1000,
        w in 4usize..24,
        h in 4usize..24,
    ) {
        // Pseudo-random but bounded field; magnitudes stay under 1 px so
        // lookups remain mostly in bounds.
        let f = FlowField::from_fn(w, h, |x, y| {
            let k = seed.wrapping_mul(0x9E3779B97F4A7C15)
                .wrapping_add((y * w + x) as u64);
            let a = ((k >> 11) % 2000) as f32 / 1000.0 - 1.0;
            let b = ((k >> 31) % 2000) as f32 / 1000.0 - 1.0;
            [a * 0.9, b * 0.9]
        });
        let zero = FlowField::zeros(w, h);

        let right = compose_flows(&f, &zero).unwrap();
        for y in 0..h {
            for x in 0..w {
                if right.is_valid(x, y) {
                    prop_assert_eq!(right.get(x, y), f.get(x, y));
                }
            }
        }

        let left = compose_flows(&zero, &f).unwrap();
        prop_assert_eq!(left.vectors(), f.vectors());
    }

    #[test]
    fn constant_composition_is_vector_addition(
        ax in -3.0f32..3.0, ay in -3.0f32..3.0,
        bx in -3.0f32..3.0, by in -3.0f32..3.0,
    ) {
        let a = FlowField::constant(32, 32, ax, ay);
        let b = FlowField::constant(32, 32, bx, by);
        let c = compose_flows(&a, &b).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                if c.is_valid(x, y) {
                    let v = c.get(x, y);
                    prop_assert!((v[0] - (ax + bx)).abs() < 1e-5);
                    prop_assert!((v[1] - (ay + by)).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn flo_round_trip_reproduces_vectors(
        seed in 0u64..10_000,
        w in 1usize..12,
        h in 1usize..12,
    ) {
        let f = FlowField::from_fn(w, h, |x, y| {
            let k = seed.wrapping_mul(0xD1B54A32D192ED03)
                .wrapping_add((y * w + x) as u64 * 0x9E3779B9);
            [f32::from_bits(0x3F000000 | (k as u32 & 0x007FFFFF)) * 8.0 - 5.0,
             f32::from_bits(0x3F000000 | ((k >> 23) as u32 & 0x007FFFFF)) * 8.0 - 5.0]
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.flo");
        flowcore::write_flo(&f, &path).unwrap();
        let back = flowcore::read_flo(&path).unwrap();
        prop_assert_eq!(f.vectors(), back.vectors());
    }
}
