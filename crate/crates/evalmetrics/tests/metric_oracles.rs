//! Brute-force oracle checks: every fast metric implementation must agree
//! with a naive per-definition evaluation on random inputs.

use evalmetrics::{cd_scores, confusion, ssim_with, ChangeMask, ConfusionMatrix, SsimParams};
use flowcore::{FlowField, Image};
use proptest::prelude::*;

fn lcg(state: &mut u64) -> f64 {
    // Deterministic light-weight generator for fixture data.
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    ((*state >> 11) as f64) / ((1u64 << 53) as f64)
}

fn random_image(w: usize, h: usize, seed: u64) -> Image {
    let mut s = seed.wrapping_add(0x1234_5678);
    Image::from_fn(w, h, 1, |_, _, _| lcg(&mut s) as f32)
}

fn random_flow(w: usize, h: usize, seed: u64) -> FlowField {
    let mut s = seed.wrapping_add(0xABCD);
    FlowField::from_fn(w, h, |_, _| {
        [
            (lcg(&mut s) * 10.0 - 5.0) as f32,
            (lcg(&mut s) * 10.0 - 5.0) as f32,
        ]
    })
}

#[test]
fn epe_matches_naive_double_loop() {
    for seed in 0..5u64 {
        let a = random_flow(8, 8, seed);
        let b = random_flow(8, 8, seed + 100);
        let mask = vec![true; 64];
        let fast = evalmetrics::epe(&a, &b, &mask).unwrap();

        let mut sum = 0.0f64;
        for y in 0..8 {
            for x in 0..8 {
                let va = a.get(x, y);
                let vb = b.get(x, y);
                let dx = va[0] as f64 - vb[0] as f64;
                let dy = va[1] as f64 - vb[1] as f64;
                sum += (dx * dx + dy * dy).sqrt();
            }
        }
        let naive = sum / 64.0;
        assert!((fast - naive).abs() < 1e-12, "seed {seed}: {fast} vs {naive}");
    }
}

#[test]
fn psnr_matches_naive_double_loop() {
    for seed in 0..5u64 {
        let a = random_image(16, 12, seed);
        let b = random_image(16, 12, seed + 77);
        let fast = evalmetrics::psnr(&a, &b, 1.0).unwrap();

        let mut mse = 0.0f64;
        for y in 0..12 {
            for x in 0..16 {
                let d = a.get(x, y, 0) as f64 - b.get(x, y, 0) as f64;
                mse += d * d;
            }
        }
        mse /= (16 * 12) as f64;
        let naive = 10.0 * (1.0 / mse).log10();
        assert!((fast - naive).abs() < 1e-9, "seed {seed}: {fast} vs {naive}");
    }
}

/// Direct per-definition SSIM: for every pixel, gather the full 2D Gaussian
/// window with symmetric mirroring and compute weighted statistics from
/// centered samples. Independent of the separable filtering in the library.
fn ssim_sliding_window_oracle(a: &Image, b: &Image, params: &SsimParams) -> f64 {
    let (w, h) = (a.width(), a.height());
    let r = (params.window / 2) as isize;
    let sigma = params.sigma;
    let mut weights = Vec::new();
    let mut wsum = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let g = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            weights.push(g);
            wsum += g;
        }
    }
    weights.iter_mut().for_each(|v| *v /= wsum);

    let mirror = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        loop {
            if i < 0 {
                i = -1 - i;
            } else if i >= n {
                i = 2 * n - 1 - i;
            } else {
                return i as usize;
            }
        }
    };

    let c1 = (params.k1 * params.peak).powi(2);
    let c2 = (params.k2 * params.peak).powi(2);
    let mut total = 0.0;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let px = a.get(mirror(x + dx, w), mirror(y + dy, h), 0) as f64;
                    let py = b.get(mirror(x + dx, w), mirror(y + dy, h), 0) as f64;
                    mu_a += weights[k] * px;
                    mu_b += weights[k] * py;
                    k += 1;
                }
            }
            let mut var_a = 0.0;
            let mut var_b = 0.0;
            let mut cov = 0.0;
            k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let px = a.get(mirror(x + dx, w), mirror(y + dy, h), 0) as f64 - mu_a;
                    let py = b.get(mirror(x + dx, w), mirror(y + dy, h), 0) as f64 - mu_b;
                    var_a += weights[k] * px * px;
                    var_b += weights[k] * py * py;
                    cov += weights[k] * px * py;
                    k += 1;
                }
            }
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
    }
    total / (w * h) as f64
}

#[test]
fn ssim_matches_sliding_window_oracle() {
    let params = SsimParams::default();
    for seed in 0..3u64 {
        let a = random_image(32, 32, seed);
        let b = random_image(32, 32, seed + 31);
        let fast = ssim_with(&a, &b, &params).unwrap();
        let oracle = ssim_sliding_window_oracle(&a, &b, &params);
        assert!(
            (fast - oracle).abs() < 1e-6,
            "seed {seed}: {fast} vs {oracle}"
        );
    }
}

fn brute_force_cd(pred: &[u8], gt: &[u8]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for (&p, &g) in pred.iter().zip(gt) {
        if p == 1 && g == 1 {
            cm.tp += 1;
        } else if p == 1 {
            cm.fp += 1;
        } else if g == 1 {
            cm.fn_ += 1;
        } else {
            cm.tn += 1;
        }
    }
    cm
}

#[test]
fn cd_scores_match_brute_force_on_all_single_mask_patterns() {
    // Exhaustive sweep over all 2^16 predicted 4x4 masks against a few
    // fixed ground truths.
    let gts: [[u8; 16]; 4] = [
        [0; 16],
        [1; 16],
        [1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1],
        [1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0],
    ];
    for gt_bits in gts {
        let gt = ChangeMask::new(4, 4, gt_bits.to_vec()).unwrap();
        for pattern in 0u32..(1 << 16) {
            let bits: Vec<u8> = (0..16).map(|i| ((pattern >> i) & 1) as u8).collect();
            let pred = ChangeMask::new(4, 4, bits.clone()).unwrap();
            let cm = confusion(&pred, &gt).unwrap();
            assert_eq!(cm, brute_force_cd(&bits, &gt_bits));
            let s = cd_scores(&cm);
            // Spot-check one score against its definition.
            if 2 * cm.tp + cm.fp + cm.fn_ > 0 {
                let f1 = 2.0 * cm.tp as f64 / (2 * cm.tp + cm.fp + cm.fn_) as f64;
                assert_eq!(s.f1_change, f1);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn cd_scores_match_brute_force_on_random_pairs(pred_bits in 0u32..(1 << 16), gt_bits in 0u32..(1 << 16)) {
        let pred: Vec<u8> = (0..16).map(|i| ((pred_bits >> i) & 1) as u8).collect();
        let gt: Vec<u8> = (0..16).map(|i| ((gt_bits >> i) & 1) as u8).collect();
        let cm = confusion(
            &ChangeMask::new(4, 4, pred.clone()).unwrap(),
            &ChangeMask::new(4, 4, gt.clone()).unwrap(),
        ).unwrap();
        prop_assert_eq!(cm, brute_force_cd(&pred, &gt));
        prop_assert_eq!(cm.total(), 16);
        let s = cd_scores(&cm);
        prop_assert!(s.oa >= 0.0 && s.oa <= 1.0);
        prop_assert!(s.mf1 >= 0.0 && s.mf1 <= 1.0);
    }

    #[test]
    fn epe_symmetry_property(seed in 0u64..500) {
        let a = random_flow(6, 6, seed);
        let b = random_flow(6, 6, seed + 1);
        let mask = vec![true; 36];
        let ab = evalmetrics::epe(&a, &b, &mask).unwrap();
        let ba = evalmetrics::epe(&b, &a, &mask).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(evalmetrics::epe(&a, &a, &mask).unwrap(), 0.0);
    }

    #[test]
    fn ecc_stays_in_range(seed in 0u64..200) {
        let a = random_image(10, 10, seed);
        let b = random_image(10, 10, seed + 999);
        let d = evalmetrics::ecc(&a, &b, None).unwrap();
        prop_assert!((0.0..=2.0).contains(&d));
    }
}
