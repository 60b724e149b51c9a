use flowcore::Image;

use crate::{MetricsError, Result};

/// Peak signal-to-noise ratio in dB: `10 * log10(peak^2 / MSE)` over all
/// pixels and channels. Identical images yield `f64::INFINITY`; use
/// [`psnr_display`] to cap the sentinel for text reports.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let mut mse = 0.0f64;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = *x as f64 - *y as f64;
        mse += d * d;
    }
    mse /= a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Cap the infinite-PSNR sentinel at 99 dB for human-readable output.
pub fn psnr_display(v: f64) -> f64 {
    v.min(99.0)
}

/// Structural-similarity parameters; defaults are the canonical 11x11
/// Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03 at unit peak.
#[derive(Debug, Clone, Copy)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            peak: 1.0,
        }
    }
}

/// Mean SSIM with default parameters. Color images score as the mean of
/// per-channel SSIM; boundaries are handled symmetrically (mirrored with
/// the edge sample included).
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ssim_with(a, b, &SsimParams::default())
}

pub fn ssim_with(a: &Image, b: &Image, params: &SsimParams) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if a.width() < params.window || a.height() < params.window {
        return Err(MetricsError::WindowTooLarge {
            got_w: a.width(),
            got_h: a.height(),
            window: params.window,
        });
    }
    let mut total = 0.0;
    for c in 0..a.channels() {
        total += ssim_channel(a, b, c, params);
    }
    Ok(total / a.channels() as f64)
}

fn ssim_channel(a: &Image, b: &Image, channel: usize, params: &SsimParams) -> f64 {
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let plane = |img: &Image| -> Vec<f64> {
        img.data()
            .iter()
            .skip(channel)
            .step_by(ch)
            .map(|&v| v as f64)
            .collect()
    };
    let pa = plane(a);
    let pb = plane(b);
    let paa: Vec<f64> = pa.iter().map(|v| v * v).collect();
    let pbb: Vec<f64> = pb.iter().map(|v| v * v).collect();
    let pab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();

    let kernel = gaussian_kernel(params.window, params.sigma);
    let mu_a = blur(&pa, w, h, &kernel);
    let mu_b = blur(&pb, w, h, &kernel);
    let e_aa = blur(&paa, w, h, &kernel);
    let e_bb = blur(&pbb, w, h, &kernel);
    let e_ab = blur(&pab, w, h, &kernel);

    let c1 = (params.k1 * params.peak).powi(2);
    let c2 = (params.k2 * params.peak).powi(2);
    let mut sum = 0.0;
    for i in 0..w * h {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let v = ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        sum += v;
    }
    sum / (w * h) as f64
}

pub(crate) fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let r = (window / 2) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Mirror an index into `[0, n)` with the edge sample included:
/// `-1 -> 0`, `n -> n-1`.
#[inline]
pub(crate) fn mirror(i: isize, n: usize) -> usize {
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
}

/// Separable convolution with symmetric boundary handling.
fn blur(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in kernel.iter().enumerate() {
                acc += kv * row[mirror(x as isize + j as isize - r, w)];
            }
            rows[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in kernel.iter().enumerate() {
                acc += kv * rows[mirror(y as isize + j as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}
