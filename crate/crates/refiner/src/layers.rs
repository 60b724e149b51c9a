use crate::real::Real;
use crate::tensor::Tensor;

/// 2D convolution with square kernel, zero padding, and stride 1 or 2.
/// Weights are laid out `[out_c][in_c][ky][kx]`.
#[derive(Debug, Clone)]
pub(crate) struct Conv2d<T> {
    pub w: Vec<T>,
    pub b: Vec<T>,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl<T: Real> Conv2d<T> {
    pub fn new(in_c: usize, out_c: usize, k: usize, stride: usize, pad: usize) -> Self {
        Self {
            w: vec![T::ZERO; out_c * in_c * k * k],
            b: vec![T::ZERO; out_c],
            in_c,
            out_c,
            k,
            stride,
            pad,
        }
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.k) / self.stride + 1,
            (w + 2 * self.pad - self.k) / self.stride + 1,
        )
    }

    /// Gather the convolution's receptive fields into a row-major
    /// `[n][in_c * k * k]` matrix (`n` walks output pixels); out-of-image
    /// taps are zero. Turns every convolution into long contiguous dot
    /// products regardless of spatial extent.
    fn im2col(&self, x: &Tensor<T>, oh: usize, ow: usize) -> Vec<T> {
        let (h, w, s, p, k) = (x.h, x.w, self.stride, self.pad, self.k);
        let kk = self.in_c * k * k;
        let mut cols = vec![T::ZERO; oh * ow * kk];
        for ic in 0..self.in_c {
            let x_ch = x.channel(ic);
            for ky in 0..k {
                for kx in 0..k {
                    let kidx = (ic * k + ky) * k + kx;
                    for oy in 0..oh {
                        let iy = (oy * s + ky) as isize - p as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let xrow = &x_ch[iy as usize * w..(iy as usize + 1) * w];
                        let base = oy * ow;
                        for ox in 0..ow {
                            let ix = (ox * s + kx) as isize - p as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            cols[(base + ox) * kk + kidx] = xrow[ix as usize];
                        }
                    }
                }
            }
        }
        cols
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        debug_assert_eq!(x.c, self.in_c);
        let (oh, ow) = self.out_dims(x.h, x.w);
        let kk = self.in_c * self.k * self.k;
        let cols = self.im2col(x, oh, ow);
        let mut out = Tensor::zeros(self.out_c, oh, ow);
        for oc in 0..self.out_c {
            let w_row = &self.w[oc * kk..(oc + 1) * kk];
            let bias = self.b[oc];
            let out_ch = out.channel_mut(oc);
            for (o, col) in out_ch.iter_mut().zip(cols.chunks_exact(kk)) {
                *o = bias + lane_dot(w_row, col);
            }
        }
        out
    }

    /// Reverse-mode step: accumulates weight/bias gradients and, when
    /// `dx` is given, the gradient with respect to the input. The column
    /// matrix is regathered rather than cached across the pass.
    pub fn backward(
        &self,
        x: &Tensor<T>,
        dy: &Tensor<T>,
        dx: Option<&mut Tensor<T>>,
        gw: &mut [T],
        gb: &mut [T],
    ) {
        let (oh, ow) = (dy.h, dy.w);
        let n = oh * ow;
        let kk = self.in_c * self.k * self.k;
        let cols = self.im2col(x, oh, ow);

        for oc in 0..self.out_c {
            let dy_ch = dy.channel(oc);
            gb[oc] += lane_sum(dy_ch);
            let gw_row = &mut gw[oc * kk..(oc + 1) * kk];
            for (d, col) in dy_ch.iter().zip(cols.chunks_exact(kk)) {
                if *d != T::ZERO {
                    axpy(gw_row, col, *d);
                }
            }
        }

        if let Some(dx) = dx {
            let mut dcols = vec![T::ZERO; n * kk];
            for oc in 0..self.out_c {
                let w_row = &self.w[oc * kk..(oc + 1) * kk];
                let dy_ch = dy.channel(oc);
                for (d, dcol) in dy_ch.iter().zip(dcols.chunks_exact_mut(kk)) {
                    if *d != T::ZERO {
                        axpy(dcol, w_row, *d);
                    }
                }
            }
            // Scatter columns back onto the input grid.
            let (h, w, s, p, k) = (x.h, x.w, self.stride, self.pad, self.k);
            for ic in 0..self.in_c {
                let dx_ch = dx.channel_mut(ic);
                for ky in 0..k {
                    for kx in 0..k {
                        let kidx = (ic * k + ky) * k + kx;
                        for oy in 0..oh {
                            let iy = (oy * s + ky) as isize - p as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let drow = &mut dx_ch[iy as usize * w..(iy as usize + 1) * w];
                            let base = oy * ow;
                            for ox in 0..ow {
                                let ix = (ox * s + kx) as isize - p as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                drow[ix as usize] += dcols[(base + ox) * kk + kidx];
                            }
                        }
                    }
                }
            }
        }
    }

}

/// `dst += scale * src` over contiguous slices.
#[inline]
fn axpy<T: Real>(dst: &mut [T], src: &[T], scale: T) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * *s;
    }
}

/// Sum with eight independent accumulator lanes. Strict IEEE addition is
/// not reassociable, so a single-accumulator reduction cannot vectorize;
/// fixed lanes keep the result deterministic and let the codegen pack them.
#[inline]
fn lane_sum<T: Real>(values: &[T]) -> T {
    let mut lanes = [T::ZERO; 8];
    let mut chunks = values.chunks_exact(8);
    for chunk in &mut chunks {
        for (lane, v) in lanes.iter_mut().zip(chunk) {
            *lane += *v;
        }
    }
    let mut tail = T::ZERO;
    for v in chunks.remainder() {
        tail += *v;
    }
    let s0 = (lanes[0] + lanes[4]) + (lanes[2] + lanes[6]);
    let s1 = (lanes[1] + lanes[5]) + (lanes[3] + lanes[7]);
    (s0 + s1) + tail
}

/// Dot product with eight accumulator lanes; same rationale as [`lane_sum`].
#[inline]
fn lane_dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [T::ZERO; 8];
    let mut ac = a.chunks_exact(8);
    let mut bc = b.chunks_exact(8);
    for (ca, cb) in (&mut ac).zip(&mut bc) {
        for ((lane, x), y) in lanes.iter_mut().zip(ca).zip(cb) {
            *lane += *x * *y;
        }
    }
    let mut tail = T::ZERO;
    for (x, y) in ac.remainder().iter().zip(bc.remainder()) {
        tail += *x * *y;
    }
    let s0 = (lanes[0] + lanes[4]) + (lanes[2] + lanes[6]);
    let s1 = (lanes[1] + lanes[5]) + (lanes[3] + lanes[7]);
    (s0 + s1) + tail
}

pub(crate) fn relu_inplace<T: Real>(t: &mut Tensor<T>) {
    for v in &mut t.data {
        *v = v.max(T::ZERO);
    }
}

/// Zero the gradient where the cached post-activation output is zero.
pub(crate) fn relu_backward_inplace<T: Real>(dy: &mut Tensor<T>, out: &Tensor<T>) {
    for (d, o) in dy.data.iter_mut().zip(&out.data) {
        if *o <= T::ZERO {
            *d = T::ZERO;
        }
    }
}

/// Center-aligned bilinear taps for a 2x upsample along one axis.
fn taps2x(n_in: usize, o: usize) -> (usize, usize, f64, f64) {
    let m = o / 2;
    if o.is_multiple_of(2) {
        (m.saturating_sub(1), m, 0.25, 0.75)
    } else {
        (m, (m + 1).min(n_in - 1), 0.75, 0.25)
    }
}

/// Bilinear 2x spatial upsample (center-aligned, edges clamped).
pub(crate) fn upsample2x<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (x.h, x.w);
    let (oh, ow) = (2 * h, 2 * w);
    let xtaps: Vec<(usize, usize, T, T)> = (0..ow)
        .map(|o| {
            let (i0, i1, w0, w1) = taps2x(w, o);
            (i0, i1, T::from_f64(w0), T::from_f64(w1))
        })
        .collect();
    let mut out = Tensor::zeros(x.c, oh, ow);
    for c in 0..x.c {
        let x_ch = x.channel(c);
        let out_ch = out.channel_mut(c);
        for oy in 0..oh {
            let (y0, y1, wy0, wy1) = taps2x(h, oy);
            let (wy0, wy1) = (T::from_f64(wy0), T::from_f64(wy1));
            let r0 = &x_ch[y0 * w..(y0 + 1) * w];
            let r1 = &x_ch[y1 * w..(y1 + 1) * w];
            let orow = &mut out_ch[oy * ow..(oy + 1) * ow];
            for (o, &(x0, x1, wx0, wx1)) in orow.iter_mut().zip(&xtaps) {
                *o = wy0 * (wx0 * r0[x0] + wx1 * r0[x1]) + wy1 * (wx0 * r1[x0] + wx1 * r1[x1]);
            }
        }
    }
    out
}

/// Adjoint of [`upsample2x`]: scatter output gradients back to the input grid.
pub(crate) fn upsample2x_backward<T: Real>(dy: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let (oh, ow) = (dy.h, dy.w);
    debug_assert_eq!((oh, ow), (2 * h, 2 * w));
    let xtaps: Vec<(usize, usize, T, T)> = (0..ow)
        .map(|o| {
            let (i0, i1, w0, w1) = taps2x(w, o);
            (i0, i1, T::from_f64(w0), T::from_f64(w1))
        })
        .collect();
    let mut dx = Tensor::zeros(dy.c, h, w);
    for c in 0..dy.c {
        let dy_ch = dy.channel(c);
        let dx_ch = dx.channel_mut(c);
        for oy in 0..oh {
            let (y0, y1, wy0, wy1) = taps2x(h, oy);
            let (wy0, wy1) = (T::from_f64(wy0), T::from_f64(wy1));
            let drow = &dy_ch[oy * ow..(oy + 1) * ow];
            for (d, &(x0, x1, wx0, wx1)) in drow.iter().zip(&xtaps) {
                dx_ch[y0 * w + x0] += wy0 * wx0 * *d;
                dx_ch[y0 * w + x1] += wy0 * wx1 * *d;
                dx_ch[y1 * w + x0] += wy1 * wx0 * *d;
                dx_ch[y1 * w + x1] += wy1 * wx1 * *d;
            }
        }
    }
    dx
}

fn sigmoid<T: Real>(v: T) -> T {
    T::ONE / (T::ONE + (-v).exp())
}

/// Squeeze-and-excitation gate: global average pool, a bottlenecked
/// two-layer transform, and per-channel sigmoid scaling.
#[derive(Debug, Clone)]
pub(crate) struct SeBlock<T> {
    pub fc1_w: Vec<T>, // [squeeze][channels]
    pub fc1_b: Vec<T>,
    pub fc2_w: Vec<T>, // [channels][squeeze]
    pub fc2_b: Vec<T>,
    pub channels: usize,
    pub squeeze: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SeCache<T> {
    pub pooled: Vec<T>,
    pub hidden: Vec<T>, // post-ReLU
    pub gates: Vec<T>,  // post-sigmoid
}

impl<T: Real> SeBlock<T> {
    pub fn new(channels: usize, reduction: usize) -> Self {
        let squeeze = (channels / reduction).max(1);
        Self {
            fc1_w: vec![T::ZERO; squeeze * channels],
            fc1_b: vec![T::ZERO; squeeze],
            fc2_w: vec![T::ZERO; channels * squeeze],
            fc2_b: vec![T::ZERO; channels],
            channels,
            squeeze,
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, SeCache<T>) {
        let n = T::from_f64(1.0 / x.plane() as f64);
        let pooled: Vec<T> = (0..x.c)
            .map(|c| {
                let mut s = T::ZERO;
                for v in x.channel(c) {
                    s += *v;
                }
                s * n
            })
            .collect();
        let hidden: Vec<T> = (0..self.squeeze)
            .map(|s| {
                let mut acc = self.fc1_b[s];
                let row = &self.fc1_w[s * self.channels..(s + 1) * self.channels];
                for (w, p) in row.iter().zip(&pooled) {
                    acc += *w * *p;
                }
                acc.max(T::ZERO)
            })
            .collect();
        let gates: Vec<T> = (0..self.channels)
            .map(|c| {
                let mut acc = self.fc2_b[c];
                let row = &self.fc2_w[c * self.squeeze..(c + 1) * self.squeeze];
                for (w, h) in row.iter().zip(&hidden) {
                    acc += *w * *h;
                }
                sigmoid(acc)
            })
            .collect();
        let mut out = x.clone();
        for (c, g) in gates.iter().enumerate() {
            for v in out.channel_mut(c) {
                *v *= *g;
            }
        }
        (
            out,
            SeCache {
                pooled,
                hidden,
                gates,
            },
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        x: &Tensor<T>,
        cache: &SeCache<T>,
        dy: &Tensor<T>,
        dx: &mut Tensor<T>,
        g_fc1_w: &mut [T],
        g_fc1_b: &mut [T],
        g_fc2_w: &mut [T],
        g_fc2_b: &mut [T],
    ) {
        // Scale path.
        let mut d_gates = vec![T::ZERO; self.channels];
        for (c, dg) in d_gates.iter_mut().enumerate() {
            let g = cache.gates[c];
            let dxc = dx.channel_mut(c);
            let mut acc = T::ZERO;
            for ((d, xv), o) in dy.channel(c).iter().zip(x.channel(c)).zip(dxc.iter_mut()) {
                *o += g * *d;
                acc += *d * *xv;
            }
            *dg = acc;
        }
        // Gate path.
        let mut d_hidden = vec![T::ZERO; self.squeeze];
        for c in 0..self.channels {
            let g = cache.gates[c];
            let dpre = d_gates[c] * g * (T::ONE - g);
            g_fc2_b[c] += dpre;
            for s in 0..self.squeeze {
                g_fc2_w[c * self.squeeze + s] += dpre * cache.hidden[s];
                d_hidden[s] += self.fc2_w[c * self.squeeze + s] * dpre;
            }
        }
        let mut d_pooled = vec![T::ZERO; self.channels];
        for s in 0..self.squeeze {
            if cache.hidden[s] <= T::ZERO {
                continue;
            }
            let dpre = d_hidden[s];
            g_fc1_b[s] += dpre;
            for c in 0..self.channels {
                g_fc1_w[s * self.channels + c] += dpre * cache.pooled[c];
                d_pooled[c] += self.fc1_w[s * self.channels + c] * dpre;
            }
        }
        // Pool path spreads evenly over the plane.
        let n = T::from_f64(1.0 / x.plane() as f64);
        for (c, dp) in d_pooled.iter().enumerate() {
            let g = *dp * n;
            for v in dx.channel_mut(c) {
                *v += g;
            }
        }
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_identity_kernel_passes_through() {
        let mut conv = Conv2d::<f64>::new(1, 1, 3, 1, 1);
        conv.w[4] = 1.0; // center tap
        let x = Tensor::from_vec(1, 3, 3, (0..9).map(|v| v as f64).collect());
        let y = conv.forward(&x);
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn conv_stride2_halves_dims() {
        let conv = Conv2d::<f32>::new(2, 3, 3, 2, 1);
        let x = Tensor::zeros(2, 8, 6);
        let y = conv.forward(&x);
        assert_eq!((y.c, y.h, y.w), (3, 4, 3));
    }

    #[test]
    fn conv_backward_matches_finite_difference() {
        let mut conv = Conv2d::<f64>::new(2, 2, 3, 1, 1);
        for (i, w) in conv.w.iter_mut().enumerate() {
            *w = ((i * 31 % 17) as f64 - 8.0) / 20.0;
        }
        conv.b = vec![0.1, -0.2];
        let x = Tensor::from_vec(
            2,
            4,
            4,
            (0..32).map(|i| ((i * 13 % 23) as f64 - 11.0) / 7.0).collect(),
        );
        // Loss = sum of outputs; dy = ones.
        let y = conv.forward(&x);
        let dy = Tensor::from_vec(y.c, y.h, y.w, vec![1.0; y.data.len()]);
        let mut dx = Tensor::zeros(x.c, x.h, x.w);
        let mut gw = vec![0.0; conv.w.len()];
        let mut gb = vec![0.0; conv.b.len()];
        conv.backward(&x, &dy, Some(&mut dx), &mut gw, &mut gb);

        let eps = 1e-6;
        for wi in [0usize, 5, 17, 35] {
            let mut c2 = conv.clone();
            c2.w[wi] += eps;
            let lp: f64 = c2.forward(&x).data.iter().sum();
            c2.w[wi] -= 2.0 * eps;
            let lm: f64 = c2.forward(&x).data.iter().sum();
            let fd = (lp - lm) / (2.0 * eps);
            assert!((fd - gw[wi]).abs() < 1e-6, "w[{wi}]: {fd} vs {}", gw[wi]);
        }
        for xi in [0usize, 9, 21, 31] {
            let mut x2 = x.clone();
            x2.data[xi] += eps;
            let lp: f64 = conv.forward(&x2).data.iter().sum();
            x2.data[xi] -= 2.0 * eps;
            let lm: f64 = conv.forward(&x2).data.iter().sum();
            let fd = (lp - lm) / (2.0 * eps);
            assert!((fd - dx.data[xi]).abs() < 1e-6, "x[{xi}]: {fd} vs {}", dx.data[xi]);
        }
    }

    #[test]
    fn upsample_backward_is_the_adjoint() {
        // <up(x), y> must equal <x, up^T(y)> for random x, y.
        let x = Tensor::from_vec(1, 3, 4, (0..12).map(|i| (i as f64).sin()).collect());
        let y = Tensor::from_vec(1, 6, 8, (0..48).map(|i| (i as f64 * 0.7).cos()).collect());
        let up = upsample2x(&x);
        let lhs: f64 = up.data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
        let back = upsample2x_backward(&y, 3, 4);
        let rhs: f64 = x.data.iter().zip(&back.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn se_gates_scale_channels() {
        let mut se = SeBlock::<f64>::new(4, 2);
        // Zero weights: gates are sigmoid(0) = 0.5 everywhere.
        se.fc2_b = vec![0.0; 4];
        let x = Tensor::from_vec(4, 2, 2, (0..16).map(|v| v as f64).collect());
        let (y, cache) = se.forward(&x);
        for (a, b) in y.data.iter().zip(&x.data) {
            assert!((a - 0.5 * b).abs() < 1e-12);
        }
        assert_eq!(cache.gates, vec![0.5; 4]);
    }
}
