use flowcore::{resample_flow, FlowField, Image};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layers::{
    relu_backward_inplace, relu_inplace, upsample2x, upsample2x_backward, Conv2d, SeBlock, SeCache,
};
use crate::real::Real;
use crate::tensor::Tensor;
use crate::{RefinerError, Result};

/// Stacked input channels: reference RGB, target RGB, flow dx/dy.
pub const IN_CHANNELS: usize = 8;
/// Residual output channels.
pub const OUT_CHANNELS: usize = 2;
/// Total encoder downsampling; input dims must be divisible by this.
pub const DOWNSAMPLE: usize = 32;

/// Network and training configuration.
///
/// Six encoder stages at strides 1,2,4,8,16,32; the decoder mirrors the
/// strides with five stages. Only `channels` and `se_reduction` define the
/// topology; the rest steer training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinerConfig {
    pub channels: [usize; 6],
    pub se_reduction: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RefinerConfig {
    /// CPU-scale preset.
    pub fn desk() -> Self {
        Self {
            channels: [16, 32, 64, 128, 256, 512],
            se_reduction: 16,
            learning_rate: 1e-4,
            batch_size: 8,
            epochs: 10,
            seed: 0,
        }
    }

    /// Full-scale preset with the 2048-wide bottleneck.
    pub fn full() -> Self {
        Self {
            channels: [64, 128, 256, 512, 1024, 2048],
            ..Self::desk()
        }
    }

    /// Minimal topology for gradient verification.
    pub fn tiny() -> Self {
        Self {
            channels: [2, 2, 2, 2, 2, 4],
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.contains(&0) {
            return Err(RefinerError::BadDimensions(
                "channel widths must be nonzero".into(),
            ));
        }
        if self.se_reduction == 0 || self.batch_size == 0 {
            return Err(RefinerError::BadDimensions(
                "se_reduction and batch_size must be nonzero".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct ConvBlock<T> {
    a: Conv2d<T>,
    b: Conv2d<T>,
}

impl<T: Real> ConvBlock<T> {
    fn new(in_c: usize, out_c: usize, stride: usize) -> Self {
        Self {
            a: Conv2d::new(in_c, out_c, 3, stride, 1),
            b: Conv2d::new(out_c, out_c, 3, 1, 1),
        }
    }
}

/// Post-activation features of one conv block.
#[derive(Debug, Clone)]
pub struct BlockCache<T> {
    mid: Tensor<T>,
    out: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DecCache<T> {
    concat: Tensor<T>,
    mid: Tensor<T>,
    out: Tensor<T>,
}

/// Everything the backward pass needs from a forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    x: Tensor<T>,
    flow_small: Tensor<T>,
    enc: Vec<BlockCache<T>>,
    fsum: Tensor<T>,
    se: SeCache<T>,
    dec: Vec<DecCache<T>>,
}

/// Parameter gradients in the model's canonical slot order.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub slots: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    fn zeros_like(model: &RefinerModel<T>) -> Self {
        Gradients {
            slots: model.params().iter().map(|p| vec![T::ZERO; p.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for slot in &mut self.slots {
            for v in slot {
                *v *= s;
            }
        }
    }
}

// Canonical slot indices: encoder blocks, projection, SE, decoder blocks,
// head. Checkpoints, the optimizer, and gradients all share this order.
const fn enc_slot(i: usize) -> usize {
    i * 4
}
const PROJ_W: usize = 24;
const PROJ_B: usize = 25;
const SE_FC1_W: usize = 26; // .. SE_FC2_B are the four contiguous SE slots
const SE_FC2_B: usize = 29;
const fn dec_slot(j: usize) -> usize {
    30 + j * 4
}
const HEAD_W: usize = 50;
const HEAD_B: usize = 51;
pub(crate) const SLOT_COUNT: usize = 52;

/// The residual refinement network. The residual head is zero-initialized,
/// so a freshly built model refines any flow to itself exactly.
#[derive(Debug, Clone)]
pub struct RefinerModel<T> {
    cfg: RefinerConfig,
    enc: Vec<ConvBlock<T>>,
    proj: Conv2d<T>,
    se: SeBlock<T>,
    dec: Vec<ConvBlock<T>>,
    head: Conv2d<T>,
}

impl<T: Real> RefinerModel<T> {
    pub fn new(cfg: &RefinerConfig) -> Result<Self> {
        cfg.validate()?;
        let ch = cfg.channels;
        let mut enc = Vec::with_capacity(6);
        enc.push(ConvBlock::new(IN_CHANNELS, ch[0], 1));
        for i in 1..6 {
            enc.push(ConvBlock::new(ch[i - 1], ch[i], 2));
        }
        let proj = Conv2d::new(OUT_CHANNELS, ch[5], 1, 1, 0);
        let se = SeBlock::new(ch[5], cfg.se_reduction);
        let dec = (0..5)
            .map(|j| ConvBlock::new(ch[5 - j] + ch[4 - j], ch[4 - j], 1))
            .collect();
        let head = Conv2d::new(ch[0], OUT_CHANNELS, 3, 1, 1);

        let mut model = Self {
            cfg: *cfg,
            enc,
            proj,
            se,
            dec,
            head,
        };
        model.init_weights();
        Ok(model)
    }

    /// He-uniform initialization in canonical slot order; biases and the
    /// residual head stay zero.
    fn init_weights(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut fill = |w: &mut [T], fan_in: usize| {
            let limit = (6.0 / fan_in as f64).sqrt();
            for v in w {
                *v = T::from_f64(rng.random_range(-limit..=limit));
            }
        };
        for block in &mut self.enc {
            let fa = block.a.in_c * 9;
            fill(&mut block.a.w, fa);
            let fb = block.b.in_c * 9;
            fill(&mut block.b.w, fb);
        }
        fill(&mut self.proj.w, OUT_CHANNELS);
        fill(&mut self.se.fc1_w, self.se.channels);
        fill(&mut self.se.fc2_w, self.se.squeeze);
        for block in &mut self.dec {
            let fa = block.a.in_c * 9;
            fill(&mut block.a.w, fa);
            let fb = block.b.in_c * 9;
            fill(&mut block.b.w, fb);
        }
        // Residual head stays zero: the untrained model is the identity.
    }

    pub fn config(&self) -> &RefinerConfig {
        &self.cfg
    }

    /// Parameter slots in canonical order.
    pub fn params(&self) -> Vec<&Vec<T>> {
        let mut out = Vec::with_capacity(SLOT_COUNT);
        for block in &self.enc {
            out.push(&block.a.w);
            out.push(&block.a.b);
            out.push(&block.b.w);
            out.push(&block.b.b);
        }
        out.push(&self.proj.w);
        out.push(&self.proj.b);
        out.push(&self.se.fc1_w);
        out.push(&self.se.fc1_b);
        out.push(&self.se.fc2_w);
        out.push(&self.se.fc2_b);
        for block in &self.dec {
            out.push(&block.a.w);
            out.push(&block.a.b);
            out.push(&block.b.w);
            out.push(&block.b.b);
        }
        out.push(&self.head.w);
        out.push(&self.head.b);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::with_capacity(SLOT_COUNT);
        for block in &mut self.enc {
            out.push(&mut block.a.w);
            out.push(&mut block.a.b);
            out.push(&mut block.b.w);
            out.push(&mut block.b.b);
        }
        out.push(&mut self.proj.w);
        out.push(&mut self.proj.b);
        out.push(&mut self.se.fc1_w);
        out.push(&mut self.se.fc1_b);
        out.push(&mut self.se.fc2_w);
        out.push(&mut self.se.fc2_b);
        for block in &mut self.dec {
            out.push(&mut block.a.w);
            out.push(&mut block.a.b);
            out.push(&mut block.b.w);
            out.push(&mut block.b.b);
        }
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Convert parameters to another precision (exact for f32 -> f64).
    pub fn convert<U: Real>(&self) -> RefinerModel<U> {
        let mut out = RefinerModel::<U>::new(&self.cfg).expect("config already validated");
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d = U::from_f64(s.to_f64());
            }
        }
        out
    }

    /// Stack images and flow into the 8-channel input tensor plus the
    /// bottleneck-resolution flow (resampled with magnitude rescaling).
    pub fn build_input(
        &self,
        image_a: &Image,
        image_b: &Image,
        flow: &FlowField,
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        let (w, h) = (flow.width(), flow.height());
        for (name, img) in [("image_a", image_a), ("image_b", image_b)] {
            if img.width() != w || img.height() != h {
                return Err(RefinerError::BadDimensions(format!(
                    "{name} is {}x{}, flow is {w}x{h}",
                    img.width(),
                    img.height()
                )));
            }
        }
        if w % DOWNSAMPLE != 0 || h % DOWNSAMPLE != 0 || w == 0 || h == 0 {
            return Err(RefinerError::BadDimensions(format!(
                "dims {w}x{h} must be divisible by {DOWNSAMPLE}"
            )));
        }
        let mut x = Tensor::zeros(IN_CHANNELS, h, w);
        let write_rgb = |base: usize, img: &Image, x: &mut Tensor<T>| {
            for c in 0..3 {
                let src_c = if img.channels() == 3 { c } else { 0 };
                let ch = x.channel_mut(base + c);
                for (i, px) in img.data().chunks_exact(img.channels()).enumerate() {
                    ch[i] = T::from_f32(px[src_c]);
                }
            }
        };
        write_rgb(0, image_a, &mut x);
        write_rgb(3, image_b, &mut x);
        for (i, v) in flow.vectors().iter().enumerate() {
            x.channel_mut(6)[i] = T::from_f32(v[0]);
            x.channel_mut(7)[i] = T::from_f32(v[1]);
        }

        let small = resample_flow(flow, w / DOWNSAMPLE, h / DOWNSAMPLE);
        let mut flow_small = Tensor::zeros(OUT_CHANNELS, h / DOWNSAMPLE, w / DOWNSAMPLE);
        for (i, v) in small.vectors().iter().enumerate() {
            flow_small.channel_mut(0)[i] = T::from_f32(v[0]);
            flow_small.channel_mut(1)[i] = T::from_f32(v[1]);
        }
        Ok((x, flow_small))
    }

    /// Tensor-level forward pass returning the residual and the cache.
    pub fn forward_tensors(&self, x: &Tensor<T>, flow_small: &Tensor<T>) -> (Tensor<T>, ForwardCache<T>) {
        let mut enc_caches = Vec::with_capacity(6);
        let mut cur = x;
        for block in &self.enc {
            let mut mid = block.a.forward(cur);
            relu_inplace(&mut mid);
            let mut out = block.b.forward(&mid);
            relu_inplace(&mut out);
            enc_caches.push(BlockCache { mid, out });
            cur = &enc_caches.last().unwrap().out;
        }

        let ftil = self.proj.forward(flow_small);
        let fsum = Tensor::add(&enc_caches[5].out, &ftil);
        let (z, se_cache) = self.se.forward(&fsum);

        let mut dec_caches: Vec<DecCache<T>> = Vec::with_capacity(5);
        let mut prev = z;
        for (j, block) in self.dec.iter().enumerate() {
            let up = upsample2x(&prev);
            let concat = Tensor::concat(&up, &enc_caches[4 - j].out);
            let mut mid = block.a.forward(&concat);
            relu_inplace(&mut mid);
            let mut out = block.b.forward(&mid);
            relu_inplace(&mut out);
            dec_caches.push(DecCache { concat, mid, out });
            prev = dec_caches.last().unwrap().out.clone();
        }

        let delta = self.head.forward(&dec_caches[4].out);
        (
            delta,
            ForwardCache {
                x: x.clone(),
                flow_small: flow_small.clone(),
                enc: enc_caches,
                fsum,
                se: se_cache,
                dec: dec_caches,
            },
        )
    }

    /// Reverse-mode gradients for every parameter given the gradient of the
    /// loss with respect to the residual output.
    pub fn backward(&self, cache: &ForwardCache<T>, d_delta: &Tensor<T>) -> Gradients<T> {
        let mut g = Gradients::zeros_like(self);

        // Head.
        let feat = &cache.dec[4].out;
        let mut d = Tensor::zeros(feat.c, feat.h, feat.w);
        {
            let (gw, gb) = slot_pair(&mut g.slots, HEAD_W, HEAD_B);
            self.head.backward(feat, d_delta, Some(&mut d), gw, gb);
        }

        // Decoder, in reverse execution order; collect skip gradients.
        let mut skip_grads: Vec<Option<Tensor<T>>> = (0..5).map(|_| None).collect();
        for j in (0..5).rev() {
            let dc = &cache.dec[j];
            let block = &self.dec[j];
            relu_backward_inplace(&mut d, &dc.out);
            let mut d_mid = Tensor::zeros(dc.mid.c, dc.mid.h, dc.mid.w);
            {
                let (gw, gb) = slot_pair(&mut g.slots, dec_slot(j) + 2, dec_slot(j) + 3);
                block.b.backward(&dc.mid, &d, Some(&mut d_mid), gw, gb);
            }
            relu_backward_inplace(&mut d_mid, &dc.mid);
            let mut d_cat = Tensor::zeros(dc.concat.c, dc.concat.h, dc.concat.w);
            {
                let (gw, gb) = slot_pair(&mut g.slots, dec_slot(j), dec_slot(j) + 1);
                block.a.backward(&dc.concat, &d_mid, Some(&mut d_cat), gw, gb);
            }
            let up_c = self.cfg.channels[5 - j];
            let (d_up, d_skip) = d_cat.split(up_c);
            skip_grads[4 - j] = Some(d_skip);
            d = upsample2x_backward(&d_up, d_up.h / 2, d_up.w / 2);
        }

        // Bottleneck: SE, then the add fans out to f6 and the projection.
        let mut d_fsum = Tensor::zeros(cache.fsum.c, cache.fsum.h, cache.fsum.w);
        self.se_backward(cache, &d, &mut d_fsum, &mut g);
        {
            let (gw, gb) = slot_pair(&mut g.slots, PROJ_W, PROJ_B);
            self.proj.backward(&cache.flow_small, &d_fsum, None, gw, gb);
        }
        let mut d = d_fsum;

        // Encoder, top block down to the input.
        for i in (0..6).rev() {
            if i < 5 {
                if let Some(skip) = skip_grads[i].take() {
                    d.add_assign(&skip);
                }
            }
            let bc = &cache.enc[i];
            let block = &self.enc[i];
            relu_backward_inplace(&mut d, &bc.out);
            let mut d_mid = Tensor::zeros(bc.mid.c, bc.mid.h, bc.mid.w);
            {
                let (gw, gb) = slot_pair(&mut g.slots, enc_slot(i) + 2, enc_slot(i) + 3);
                block.b.backward(&bc.mid, &d, Some(&mut d_mid), gw, gb);
            }
            relu_backward_inplace(&mut d_mid, &bc.mid);
            let input: &Tensor<T> = if i == 0 { &cache.x } else { &cache.enc[i - 1].out };
            let (gw, gb) = slot_pair(&mut g.slots, enc_slot(i), enc_slot(i) + 1);
            if i == 0 {
                block.a.backward(input, &d_mid, None, gw, gb);
            } else {
                let mut d_in = Tensor::zeros(input.c, input.h, input.w);
                block.a.backward(input, &d_mid, Some(&mut d_in), gw, gb);
                d = d_in;
            }
        }
        g
    }

    fn se_backward(
        &self,
        cache: &ForwardCache<T>,
        dy: &Tensor<T>,
        d_fsum: &mut Tensor<T>,
        g: &mut Gradients<T>,
    ) {
        // Borrow the four contiguous SE gradient slots disjointly.
        let mut it = g.slots[SE_FC1_W..=SE_FC2_B].iter_mut();
        let fc1_w = it.next().unwrap();
        let fc1_b = it.next().unwrap();
        let fc2_w = it.next().unwrap();
        let fc2_b = it.next().unwrap();
        self.se
            .backward(&cache.fsum, &cache.se, dy, d_fsum, fc1_w, fc1_b, fc2_w, fc2_b);
    }

    /// Full forward on domain types: residual flow, refined flow, cache.
    /// The refined field inherits the input's validity mask.
    pub fn forward(
        &self,
        image_a: &Image,
        image_b: &Image,
        flow: &FlowField,
    ) -> Result<(FlowField, FlowField, ForwardCache<T>)> {
        let (x, flow_small) = self.build_input(image_a, image_b, flow)?;
        let (delta, cache) = self.forward_tensors(&x, &flow_small);
        let (w, h) = (flow.width(), flow.height());
        let mut delta_field = FlowField::zeros(w, h);
        let mut refined = flow.clone();
        for i in 0..w * h {
            let dv = [
                delta.channel(0)[i].to_f64() as f32,
                delta.channel(1)[i].to_f64() as f32,
            ];
            delta_field.vectors_mut()[i] = dv;
            let r = &mut refined.vectors_mut()[i];
            r[0] += dv[0];
            r[1] += dv[1];
        }
        delta_field.valid_mask_mut().copy_from_slice(flow.valid_mask());
        Ok((delta_field, refined, cache))
    }

    /// Inference-only refinement.
    pub fn refine(&self, image_a: &Image, image_b: &Image, flow: &FlowField) -> Result<FlowField> {
        let (_, refined, _) = self.forward(image_a, image_b, flow)?;
        Ok(refined)
    }
}

/// Disjoint mutable access to a (weight, bias) slot pair.
fn slot_pair<T>(slots: &mut [Vec<T>], wi: usize, bi: usize) -> (&mut [T], &mut [T]) {
    debug_assert_eq!(bi, wi + 1);
    let (a, b) = slots[wi..=bi].split_at_mut(1);
    (&mut a[0], &mut b[0])
}
