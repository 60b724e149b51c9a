use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flowcore::{FlowField, Image};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::loss::smooth_l1_tensor;
use crate::model::{Gradients, RefinerConfig, RefinerModel};
use crate::tensor::Tensor;
use crate::{RefinerError, Result};

/// One supervised pair: both images, the flow to refine, and the exact
/// ground-truth flow.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub image_a: Image,
    pub image_b: Image,
    pub input_flow: FlowField,
    pub gt_flow: FlowField,
}

impl TrainSample {
    fn mask(&self) -> Vec<bool> {
        self.input_flow
            .valid_mask()
            .iter()
            .zip(self.gt_flow.valid_mask())
            .map(|(a, b)| *a && *b)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_epe: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Best-on-validation model.
    pub model: RefinerModel<f32>,
    pub history: Vec<EpochStats>,
    pub best_val_epe: f64,
    pub best_epoch: usize,
}

/// Adaptive-moment optimizer state, one moment pair per parameter slot.
struct Adam {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    t: u64,
    lr: f64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    fn new(model: &RefinerModel<f32>, lr: f64) -> Self {
        Self {
            m: model.params().iter().map(|p| vec![0.0; p.len()]).collect(),
            v: model.params().iter().map(|p| vec![0.0; p.len()]).collect(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, model: &mut RefinerModel<f32>, grads: &Gradients<f32>) {
        self.t += 1;
        let c1 = (1.0 - BETA1.powi(self.t as i32)) as f32;
        let c2 = (1.0 - BETA2.powi(self.t as i32)) as f32;
        let (b1, b2) = (BETA1 as f32, BETA2 as f32);
        let (lr, eps) = (self.lr as f32, EPS as f32);
        for (((param, grad), m), v) in model
            .params_mut()
            .into_iter()
            .zip(&grads.slots)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                param[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

/// Deterministic mini-batch trainer. All randomness (weight init aside)
/// flows from one seeded stream whose position is captured in saved state,
/// so an interrupted run resumed from disk reproduces the uninterrupted
/// run bit for bit.
pub struct Trainer {
    model: RefinerModel<f32>,
    cfg: RefinerConfig,
    adam: Adam,
    epoch: usize,
    rng: ChaCha8Rng,
    best_val_epe: f64,
    best_epoch: usize,
    best_params: Vec<Vec<f32>>,
}

const SCHEDULE_SALT: u64 = 0x7261_696e_5f72_6e67;

impl Trainer {
    pub fn new(cfg: &RefinerConfig) -> Result<Self> {
        let model = RefinerModel::<f32>::new(cfg)?;
        let adam = Adam::new(&model, cfg.learning_rate);
        let best_params = model.params().iter().map(|p| (*p).clone()).collect();
        Ok(Self {
            model,
            cfg: *cfg,
            adam,
            epoch: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ SCHEDULE_SALT),
            best_val_epe: f64::INFINITY,
            best_epoch: 0,
            best_params,
        })
    }

    pub fn model(&self) -> &RefinerModel<f32> {
        &self.model
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn best_val_epe(&self) -> f64 {
        self.best_val_epe
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    /// The best-on-validation parameter snapshot as a model.
    pub fn best_model(&self) -> Result<RefinerModel<f32>> {
        let mut best = RefinerModel::<f32>::new(&self.cfg)?;
        for (dst, src) in best.params_mut().into_iter().zip(&self.best_params) {
            dst.copy_from_slice(src);
        }
        Ok(best)
    }

    /// One pass over the training set in a seeded shuffle order. Returns
    /// the mean per-sample loss.
    pub fn run_epoch(&mut self, samples: &[TrainSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(RefinerError::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut self.rng);

        let mut total_loss = 0.0;
        for (step, batch) in order.chunks(self.cfg.batch_size).enumerate() {
            let results: Vec<Result<(f64, Gradients<f32>)>> = batch
                .par_iter()
                .map(|&idx| self.sample_grads(&samples[idx]))
                .collect();
            let mut batch_grads: Option<Gradients<f32>> = None;
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, grads) = r?;
                batch_loss += loss;
                match &mut batch_grads {
                    Some(acc) => acc.add_assign(&grads),
                    None => batch_grads = Some(grads),
                }
            }
            if !batch_loss.is_finite() {
                return Err(RefinerError::NonFiniteLoss {
                    epoch: self.epoch,
                    step,
                });
            }
            let mut grads = batch_grads.expect("nonempty batch");
            grads.scale(1.0 / batch.len() as f32);
            self.adam.step(&mut self.model, &grads);
            total_loss += batch_loss;
        }
        self.epoch += 1;
        Ok(total_loss / samples.len() as f64)
    }

    fn sample_grads(&self, sample: &TrainSample) -> Result<(f64, Gradients<f32>)> {
        let (x, flow_small) = self.model.build_input(
            &sample.image_a,
            &sample.image_b,
            &sample.input_flow,
        )?;
        let (delta, cache) = self.model.forward_tensors(&x, &flow_small);

        // Refined flow as a tensor: input + residual.
        let (h, w) = (delta.h, delta.w);
        let mut refined = delta;
        for (i, v) in sample.input_flow.vectors().iter().enumerate() {
            refined.channel_mut(0)[i] += v[0];
            refined.channel_mut(1)[i] += v[1];
        }
        let mut gt = Tensor::<f32>::zeros(2, h, w);
        for (i, v) in sample.gt_flow.vectors().iter().enumerate() {
            gt.channel_mut(0)[i] = v[0];
            gt.channel_mut(1)[i] = v[1];
        }
        let (loss, d_refined) = smooth_l1_tensor(&refined, &gt, &sample.mask())?;
        // d(refined)/d(delta) is the identity.
        let grads = self.model.backward(&cache, &d_refined);
        Ok((loss, grads))
    }

    /// Mean end-point error of refined flows against ground truth.
    pub fn validate(&self, samples: &[TrainSample]) -> Result<f64> {
        validate_model(&self.model, samples)
    }

    /// Record a validation result, snapshotting the parameters when they
    /// are the best so far.
    pub fn note_validation(&mut self, val_epe: f64) {
        if val_epe < self.best_val_epe {
            self.best_val_epe = val_epe;
            self.best_epoch = self.epoch;
            for (dst, src) in self.best_params.iter_mut().zip(self.model.params()) {
                dst.copy_from_slice(src);
            }
        }
    }

    /// Serialize the complete training state: config echo, epoch counters,
    /// optimizer moments, rng position, and both parameter sets.
    pub fn save_state(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        out.write_all(b"RTRS")?;
        out.write_all(&1u32.to_le_bytes())?;
        for c in self.cfg.channels {
            out.write_all(&(c as u32).to_le_bytes())?;
        }
        out.write_all(&(self.cfg.se_reduction as u32).to_le_bytes())?;
        out.write_all(&self.cfg.learning_rate.to_le_bytes())?;
        out.write_all(&(self.cfg.batch_size as u64).to_le_bytes())?;
        out.write_all(&(self.cfg.epochs as u64).to_le_bytes())?;
        out.write_all(&self.cfg.seed.to_le_bytes())?;
        out.write_all(&(self.epoch as u64).to_le_bytes())?;
        out.write_all(&self.adam.t.to_le_bytes())?;
        out.write_all(&self.best_val_epe.to_le_bytes())?;
        out.write_all(&(self.best_epoch as u64).to_le_bytes())?;
        out.write_all(&self.rng.get_word_pos().to_le_bytes())?;
        let mut write_slots = |slots: Vec<&Vec<f32>>| -> std::io::Result<()> {
            for slot in slots {
                for v in slot {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
            Ok(())
        };
        write_slots(self.model.params())?;
        write_slots(self.adam.m.iter().collect())?;
        write_slots(self.adam.v.iter().collect())?;
        write_slots(self.best_params.iter().collect())?;
        Ok(())
    }

    pub fn load_state(path: &Path, cfg: &RefinerConfig) -> Result<Trainer> {
        let mut input = BufReader::new(std::fs::File::open(path)?);
        let corrupt = |msg: &str| RefinerError::Checkpoint(format!("{}: {msg}", path.display()));

        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4).map_err(|_| corrupt("truncated"))?;
        if &b4 != b"RTRS" {
            return Err(corrupt("bad magic"));
        }
        input.read_exact(&mut b4).map_err(|_| corrupt("truncated"))?;
        if u32::from_le_bytes(b4) != 1 {
            return Err(corrupt("unknown version"));
        }
        let read_u32 = |input: &mut dyn Read| -> Result<u32> {
            let mut b = [0u8; 4];
            input.read_exact(&mut b).map_err(|_| corrupt("truncated"))?;
            Ok(u32::from_le_bytes(b))
        };
        let mut channels = [0usize; 6];
        for c in &mut channels {
            *c = read_u32(&mut input)? as usize;
        }
        let se_reduction = read_u32(&mut input)? as usize;
        let mut b8 = [0u8; 8];
        let mut read_u64 = |input: &mut dyn Read| -> Result<u64> {
            input.read_exact(&mut b8).map_err(|_| corrupt("truncated"))?;
            Ok(u64::from_le_bytes(b8))
        };
        let learning_rate = f64::from_bits(read_u64(&mut input)?);
        let batch_size = read_u64(&mut input)? as usize;
        let epochs = read_u64(&mut input)? as usize;
        let seed = read_u64(&mut input)?;
        let stored = RefinerConfig {
            channels,
            se_reduction,
            learning_rate,
            batch_size,
            epochs,
            seed,
        };
        if stored != *cfg {
            return Err(RefinerError::ConfigMismatch(format!(
                "training state was created with {stored:?}"
            )));
        }
        let epoch = read_u64(&mut input)? as usize;
        let adam_t = read_u64(&mut input)?;
        let best_val_epe = f64::from_bits(read_u64(&mut input)?);
        let best_epoch = read_u64(&mut input)? as usize;
        let mut b16 = [0u8; 16];
        input.read_exact(&mut b16).map_err(|_| corrupt("truncated"))?;
        let word_pos = u128::from_le_bytes(b16);

        let mut trainer = Trainer::new(cfg)?;
        let read_slots = |slots: Vec<&mut Vec<f32>>, input: &mut dyn Read| -> Result<()> {
            let mut b = [0u8; 4];
            for slot in slots {
                for v in slot.iter_mut() {
                    input.read_exact(&mut b).map_err(|_| corrupt("truncated payload"))?;
                    *v = f32::from_le_bytes(b);
                }
            }
            Ok(())
        };
        read_slots(trainer.model.params_mut(), &mut input)?;
        read_slots(trainer.adam.m.iter_mut().collect(), &mut input)?;
        read_slots(trainer.adam.v.iter_mut().collect(), &mut input)?;
        read_slots(trainer.best_params.iter_mut().collect(), &mut input)?;
        trainer.epoch = epoch;
        trainer.adam.t = adam_t;
        trainer.best_val_epe = best_val_epe;
        trainer.best_epoch = best_epoch;
        trainer.rng.set_word_pos(word_pos);
        Ok(trainer)
    }
}

fn validate_model(model: &RefinerModel<f32>, samples: &[TrainSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(RefinerError::EmptyDataset);
    }
    let epes: Vec<Result<f64>> = samples
        .par_iter()
        .map(|s| {
            let refined = model.refine(&s.image_a, &s.image_b, &s.input_flow)?;
            let mask = s.mask();
            let mut sum = 0.0;
            let mut n = 0usize;
            for ((a, b), m) in refined.vectors().iter().zip(s.gt_flow.vectors()).zip(&mask) {
                if *m {
                    sum += (a[0] as f64 - b[0] as f64).hypot(a[1] as f64 - b[1] as f64);
                    n += 1;
                }
            }
            if n == 0 {
                return Err(RefinerError::EmptyMask);
            }
            Ok(sum / n as f64)
        })
        .collect();
    let mut total = 0.0;
    for e in &epes {
        match e {
            Ok(v) => total += v,
            Err(_) => return Err(RefinerError::EmptyMask),
        }
    }
    Ok(total / samples.len() as f64)
}

/// Convenience driver: train for `cfg.epochs` epochs with per-epoch
/// validation, returning the best-on-validation model and the history.
pub fn train(
    cfg: &RefinerConfig,
    train_samples: &[TrainSample],
    val_samples: &[TrainSample],
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mean_loss = trainer.run_epoch(train_samples)?;
        let val_epe = trainer.validate(val_samples)?;
        trainer.note_validation(val_epe);
        let stats = EpochStats {
            epoch: trainer.epoch(),
            mean_loss,
            val_epe,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(TrainOutcome {
        model: trainer.best_model()?,
        best_val_epe: trainer.best_val_epe(),
        best_epoch: trainer.best_epoch(),
        history,
    })
}
