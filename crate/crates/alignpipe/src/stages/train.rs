use flowcore::Image;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthmotion::{PairRecord, Split};

use refiner::{save_checkpoint, TrainSample, Trainer};

use crate::manifest::{fnv1a64, RunManifest};
use crate::stages::{composed_flow_path, load_dataset, read_flow_with_mask, split_records};
use crate::{PipelineConfig, PipelineError, Result};

/// Train the refiner on the train split with per-epoch validation. Inputs
/// mix stored corrupted flows and chain-composed flows (when present)
/// according to `refiner.mix_corrupted`; training runs on seeded square
/// crops. The best-on-validation checkpoint and the full training state
/// are written every epoch, so an interrupted run resumes exactly and a
/// non-finite-loss abort leaves the last good checkpoint behind.
pub fn cmd_train(config: &PipelineConfig) -> Result<TrainSummary> {
    let records = load_dataset(config)?;
    let train_recs = split_records(&records, Split::Train);
    let val_recs = split_records(&records, Split::Val);
    if train_recs.is_empty() || val_recs.is_empty() {
        return Err(PipelineError::EmptyStage(
            "train/val splits are empty; run `perturb` on enough sources".into(),
        ));
    }

    let train_samples = build_samples(config, &train_recs)?;
    let val_samples = build_samples(config, &val_recs)?;

    let refiner_cfg = config.refiner.to_config(config.seed)?;
    std::fs::create_dir_all(config.checkpoint_path().parent().expect("has parent"))?;

    let state_path = config.train_state_path();
    let mut trainer = if state_path.exists() {
        Trainer::load_state(&state_path, &refiner_cfg)?
    } else {
        Trainer::new(&refiner_cfg)?
    };

    let mut history = Vec::new();
    while trainer.epoch() < refiner_cfg.epochs {
        let mean_loss = trainer.run_epoch(&train_samples)?;
        let val_epe = trainer.validate(&val_samples)?;
        let improved = val_epe < trainer.best_val_epe();
        trainer.note_validation(val_epe);
        if improved {
            save_checkpoint(&trainer.best_model()?, &config.checkpoint_path())?;
        }
        trainer.save_state(&state_path)?;
        history.push((trainer.epoch(), mean_loss, val_epe));
    }
    if !config.checkpoint_path().exists() {
        save_checkpoint(&trainer.best_model()?, &config.checkpoint_path())?;
    }

    let mut run = RunManifest::open(config)?;
    run.begin_run(config)?;
    run.record_stage(
        "train",
        "_all",
        &[config.checkpoint_path(), state_path],
        Some(format!(
            "best_val_epe={} best_epoch={}",
            trainer.best_val_epe(),
            trainer.best_epoch()
        )),
    )?;

    Ok(TrainSummary {
        best_val_epe: trainer.best_val_epe(),
        best_epoch: trainer.best_epoch(),
        history,
    })
}

#[derive(Debug)]
pub struct TrainSummary {
    pub best_val_epe: f64,
    pub best_epoch: usize,
    /// `(epoch, mean train loss, val EPE)` per epoch of this invocation.
    pub history: Vec<(usize, f64, f64)>,
}

/// Assemble crop samples for a record set. The corrupted/composed choice
/// and the crop origins derive from per-pair hashes, so the sample set is
/// identical however the stage is invoked.
fn build_samples(config: &PipelineConfig, records: &[&PairRecord]) -> Result<Vec<TrainSample>> {
    let crop = config.refiner.crop;
    let mut samples = Vec::new();
    for record in records {
        let image_a = Image::load(&record.image_a)?;
        let image_b = Image::load(&record.image_b)?;
        let gt = flowcore::read_flo(&record.gt_flow)?;

        let composed_path = composed_flow_path(config, &record.id);
        let pick = (fnv1a64(record.id.as_bytes()) % 1000) as f64 / 1000.0;
        let input_flow = if pick < config.refiner.mix_corrupted || !composed_path.exists() {
            read_flow_with_mask(&record.corrupted_flow)?
        } else {
            read_flow_with_mask(&composed_path)?
        };

        let (w, h) = (gt.width(), gt.height());
        if w < crop || h < crop {
            return Err(PipelineError::EmptyStage(format!(
                "pair {} is {w}x{h}, smaller than the {crop} px training crop",
                record.id
            )));
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed ^ fnv1a64(record.id.as_bytes()) ^ 0xC509);
        for _ in 0..config.refiner.crops_per_pair.max(1) {
            let x0 = rng.random_range(0..=w - crop);
            let y0 = rng.random_range(0..=h - crop);
            samples.push(TrainSample {
                image_a: image_a.crop(x0, y0, crop, crop)?,
                image_b: image_b.crop(x0, y0, crop, crop)?,
                input_flow: input_flow.crop(x0, y0, crop, crop)?,
                gt_flow: gt.crop(x0, y0, crop, crop)?,
            });
        }
    }
    Ok(samples)
}
