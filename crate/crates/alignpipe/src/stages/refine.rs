use rayon::prelude::*;
use synthmotion::Split;

use flowcore::Image;
use refiner::load_checkpoint;

use crate::manifest::RunManifest;
use crate::stages::{
    composed_flow_path, load_dataset, read_flow_with_mask, refined_flow_path, split_records,
    write_flow_with_mask,
};
use crate::{PipelineConfig, PipelineError, Result};

/// Refine the composed flow of every pair in a split with the trained
/// model, writing the results alongside the composed ones. Pairs without a
/// composed flow fall back to their stored corrupted flow.
pub fn cmd_refine(config: &PipelineConfig, split: Split) -> Result<usize> {
    let ckpt = config.checkpoint_path();
    if !ckpt.exists() {
        return Err(PipelineError::MissingCheckpoint(ckpt));
    }
    let model = load_checkpoint(&ckpt, &config.refiner.to_config(config.seed)?)?;

    let records = load_dataset(config)?;
    let targets = split_records(&records, split);
    let mut run = RunManifest::open(config)?;
    run.begin_run(config)?;
    std::fs::create_dir_all(config.work_dir.join("refined"))?;

    let pending: Vec<_> = targets
        .iter()
        .filter(|r| !run.outputs_verify("refine", &r.id))
        .collect();

    let results: Vec<Result<(String, Vec<std::path::PathBuf>)>> = pending
        .par_iter()
        .map(|record| {
            let image_a = Image::load(&record.image_a)?;
            let image_b = Image::load(&record.image_b)?;
            let composed = composed_flow_path(config, &record.id);
            let input = if composed.exists() {
                read_flow_with_mask(&composed)?
            } else {
                read_flow_with_mask(&record.corrupted_flow)?
            };
            let refined = model.refine(&image_a, &image_b, &input)?;
            let out = refined_flow_path(config, &record.id);
            let written = write_flow_with_mask(&refined, &out)?;
            Ok((record.id.clone(), written))
        })
        .collect();

    let mut produced = 0;
    for result in results {
        let (id, written) = result?;
        run.record_stage("refine", &id, &written, None)?;
        produced += 1;
    }
    Ok(produced)
}
