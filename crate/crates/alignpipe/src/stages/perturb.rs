use synthmotion::{generate_dataset, write_manifest, DatasetParams, PairRecord};

use crate::manifest::RunManifest;
use crate::stages::discover_sources;
use crate::{PipelineConfig, PipelineError, Result};

/// Generate the perturbed dataset: sampled transforms, perturbed images,
/// exact and corrupted flows, and the split manifest.
pub fn cmd_perturb(config: &PipelineConfig) -> Result<Vec<PairRecord>> {
    let sources = discover_sources(config)?;
    let params = DatasetParams {
        bounds: config.bounds.to_bounds(),
        corrupt: config.corrupt.to_params(),
        seed: config.seed,
        split_fractions: (config.split.train, config.split.val, config.split.test),
    };
    std::fs::create_dir_all(&config.work_dir)?;
    let records = generate_dataset(&sources, &config.work_dir, &params)?;
    if !records.iter().any(|r| r.is_ok()) {
        return Err(PipelineError::EmptyStage(
            "perturb produced no usable pairs".into(),
        ));
    }
    write_manifest(&records, &config.manifest_path())?;

    let mut run = RunManifest::open(config)?;
    run.begin_run(config)?;
    run.record_stage("perturb", "_manifest", &[config.manifest_path()], None)?;
    for r in &records {
        if r.is_ok() {
            run.record_stage(
                "perturb",
                &r.id,
                &[
                    r.image_a.clone(),
                    r.image_b.clone(),
                    r.gt_flow.clone(),
                    r.corrupted_flow.clone(),
                ],
                None,
            )?;
        } else {
            run.record_stage("perturb", &r.id, &[], r.error.clone())?;
        }
    }
    Ok(records)
}
