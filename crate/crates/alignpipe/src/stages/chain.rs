use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use flowcore::Image;
use synthmotion::{make_morph_chain, PairRecord};

use crate::config::FlowSource;
use crate::manifest::RunManifest;
use crate::stages::{chain_dir, load_dataset, pair_seed, select_pairs, write_flow_with_mask};
use crate::{PipelineConfig, PipelineError, Result};

/// Write morph frames and stepwise flows for the selected pairs. The flow
/// source decides where steps come from: analytic transforms, the built-in
/// estimator over the frames, or externally computed `.flo` files.
pub fn cmd_chain(config: &PipelineConfig, pair: Option<&str>) -> Result<usize> {
    if config.flow_source == FlowSource::CorruptedGt {
        // Nothing to produce: compose consumes the stored corrupted flow.
        return Ok(0);
    }
    let records = load_dataset(config)?;
    let targets = select_pairs(&records, pair)?;
    let mut run = RunManifest::open(config)?;
    run.begin_run(config)?;

    let pending: Vec<&&PairRecord> = targets
        .iter()
        .filter(|r| !run.outputs_verify("chain", &r.id))
        .collect();

    let results: Vec<Result<(String, Vec<std::path::PathBuf>)>> = pending
        .par_iter()
        .map(|record| build_chain(config, record))
        .collect();

    let mut produced = 0;
    for result in results {
        let (id, outputs) = result?;
        run.record_stage("chain", &id, &outputs, None)?;
        produced += 1;
    }
    Ok(produced)
}

fn build_chain(
    config: &PipelineConfig,
    record: &PairRecord,
) -> Result<(String, Vec<std::path::PathBuf>)> {
    let dir = chain_dir(config, &record.id);
    std::fs::create_dir_all(&dir)?;
    let base = Image::load(&record.image_a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(config, &record.id));
    let chain = make_morph_chain(
        &base,
        &record.transform,
        config.k,
        config.appearance.to_ramp().as_ref(),
        &mut rng,
    )?;

    let mut outputs = Vec::new();
    for (t, frame) in chain.frames.iter().enumerate() {
        let path = dir.join(format!("frame_{t:03}.png"));
        frame.save(&path)?;
        outputs.push(path);
    }

    let step_flows = match config.flow_source {
        FlowSource::AnalyticGt => chain.step_flows,
        FlowSource::BuiltinEstimator => {
            stepflow::estimate_chain(&chain.frames, &config.estimator.to_config())?
        }
        FlowSource::ExternalFloDir => {
            let ext_dir = config
                .external_flow_dir
                .as_ref()
                .expect("validated in config")
                .join(&record.id);
            stepflow::load_external_flows(&ext_dir, config.k, (record.width, record.height))?
        }
        FlowSource::CorruptedGt => unreachable!("handled by cmd_chain"),
    };
    if step_flows.len() != config.k {
        return Err(PipelineError::EmptyStage(format!(
            "pair {}: expected {} step flows, got {}",
            record.id,
            config.k,
            step_flows.len()
        )));
    }
    for (t, flow) in step_flows.iter().enumerate() {
        let path = dir.join(format!("step_{t:03}.flo"));
        outputs.extend(write_flow_with_mask(flow, &path)?);
    }
    Ok((record.id.clone(), outputs))
}
