use rayon::prelude::*;

use flowcore::compose_chain;

use crate::config::FlowSource;
use crate::manifest::RunManifest;
use crate::stages::{
    chain_dir, composed_flow_path, load_dataset, read_flow_with_mask, select_pairs,
    write_flow_with_mask,
};
use crate::{PipelineConfig, Result};

/// Left-fold the stepwise flows of each pair into a composed flow, writing
/// the result plus a validity-coverage note. Under `corrupted_gt` the
/// stored corrupted flow is adopted as the composed flow directly.
pub fn cmd_compose(config: &PipelineConfig, pair: Option<&str>) -> Result<usize> {
    let records = load_dataset(config)?;
    let targets = select_pairs(&records, pair)?;
    let mut run = RunManifest::open(config)?;
    run.begin_run(config)?;
    std::fs::create_dir_all(config.work_dir.join("composed"))?;

    let pending: Vec<_> = targets
        .iter()
        .filter(|r| !run.outputs_verify("compose", &r.id))
        .collect();

    let results: Vec<Result<(String, Vec<std::path::PathBuf>, f64)>> = pending
        .par_iter()
        .map(|record| {
            let out = composed_flow_path(config, &record.id);
            let composed = match config.flow_source {
                FlowSource::CorruptedGt => read_flow_with_mask(&record.corrupted_flow)?,
                _ => {
                    let dir = chain_dir(config, &record.id);
                    let steps = (0..config.k)
                        .map(|t| read_flow_with_mask(&dir.join(format!("step_{t:03}.flo"))))
                        .collect::<Result<Vec<_>>>()?;
                    compose_chain(&steps)?
                }
            };
            let coverage = composed.valid_fraction();
            let written = write_flow_with_mask(&composed, &out)?;
            Ok((record.id.clone(), written, coverage))
        })
        .collect();

    let mut produced = 0;
    for result in results {
        let (id, written, coverage) = result?;
        run.record_stage(
            "compose",
            &id,
            &written,
            Some(format!("valid_coverage={coverage:.6}")),
        )?;
        produced += 1;
    }
    Ok(produced)
}
