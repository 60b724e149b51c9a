use std::path::PathBuf;

use rayon::prelude::*;

use evalmetrics::{
    cd_scores, confusion, ecc, epe, psnr, psnr_display, ssim, ChangeMask, EvalReport, PairMetrics,
};
use flowcore::{warp_image, FlowField, Image, ValidMaskPolicy};
use synthmotion::{PairRecord, Split};

use crate::config::{FlowSource, MaskPolicy};
use crate::manifest::RunManifest;
use crate::stages::{
    composed_flow_path, load_dataset, read_flow_with_mask, refined_flow_path, split_records,
};
use crate::{PipelineConfig, PipelineError, Result};

/// Alignment variants evaluated per pair, mirroring the usual comparison:
/// no correction, one long-range estimate, the composed chain, and the
/// composed chain after residual refinement.
const VARIANTS: [&str; 4] = ["unaligned", "direct", "composed", "refined"];

/// Score a split: per pair and per available variant, registration error
/// against the exact ground-truth flow plus warped-image quality, and
/// change-detection scores when prediction masks are supplied. Unavailable
/// variants are skipped and listed in the run manifest.
pub fn cmd_eval(config: &PipelineConfig, split: Split) -> Result<EvalReport> {
    let records = load_dataset(config)?;
    let targets = split_records(&records, split);
    if targets.is_empty() {
        return Err(PipelineError::EmptyStage(format!(
            "no usable pairs in split {split:?}"
        )));
    }

    let outcome: Vec<Result<(Vec<PairMetrics>, Vec<String>)>> = targets
        .par_iter()
        .map(|record| eval_pair(config, record))
        .collect();

    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for r in outcome {
        let (pair_rows, pair_notes) = r?;
        rows.extend(pair_rows);
        notes.extend(pair_notes);
    }
    if rows.is_empty() {
        return Err(PipelineError::EmptyStage(
            "no variant produced any metrics".into(),
        ));
    }

    let split_name = match split {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    };
    let report = EvalReport::from_pairs(split_name, rows);
    let dir = config.work_dir.join("reports");
    std::fs::create_dir_all(&dir)?;
    let json_path = dir.join(format!("eval_{split_name}.json"));
    let csv_path = dir.join(format!("eval_{split_name}.csv"));
    report.write_json(&json_path)?;
    report.write_csv(&csv_path)?;

    let mut run = RunManifest::open(config)?;
    run.begin_run(config)?;
    run.record_stage(
        "eval",
        &format!("_split_{split_name}"),
        &[json_path, csv_path],
        (!notes.is_empty()).then(|| notes.join("; ")),
    )?;
    Ok(report)
}

fn eval_pair(
    config: &PipelineConfig,
    record: &PairRecord,
) -> Result<(Vec<PairMetrics>, Vec<String>)> {
    let image_a = Image::load(&record.image_a)?;
    let image_b = Image::load(&record.image_b)?;
    let gt = flowcore::read_flo(&record.gt_flow)?;
    let gt_mask = record
        .change_mask
        .as_ref()
        .map(|p| Image::load(p).map(|img| ChangeMask::from_image(&img)))
        .transpose()?;

    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for variant in VARIANTS {
        match variant_flow(config, record, variant, &image_a, &image_b)? {
            Some(flow) => {
                rows.push(score_variant(
                    config, record, variant, &image_a, &image_b, &gt, &flow, &gt_mask,
                )?);
            }
            None => notes.push(format!("{}: {variant} flow unavailable", record.id)),
        }
    }
    Ok((rows, notes))
}

/// Resolve the flow for a variant; `None` when its artifact is missing.
fn variant_flow(
    config: &PipelineConfig,
    record: &PairRecord,
    variant: &str,
    image_a: &Image,
    image_b: &Image,
) -> Result<Option<FlowField>> {
    let from_file = |path: PathBuf| -> Result<Option<FlowField>> {
        if path.exists() {
            Ok(Some(read_flow_with_mask(&path)?))
        } else {
            Ok(None)
        }
    };
    match variant {
        "unaligned" => Ok(Some(FlowField::zeros(record.width, record.height))),
        "direct" => match config.flow_source {
            FlowSource::BuiltinEstimator => Ok(Some(stepflow::estimate_flow(
                image_a,
                image_b,
                &config.estimator.to_config(),
            )?)),
            FlowSource::AnalyticGt => Ok(Some(flowcore::read_flo(&record.gt_flow)?)),
            FlowSource::CorruptedGt => Ok(Some(read_flow_with_mask(&record.corrupted_flow)?)),
            FlowSource::ExternalFloDir => {
                let dir = config
                    .external_flow_dir
                    .as_ref()
                    .expect("validated in config");
                from_file(dir.join(&record.id).join("direct.flo"))
            }
        },
        "composed" => from_file(composed_flow_path(config, &record.id)),
        "refined" => from_file(refined_flow_path(config, &record.id)),
        other => unreachable!("unknown variant {other}"),
    }
}

#[allow(clippy::too_many_arguments)]
fn score_variant(
    config: &PipelineConfig,
    record: &PairRecord,
    variant: &str,
    image_a: &Image,
    image_b: &Image,
    gt: &FlowField,
    flow: &FlowField,
    gt_mask: &Option<ChangeMask>,
) -> Result<PairMetrics> {
    let n = record.width * record.height;
    let epe_mask: Vec<bool> = match config.metric_mask_policy {
        MaskPolicy::Masked => flow
            .valid_mask()
            .iter()
            .zip(gt.valid_mask())
            .map(|(a, b)| *a && *b)
            .collect(),
        MaskPolicy::Full => vec![true; n],
    };
    let epe_val = epe(flow, gt, &epe_mask).ok();

    let (warped, warp_mask) = warp_image(image_b, flow, ValidMaskPolicy::ClampToEdge)?;
    let ecc_val = match config.metric_mask_policy {
        MaskPolicy::Masked => ecc(&warped, image_a, Some(&warp_mask)).ok(),
        MaskPolicy::Full => ecc(&warped, image_a, None).ok(),
    };
    let psnr_val = psnr(&warped, image_a, 1.0).ok().map(psnr_display);
    let ssim_val = ssim(&warped, image_a).ok();

    // Change masks are ingested, never predicted: score only when an
    // external prediction exists for this variant.
    let (cm, cd) = match (gt_mask, &config.pred_mask_dir) {
        (Some(gt_mask), Some(dir)) => {
            let pred_path = dir.join(variant).join(format!("{}.png", record.id));
            if pred_path.exists() {
                let pred = ChangeMask::from_image(&Image::load(&pred_path)?);
                let cm = confusion(&pred, gt_mask)?;
                (Some(cm), Some(cd_scores(&cm)))
            } else {
                (None, None)
            }
        }
        _ => (None, None),
    };

    Ok(PairMetrics {
        id: record.id.clone(),
        variant: variant.to_string(),
        epe: epe_val,
        ecc: ecc_val,
        psnr: psnr_val,
        ssim: ssim_val,
        valid_fraction: Some(flow.valid_fraction()),
        confusion: cm,
        cd,
    })
}
