//! Stage commands. Each stage reads the dataset manifest, skips pairs whose
//! recorded outputs still verify, and appends what it produced to the run
//! manifest. Stages communicate only through files under the work dir.

mod chain;
mod compose;
mod eval;
mod perturb;
mod refine;
mod report;
mod train;

pub use chain::cmd_chain;
pub use compose::cmd_compose;
pub use eval::cmd_eval;
pub use perturb::cmd_perturb;
pub use refine::cmd_refine;
pub use report::cmd_report;
pub use train::{cmd_train, TrainSummary};

use std::path::PathBuf;

use flowcore::FlowField;
use synthmotion::{read_manifest, PairRecord, SourceEntry, Split};

use crate::manifest::fnv1a64;
use crate::{PipelineConfig, PipelineError, Result};

/// Supported raster extensions for dataset discovery.
const IMAGE_EXTS: [&str; 3] = ["png", "pgm", "ppm"];

/// Find source imagery under the dataset root. An `A/`, `B/` (optional
/// `label/`) layout is treated as co-registered pairs whose B side gets
/// perturbed; otherwise every image in the root is its own pair base.
pub fn discover_sources(config: &PipelineConfig) -> Result<Vec<SourceEntry>> {
    let root = &config.dataset_root;
    let a_dir = root.join("A");
    let b_dir = root.join("B");
    let label_dir = root.join("label");

    let list_images = |dir: &std::path::Path| -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let ext = path
                .extension()
                .map(|e| e.to_string_lossy().to_lowercase())
                .unwrap_or_default();
            if path.is_file() && IMAGE_EXTS.contains(&ext.as_str()) {
                out.push(path);
            }
        }
        out.sort();
        Ok(out)
    };

    if a_dir.is_dir() && b_dir.is_dir() {
        let mut sources = Vec::new();
        for a_path in list_images(&a_dir)? {
            let name = a_path.file_name().expect("listed file").to_owned();
            let b_path = b_dir.join(&name);
            if !b_path.exists() {
                continue;
            }
            let mask = label_dir.join(&name);
            sources.push(SourceEntry {
                id: a_path
                    .file_stem()
                    .expect("listed file")
                    .to_string_lossy()
                    .into_owned(),
                image_a: a_path,
                image_b: Some(b_path),
                change_mask: mask.exists().then_some(mask),
            });
        }
        return Ok(sources);
    }

    let sources = list_images(root)?
        .into_iter()
        .map(|path| SourceEntry {
            id: path
                .file_stem()
                .expect("listed file")
                .to_string_lossy()
                .into_owned(),
            image_a: path,
            image_b: None,
            change_mask: None,
        })
        .collect();
    Ok(sources)
}

/// Load the dataset manifest produced by `perturb`.
pub fn load_dataset(config: &PipelineConfig) -> Result<Vec<PairRecord>> {
    let path = config.manifest_path();
    if !path.exists() {
        return Err(PipelineError::MissingManifest(path));
    }
    Ok(read_manifest(&path)?)
}

/// Usable records, optionally narrowed to one pair id.
pub fn select_pairs<'a>(records: &'a [PairRecord], pair: Option<&str>) -> Result<Vec<&'a PairRecord>> {
    match pair {
        Some(id) => {
            let found = records
                .iter()
                .find(|r| r.id == id)
                .ok_or_else(|| PipelineError::UnknownPair(id.to_string()))?;
            Ok(vec![found])
        }
        None => Ok(records.iter().filter(|r| r.is_ok()).collect()),
    }
}

pub fn split_records(records: &[PairRecord], split: Split) -> Vec<&PairRecord> {
    records
        .iter()
        .filter(|r| r.is_ok() && r.split == split)
        .collect()
}

/// Stable per-pair seed derived from the run seed.
pub fn pair_seed(config: &PipelineConfig, id: &str) -> u64 {
    config.seed ^ fnv1a64(id.as_bytes())
}

pub fn chain_dir(config: &PipelineConfig, id: &str) -> PathBuf {
    config.work_dir.join("chains").join(id)
}

pub fn composed_flow_path(config: &PipelineConfig, id: &str) -> PathBuf {
    config.work_dir.join("composed").join(format!("{id}.flo"))
}

pub fn refined_flow_path(config: &PipelineConfig, id: &str) -> PathBuf {
    config.work_dir.join("refined").join(format!("{id}.flo"))
}

fn mask_sidecar(path: &std::path::Path) -> PathBuf {
    path.with_extension("mask.png")
}

/// Persist a flow's validity mask next to its `.flo` file (the flow format
/// itself has no mask slot). Returns every written path so stages can
/// journal them.
pub fn write_flow_with_mask(flow: &FlowField, path: &std::path::Path) -> Result<Vec<PathBuf>> {
    flowcore::write_flo(flow, path)?;
    let mut written = vec![path.to_path_buf()];
    if flow.valid_mask().iter().any(|v| !v) {
        let img = flowcore::Image::from_fn(flow.width(), flow.height(), 1, |x, y, _| {
            if flow.is_valid(x, y) {
                1.0
            } else {
                0.0
            }
        });
        let sidecar = mask_sidecar(path);
        img.save(&sidecar)?;
        written.push(sidecar);
    }
    Ok(written)
}

/// Read a flow and apply its mask sidecar when present.
pub fn read_flow_with_mask(path: &std::path::Path) -> Result<FlowField> {
    let mut flow = flowcore::read_flo(path)?;
    let sidecar = mask_sidecar(path);
    if sidecar.exists() {
        let img = flowcore::Image::load(&sidecar)?;
        if img.width() == flow.width() && img.height() == flow.height() {
            for (m, v) in flow.valid_mask_mut().iter_mut().zip(img.data()) {
                *m = *v > 0.5;
            }
        }
    }
    Ok(flow)
}
