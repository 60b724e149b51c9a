use std::fmt::Write as _;

use evalmetrics::EvalReport;

use crate::{PipelineConfig, PipelineError, Result};

/// Render the aggregate table of every eval report found under the work
/// dir. Returns the formatted text (the CLI prints it).
pub fn cmd_report(config: &PipelineConfig) -> Result<String> {
    let dir = config.work_dir.join("reports");
    let mut reports = Vec::new();
    if dir.is_dir() {
        let mut paths: Vec<_> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .map(|n| {
                        let n = n.to_string_lossy();
                        n.starts_with("eval_") && n.ends_with(".json")
                    })
                    .unwrap_or(false)
            })
            .collect();
        paths.sort();
        for path in paths {
            reports.push(EvalReport::read_json(&path)?);
        }
    }
    if reports.is_empty() {
        return Err(PipelineError::EmptyStage(format!(
            "no eval reports under {}; run `eval` first",
            dir.display()
        )));
    }

    let mut out = String::new();
    for report in &reports {
        writeln!(out, "split: {}", report.split).unwrap();
        writeln!(
            out,
            "{:<12} {:>6} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8} {:>8}",
            "variant", "pairs", "epe px", "ecc", "psnr dB", "ssim", "mF1", "mIoU", "OA"
        )
        .unwrap();
        for va in &report.aggregates {
            let a = &va.aggregate;
            let num = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
            let cd = a.cd.as_ref();
            writeln!(
                out,
                "{:<12} {:>6} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8} {:>8}",
                va.variant,
                a.pairs,
                num(a.mean_epe),
                num(a.mean_ecc),
                num(a.mean_psnr),
                num(a.mean_ssim),
                cd.map(|c| format!("{:.3}", c.mf1)).unwrap_or_else(|| "-".into()),
                cd.map(|c| format!("{:.3}", c.miou)).unwrap_or_else(|| "-".into()),
                cd.map(|c| format!("{:.3}", c.oa)).unwrap_or_else(|| "-".into()),
            )
            .unwrap();
        }
        writeln!(out).unwrap();
    }
    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, &out)?;
    Ok(out)
}
