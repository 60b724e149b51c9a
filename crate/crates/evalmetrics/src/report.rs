use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cd::{cd_scores, CdScores, ConfusionMatrix};
use crate::Result;

/// Scores of one pair under one alignment variant. Missing metrics stay
/// `None` (e.g. no change masks supplied, or a variant's flow absent).
/// PSNR values are stored display-capped (99 dB sentinel for identical
/// images) so reports remain plain JSON numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairMetrics {
    pub id: String,
    pub variant: String,
    pub epe: Option<f64>,
    pub ecc: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub valid_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cd: Option<CdScores>,
}

/// Split-level aggregate: registration and quality metrics are per-pair
/// means; change-detection scores are recomputed from summed confusion
/// counts, never averaged per-pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub pairs: usize,
    pub mean_epe: Option<f64>,
    pub mean_ecc: Option<f64>,
    pub mean_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cd: Option<CdScores>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantAggregate {
    pub variant: String,
    pub aggregate: AggregateMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub pairs: Vec<PairMetrics>,
    pub aggregates: Vec<VariantAggregate>,
}

impl EvalReport {
    /// Build a report from per-pair records, grouping aggregates by variant
    /// in first-appearance order.
    pub fn from_pairs(split: impl Into<String>, pairs: Vec<PairMetrics>) -> Self {
        let mut variants: Vec<String> = Vec::new();
        for p in &pairs {
            if !variants.contains(&p.variant) {
                variants.push(p.variant.clone());
            }
        }
        let aggregates = variants
            .into_iter()
            .map(|variant| {
                let rows: Vec<&PairMetrics> =
                    pairs.iter().filter(|p| p.variant == variant).collect();
                let mean = |get: fn(&PairMetrics) -> Option<f64>| -> Option<f64> {
                    let vals: Vec<f64> = rows.iter().filter_map(|p| get(p)).collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                };
                let confusion = rows
                    .iter()
                    .filter_map(|p| p.confusion)
                    .reduce(|a, b| a.merge(&b));
                let cd = confusion.as_ref().map(cd_scores);
                VariantAggregate {
                    variant,
                    aggregate: AggregateMetrics {
                        pairs: rows.len(),
                        mean_epe: mean(|p| p.epe),
                        mean_ecc: mean(|p| p.ecc),
                        mean_psnr: mean(|p| p.psnr),
                        mean_ssim: mean(|p| p.ssim),
                        confusion,
                        cd,
                    },
                }
            })
            .collect();
        EvalReport {
            split: split.into(),
            pairs,
            aggregates,
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<EvalReport> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Delimiter-separated table for spreadsheets: per-pair rows followed by
    /// one `aggregate` row per variant.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "id,variant,epe,ecc,psnr,ssim,valid_fraction,f1_change,f1_nochange,mf1,miou,oa"
        )?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let cd_cols = |cd: &Option<CdScores>| -> String {
            match cd {
                Some(s) => format!(
                    "{},{},{},{},{}",
                    s.f1_change, s.f1_nochange, s.mf1, s.miou, s.oa
                ),
                None => ",,,,".into(),
            }
        };
        for p in &self.pairs {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.id,
                p.variant,
                fmt(p.epe),
                fmt(p.ecc),
                fmt(p.psnr),
                fmt(p.ssim),
                fmt(p.valid_fraction),
                cd_cols(&p.cd)
            )?;
        }
        for va in &self.aggregates {
            let a = &va.aggregate;
            writeln!(
                out,
                "aggregate,{},{},{},{},{},,{}",
                va.variant,
                fmt(a.mean_epe),
                fmt(a.mean_ecc),
                fmt(a.mean_psnr),
                fmt(a.mean_ssim),
                cd_cols(&a.cd)
            )?;
        }
        Ok(())
    }
}
