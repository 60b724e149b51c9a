use flowcore::Image;
use serde::{Deserialize, Serialize};

use crate::{MetricsError, Result};

/// Per-pixel binary change labels (1 = change).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl ChangeMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(MetricsError::DimensionMismatch(format!(
                "labels {} vs {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&v| v > 1) {
            return Err(MetricsError::BadLabel(bad));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// Threshold an intensity image at 0.5 (color is reduced to luma).
    pub fn from_image(img: &Image) -> Self {
        let luma = img.to_luma();
        let labels = luma.data().iter().map(|&v| (v > 0.5) as u8).collect();
        Self {
            width: img.width(),
            height: img.height(),
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

/// Pixel counts with change as the positive class. Additive across pairs,
/// so split-level scores come from summed counts rather than averaged
/// per-pair scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }
}

/// Count the confusion matrix of a predicted mask against ground truth.
pub fn confusion(pred: &ChangeMask, gt: &ChangeMask) -> Result<ConfusionMatrix> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        match (p, g) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            _ => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Change-detection scores derived from a confusion matrix. Classes with a
/// zero denominator score 0 and raise the `degenerate` flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdScores {
    pub f1_change: f64,
    pub f1_nochange: f64,
    pub mf1: f64,
    pub iou_change: f64,
    pub iou_nochange: f64,
    pub miou: f64,
    pub oa: f64,
    pub degenerate: bool,
}

pub fn cd_scores(cm: &ConfusionMatrix) -> CdScores {
    let mut degenerate = false;
    let mut ratio = |num: u64, den: u64| -> f64 {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let f1_change = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_);
    let f1_nochange = ratio(2 * cm.tn, 2 * cm.tn + cm.fn_ + cm.fp);
    let iou_change = ratio(cm.tp, cm.tp + cm.fp + cm.fn_);
    let iou_nochange = ratio(cm.tn, cm.tn + cm.fn_ + cm.fp);
    let oa = ratio(cm.tp + cm.tn, cm.total());
    CdScores {
        f1_change,
        f1_nochange,
        mf1: (f1_change + f1_nochange) / 2.0,
        iou_change,
        iou_nochange,
        miou: (iou_change + iou_nochange) / 2.0,
        oa,
        degenerate,
    }
}
