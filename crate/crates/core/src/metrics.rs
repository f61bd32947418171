//! Pixel-level segmentation scores and the symmetric Hausdorff distance.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distance;
use crate::error::{Result, ShapeError};
use crate::mask::{ensure_same_dims, BinaryMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

pub fn confusion_counts(gt: &BinaryMask, pred: &BinaryMask) -> Result<ConfusionCounts> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    let mut k = ConfusionCounts::default();
    for (&g, &p) in gt.data().iter().zip(pred.data()) {
        match (g != 0, p != 0) {
            (true, true) => k.tp += 1,
            (false, true) => k.fp += 1,
            (true, false) => k.fn_ += 1,
            (false, false) => k.tn += 1,
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
    pub fscore: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall, IoU and f-score; any `0/0` is reported as 0.
pub fn scores(k: ConfusionCounts) -> Scores {
    let precision = ratio(k.tp, k.tp + k.fp);
    let recall = ratio(k.tp, k.tp + k.fn_);
    let fscore = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores {
        precision,
        recall,
        iou: ratio(k.tp, k.tp + k.fp + k.fn_),
        fscore,
    }
}

fn directed(from: &BinaryMask, to_distance: &[f64]) -> f64 {
    from.data()
        .iter()
        .zip(to_distance)
        .filter(|(&v, _)| v != 0)
        .map(|(_, &d)| d)
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between the foreground pixel sets.
pub fn hausdorff_distance(gt: &BinaryMask, pred: &BinaryMask) -> Result<f64> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    let to_gt = distance::distance_to_foreground(gt).ok_or(ShapeError::EmptyMask)?;
    let to_pred = distance::distance_to_foreground(pred).ok_or(ShapeError::EmptyMask)?;
    Ok(directed(gt, &to_pred).max(directed(pred, &to_gt)))
}

/// Metrics of one evaluated image. `hausdorff` is `None` when either mask is
/// empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub image_id: String,
    pub scores: Scores,
    pub hausdorff: Option<f64>,
}

pub fn evaluate_pair(
    image_id: impl Into<String>,
    gt: &BinaryMask,
    pred: &BinaryMask,
) -> Result<ImageMetrics> {
    let counts = confusion_counts(gt, pred)?;
    let hausdorff = match hausdorff_distance(gt, pred) {
        Ok(d) => Some(d),
        Err(ShapeError::EmptyMask) => None,
        Err(e) => return Err(e),
    };
    Ok(ImageMetrics {
        image_id: image_id.into(),
        scores: scores(counts),
        hausdorff,
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            count: n,
        }
    }
}

/// Per-metric summary over a set of images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub fscore: MeanStd,
    pub iou: MeanStd,
    /// Over images where the distance is defined.
    pub hausdorff: MeanStd,
    /// Images whose Hausdorff distance is undefined (an empty mask).
    pub hausdorff_missing: usize,
}

impl MetricSummary {
    pub fn of(rows: &[ImageMetrics]) -> Self {
        let pick = |f: fn(&Scores) -> f64| {
            MeanStd::of(&rows.iter().map(|r| f(&r.scores)).collect::<Vec<_>>())
        };
        let hd: Vec<f64> = rows.iter().filter_map(|r| r.hausdorff).collect();
        Self {
            precision: pick(|s| s.precision),
            recall: pick(|s| s.recall),
            fscore: pick(|s| s.fscore),
            iou: pick(|s| s.iou),
            hausdorff_missing: rows.len() - hd.len(),
            hausdorff: MeanStd::of(&hd),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// `image_id,precision,recall,fscore,iou,hausdorff` rows followed by `mean`
/// and `std` summary rows. Undefined distances are written as `NA`.
pub fn metrics_csv(rows: &[ImageMetrics]) -> String {
    let mut out = String::from("image_id,precision,recall,fscore,iou,hausdorff\n");
    for r in rows {
        let s = r.scores;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.image_id,
            s.precision,
            s.recall,
            s.fscore,
            s.iou,
            fmt_opt(r.hausdorff)
        );
    }
    let sum = MetricSummary::of(rows);
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    for (label, get) in [
        ("mean", (|m: &MeanStd| m.mean) as fn(&MeanStd) -> f64),
        ("std", |m: &MeanStd| m.std),
    ] {
        let _ = writeln!(
            out,
            "{label},{},{},{},{},{}",
            get(&sum.precision),
            get(&sum.recall),
            get(&sum.fscore),
            get(&sum.iou),
            fmt_opt(finite(get(&sum.hausdorff)))
        );
    }
    out
}
