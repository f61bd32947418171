//! Per-image evaluation of a trained network or of saved predictions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sample_name, Dataset, Partition};
use crate::error::{Result, ShapeError};
use crate::loss::ProbabilityMap;
use crate::mask::BinaryMask;
use crate::metrics::{self, ImageMetrics, MetricSummary};

use super::net::TinySegNet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rows: Vec<ImageMetrics>,
    pub summary: MetricSummary,
}

impl Evaluation {
    pub fn to_csv(&self) -> String {
        metrics::metrics_csv(&self.rows)
    }
}

/// Scores thresholded network predictions on one partition.
pub fn evaluate(net: &TinySegNet, dataset: &Dataset, part: Partition) -> Result<Evaluation> {
    let ids = dataset.ids(part);
    if ids.is_empty() {
        return Err(ShapeError::EmptyDataset);
    }
    let rows = ids
        .par_iter()
        .map(|&id| {
            let s = &dataset.samples[id];
            let (w, h) = s.image.dims();
            let pred = ProbabilityMap::new(w, h, net.forward(&s.image.pixels, w, h))?.threshold();
            metrics::evaluate_pair(sample_name(id), &s.mask, &pred)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = MetricSummary::of(&rows);
    Ok(Evaluation { rows, summary })
}

/// Scores `(image_id, ground truth, prediction)` triples.
pub fn evaluate_predictions(pairs: &[(String, BinaryMask, BinaryMask)]) -> Result<Evaluation> {
    if pairs.is_empty() {
        return Err(ShapeError::EmptyDataset);
    }
    let rows = pairs
        .iter()
        .map(|(id, gt, pred)| metrics::evaluate_pair(id.clone(), gt, pred))
        .collect::<Result<Vec<_>>>()?;
    let summary = MetricSummary::of(&rows);
    Ok(Evaluation { rows, summary })
}
