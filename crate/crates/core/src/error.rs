use std::io;

use thiserror::Error;

/// Errors produced anywhere in the shape pipeline.
#[derive(Debug, Error)]
pub enum ShapeError {
    #[error("mask has no foreground pixel")]
    EmptyMask,
    #[error("ground truth has no foreground object")]
    EmptyGroundTruth,
    #[error("object boundary has {boundary_pixels} distinct pixels, at least 4 are required")]
    DegenerateObject { boundary_pixels: usize },
    #[error("centroid coincides with contour point {index}")]
    CentroidOnContour { index: usize },
    #[error("invalid descriptor order {order} (allowed 1..={max})")]
    InvalidOrder { order: usize, max: usize },
    #[error("arc length {arc} outside [0, {total}]")]
    ArcOutOfRange { arc: f64, total: f64 },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("descriptor order {descriptors} does not match {omegas} loss coefficients")]
    OrderMismatch { descriptors: usize, omegas: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dataset split is empty")]
    EmptyDataset,
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ShapeError {
    /// True for failures caused by input content rather than by the file system
    /// or the file format.
    pub fn is_domain(&self) -> bool {
        !matches!(
            self,
            ShapeError::Io(_) | ShapeError::Json(_) | ShapeError::Format { .. }
        )
    }
}

pub type Result<T, E = ShapeError> = std::result::Result<T, E>;
