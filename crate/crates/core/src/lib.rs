//! Shape-aware segmentation losses built on contour Fourier descriptors.
//!
//! The pipeline runs from a binary mask to a traced outer contour, then a
//! distance-to-centroid profile over arc length, then harmonic amplitudes
//! `Z_n`. The [`loss`] module turns amplitude gaps between ground truth and
//! prediction into a multiplicative penalty on cross-entropy with trainable
//! per-harmonic weights. [`trainer`] exercises the loss end to end on a small
//! convolutional segmenter and synthetic data from [`data`].

pub mod contour;
pub mod data;
pub mod distance;
pub mod error;
pub mod fourier;
pub mod io;
pub mod loss;
pub mod mask;
pub mod metrics;
pub mod trainer;

pub use contour::{
    radial_profile, trace_contours, trace_largest, Contour, ObjectSelector, RadialProfile,
};
pub use error::{Result, ShapeError};
pub use fourier::{describe_largest, fourier_coefficients, FourierDescriptors, ShapeDescription};
pub use loss::{cross_entropy, fourier_loss, LossBreakdown, MatchMode, OmegaState, ProbabilityMap};
pub use mask::BinaryMask;
pub use metrics::{hausdorff_distance, ImageMetrics, MetricSummary, Scores};
