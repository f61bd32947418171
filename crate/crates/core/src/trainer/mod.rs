//! Desk-scale training of [`TinySegNet`] under the shape-aware loss and the
//! comparison losses, plus evaluation and model persistence.

mod eval;
mod model;
pub mod net;
mod objective;
mod run;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::loss::MatchMode;

pub use eval::{evaluate, evaluate_predictions, Evaluation};
pub use model::{config_hash, load_model, read_model, save_model, write_model, ModelHeader};
pub use net::{ForwardCache, LayerShape, TinySegNet};
pub use objective::{backward, ce_logit_gradient, objective_gradient, objective_value, Objective};
pub use run::{train, train_from, EpochRecord, RunLog, StopReason};

/// Which loss drives the network parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    CrossEntropy,
    /// `(1 + β) · CE` with ω trained alongside the network.
    FourierAdaptive,
    /// `(1 + β) · CE` with ω frozen at its initial value.
    FourierFixed,
    HausdorffPenalty,
    ActiveContour,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::CrossEntropy,
        LossKind::FourierAdaptive,
        LossKind::FourierFixed,
        LossKind::HausdorffPenalty,
        LossKind::ActiveContour,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::CrossEntropy => "cross-entropy",
            Self::FourierAdaptive => "fourier-adaptive",
            Self::FourierFixed => "fourier-fixed",
            Self::HausdorffPenalty => "hausdorff-penalty",
            Self::ActiveContour => "active-contour",
        }
    }

    pub fn is_fourier(&self) -> bool {
        matches!(self, Self::FourierAdaptive | Self::FourierFixed)
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LossKind {
    type Err = ShapeError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ShapeError::InvalidParams(format!("unknown loss kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    /// Number of harmonics in the shape penalty.
    pub order: usize,
    pub omega_init: Vec<f64>,
    pub param_lr: f64,
    pub omega_lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// `None` disables early stopping.
    pub patience: Option<usize>,
    pub warmup_epochs: usize,
    /// Seeds weight initialisation and the sample order.
    pub seed: u64,
    pub match_mode: MatchMode,
    /// Distance exponent of the Hausdorff penalty.
    pub alpha: f64,
    /// Region weight of the active-contour loss.
    pub lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::FourierAdaptive,
            order: 2,
            omega_init: vec![3.0, 1.0],
            param_lr: 5e-2,
            omega_lr: 1e-3,
            batch_size: 8,
            max_epochs: 60,
            patience: Some(10),
            warmup_epochs: 5,
            seed: 0,
            match_mode: MatchMode::Largest,
            alpha: 0.2,
            lambda: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ShapeError::InvalidParams(m));
        if self.order < 1 {
            return Err(ShapeError::InvalidOrder {
                order: self.order,
                max: 0,
            });
        }
        if self.omega_init.len() != self.order {
            return Err(ShapeError::OrderMismatch {
                descriptors: self.order,
                omegas: self.omega_init.len(),
            });
        }
        if self
            .omega_init
            .iter()
            .any(|w| !(*w >= 0.0) || !w.is_finite())
        {
            return bad("omega_init values must be finite and >= 0".into());
        }
        for (name, v) in [("param_lr", self.param_lr), ("omega_lr", self.omega_lr)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1".into());
        }
        if self.patience == Some(0) {
            return bad("patience must be >= 1".into());
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        Ok(())
    }
}
