//! Training objectives and their gradients with respect to the network
//! output logits.

use crate::error::Result;
use crate::io::GrayImage;
use crate::loss::{self, ProbabilityMap, PROB_EPS};
use crate::mask::{ensure_same_dims, BinaryMask};

use super::net::TinySegNet;
use super::{LossKind, TrainConfig};

/// A differentiable per-image loss.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// `(1 + β) · CE` with β held constant.
    ScaledCrossEntropy {
        beta: f64,
    },
    /// `Σ (p̂ − p)² · w` with precomputed distance weights.
    HausdorffPenalty {
        weights: &'a [f64],
    },
    ActiveContour {
        lambda: f64,
    },
}

pub fn objective_value(pred: &ProbabilityMap, gt: &BinaryMask, obj: Objective<'_>) -> Result<f64> {
    ensure_same_dims(pred.dims(), gt.dims())?;
    Ok(match obj {
        Objective::ScaledCrossEntropy { beta } => (1.0 + beta) * loss::cross_entropy(pred, gt)?,
        Objective::HausdorffPenalty { weights } => pred
            .probs()
            .iter()
            .zip(gt.data())
            .zip(weights)
            .map(|((&p, &y), &w)| (p - y as f64).powi(2) * w)
            .sum(),
        Objective::ActiveContour { lambda } => loss::active_contour_loss(pred, gt, lambda)?,
    })
}

/// `∂CE/∂logit`: `p̂ − p` where the probability clamp is inactive, else 0.
pub fn ce_logit_gradient(probs: &[f64], gt: &BinaryMask) -> Vec<f64> {
    probs
        .iter()
        .zip(gt.data())
        .map(|(&p, &y)| {
            if (PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
                p - y as f64
            } else {
                0.0
            }
        })
        .collect()
}

pub(crate) fn logit_gradient(
    pred: &ProbabilityMap,
    gt: &BinaryMask,
    obj: Objective<'_>,
) -> Vec<f64> {
    let p = pred.probs();
    let through_sigmoid =
        |dp: Vec<f64>| -> Vec<f64> { dp.iter().zip(p).map(|(g, &q)| g * q * (1.0 - q)).collect() };
    match obj {
        Objective::ScaledCrossEntropy { beta } => {
            let mut g = ce_logit_gradient(p, gt);
            g.iter_mut().for_each(|v| *v *= 1.0 + beta);
            g
        }
        Objective::HausdorffPenalty { weights } => {
            through_sigmoid(loss::hausdorff_penalty_prob_grad(pred, gt, weights))
        }
        Objective::ActiveContour { lambda } => {
            through_sigmoid(loss::active_contour_prob_grad(pred, gt, lambda))
        }
    }
}

/// Forward pass, loss value and exact parameter gradient of `obj`.
pub fn objective_gradient(
    net: &TinySegNet,
    image: &GrayImage,
    gt: &BinaryMask,
    obj: Objective<'_>,
) -> Result<(ProbabilityMap, f64, Vec<f64>)> {
    ensure_same_dims(image.dims(), gt.dims())?;
    let cache = net.forward_cached(&image.pixels, image.width, image.height);
    let pred = ProbabilityMap::new(image.width, image.height, cache.probs.clone())?;
    let value = objective_value(&pred, gt, obj)?;
    let grad = net.backward(&cache, &logit_gradient(&pred, gt, obj));
    Ok((pred, value, grad))
}

/// Parameter gradient of the loss selected by `kind`. For the Fourier kinds
/// this is `(1 + β) · ∂CE/∂params`; plain cross-entropy ignores `beta`. The
/// comparison losses use the default α and λ.
pub fn backward(
    net: &TinySegNet,
    image: &GrayImage,
    gt: &BinaryMask,
    kind: LossKind,
    beta: f64,
) -> Result<Vec<f64>> {
    let defaults = TrainConfig::default();
    let weights;
    let obj = match kind {
        LossKind::CrossEntropy => Objective::ScaledCrossEntropy { beta: 0.0 },
        LossKind::FourierAdaptive | LossKind::FourierFixed => {
            Objective::ScaledCrossEntropy { beta }
        }
        LossKind::HausdorffPenalty => {
            weights = loss::hausdorff_weights(gt, defaults.alpha)?;
            Objective::HausdorffPenalty { weights: &weights }
        }
        LossKind::ActiveContour => Objective::ActiveContour {
            lambda: defaults.lambda,
        },
    };
    Ok(objective_gradient(net, image, gt, obj)?.2)
}
