//! Cross-entropy, the Fourier-descriptor shape penalty and its adaptive
//! coefficients, plus the two comparison losses used as baselines.
//!
//! The shape-aware loss of an image is
//!
//! ```text
//! total = (1 + β) · CE,      β = Σ_n ω_n · Σ_matches |Z_n − Z̃_n|
//! ```
//!
//! where `Z_n` and `Z̃_n` are harmonic amplitudes of a ground-truth object and
//! its matched predicted object. β depends on the prediction only through a
//! 0.5 threshold and contour tracing, so it is a constant multiplier for
//! network gradients; the coefficients ω_n receive `∂total/∂ω_n = CE · gap_n`.

use serde::{Deserialize, Serialize};

use crate::distance;
use crate::error::{Result, ShapeError};
use crate::fourier::{self, FourierDescriptors};
use crate::mask::{ensure_same_dims, BinaryMask, ComponentMap};

/// Probabilities are clamped to `[PROB_EPS, 1 − PROB_EPS]` before any logarithm.
pub const PROB_EPS: f64 = 1e-7;
/// Foreground iff the posterior is strictly above this value.
pub const THRESHOLD: f64 = 0.5;
/// Minimum IoU for a pair to count in [`MatchMode::IouThreshold`].
pub const MATCH_IOU: f64 = 0.5;
/// Smoothing inside the square root of the active-contour length term.
pub const CONTOUR_EPS: f64 = 1e-8;

/// Per-pixel foreground posteriors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    probs: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != width * height {
            return Err(ShapeError::InvalidParams(format!(
                "probability map has {} values, expected {}x{}",
                probs.len(),
                width,
                height
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ShapeError::InvalidParams(format!(
                "probability {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            probs,
        })
    }

    /// Hard map: 1 − `eps` on foreground, `eps` on background.
    pub fn from_mask(mask: &BinaryMask, eps: f64) -> Self {
        let probs = mask
            .data()
            .iter()
            .map(|&v| if v != 0 { 1.0 - eps } else { eps })
            .collect();
        Self {
            width: mask.width(),
            height: mask.height(),
            probs,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            probs: vec![value; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Predicted segmentation: foreground where `p > 0.5`.
    pub fn threshold(&self) -> BinaryMask {
        let data = self.probs.iter().map(|&p| (p > THRESHOLD) as u8).collect();
        BinaryMask::new(self.width, self.height, data).expect("dims preserved")
    }
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Binary cross-entropy summed over all pixels.
pub fn cross_entropy(pred: &ProbabilityMap, gt: &BinaryMask) -> Result<f64> {
    ensure_same_dims(pred.dims(), gt.dims())?;
    Ok(pred
        .probs
        .iter()
        .zip(gt.data())
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            if y != 0 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum())
}

/// How ground-truth objects are paired with predicted objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    /// Largest ground-truth object against the largest predicted object.
    #[default]
    Largest,
    /// Every ground-truth object against its maximally overlapping predicted
    /// object, kept when their IoU exceeds 0.5.
    IouThreshold,
}

impl std::str::FromStr for MatchMode {
    type Err = ShapeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "largest" => Ok(Self::Largest),
            "iou-threshold" => Ok(Self::IouThreshold),
            other => Err(ShapeError::InvalidParams(format!(
                "unknown match mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMatch {
    pub gt_component: usize,
    pub pred_component: Option<usize>,
    pub iou: f64,
}

fn pair_iou(gt: &ComponentMap, pred: &ComponentMap, g: usize, p: usize) -> f64 {
    let gc = gt.get(g).expect("valid id");
    let pc = pred.get(p).expect("valid id");
    let inter = gc
        .pixels
        .iter()
        .filter(|&&(r, c)| pred.label_at(r as isize, c as isize) == Some(p))
        .count();
    inter as f64 / (gc.area + pc.area - inter) as f64
}

/// Pairs labelled components of ground truth and prediction.
pub fn match_components(
    gt: &ComponentMap,
    pred: &ComponentMap,
    mode: MatchMode,
) -> Result<Vec<ObjectMatch>> {
    if gt.is_empty() {
        return Err(ShapeError::EmptyGroundTruth);
    }
    match mode {
        MatchMode::Largest => {
            let g = gt.largest().expect("non-empty").id;
            let m = match pred.largest() {
                Some(p) => ObjectMatch {
                    gt_component: g,
                    pred_component: Some(p.id),
                    iou: pair_iou(gt, pred, g, p.id),
                },
                None => ObjectMatch {
                    gt_component: g,
                    pred_component: None,
                    iou: 0.0,
                },
            };
            Ok(vec![m])
        }
        MatchMode::IouThreshold => {
            let mut out = Vec::new();
            for gc in gt.by_area() {
                let mut overlap = vec![0usize; pred.len()];
                for &(r, c) in &gc.pixels {
                    if let Some(p) = pred.label_at(r as isize, c as isize) {
                        overlap[p] += 1;
                    }
                }
                // maximal overlap, lowest label on ties
                let best = overlap
                    .iter()
                    .enumerate()
                    .filter(|(_, &n)| n > 0)
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)));
                if let Some((p, _)) = best {
                    let iou = pair_iou(gt, pred, gc.id, p);
                    if iou > MATCH_IOU {
                        out.push(ObjectMatch {
                            gt_component: gc.id,
                            pred_component: Some(p),
                            iou,
                        });
                    }
                }
            }
            Ok(out)
        }
    }
}

pub fn match_objects(
    gt: &BinaryMask,
    pred: &BinaryMask,
    mode: MatchMode,
) -> Result<Vec<ObjectMatch>> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    match_components(&gt.components(), &pred.components(), mode)
}

/// `(β, |Z_n − Z̃_n|)` for one pair of objects. A missing prediction counts
/// as all-zero amplitudes.
pub fn shape_dissimilarity(
    gt: &FourierDescriptors,
    pred: Option<&FourierDescriptors>,
    omegas: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = omegas.len();
    for d in std::iter::once(gt).chain(pred) {
        if d.order != n {
            return Err(ShapeError::OrderMismatch {
                descriptors: d.order,
                omegas: n,
            });
        }
    }
    let gaps: Vec<f64> = match pred {
        Some(p) => gt
            .amplitudes
            .iter()
            .zip(&p.amplitudes)
            .map(|(z, zp)| (z - zp).abs())
            .collect(),
        None => gt.amplitudes.clone(),
    };
    Ok((weighted_sum(omegas, &gaps), gaps))
}

fn weighted_sum(omegas: &[f64], gaps: &[f64]) -> f64 {
    omegas.iter().zip(gaps).map(|(w, g)| w * g).sum()
}

/// Result of one shape-aware loss evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub beta: f64,
    pub total: f64,
    /// Per-harmonic amplitude gaps, summed over matched objects.
    pub gaps: Vec<f64>,
    pub omegas: Vec<f64>,
}

impl LossBreakdown {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain numeric struct")
    }
}

/// Per-harmonic amplitude gaps between the ground-truth objects and their
/// matches in the thresholded prediction, summed over matches.
pub fn harmonic_gaps(
    pred_mask: &BinaryMask,
    gt: &BinaryMask,
    order: usize,
    mode: MatchMode,
) -> Result<Vec<f64>> {
    ensure_same_dims(pred_mask.dims(), gt.dims())?;
    if order < 1 {
        return Err(ShapeError::InvalidOrder { order, max: 0 });
    }
    let gt_labels = gt.components();
    let pred_labels = pred_mask.components();
    let matches = match_components(&gt_labels, &pred_labels, mode)?;
    let mut gaps = vec![0.0; order];
    let zeros = vec![0.0; order];
    for m in matches {
        let gc = gt_labels.get(m.gt_component).expect("valid id");
        let gt_desc = fourier::describe_component(&gt_labels, gc, order)?.descriptors;
        // A predicted object too small or too irregular to describe counts as missing.
        let pred_desc = m.pred_component.and_then(|p| {
            let pc = pred_labels.get(p).expect("valid id");
            fourier::describe_component(&pred_labels, pc, order)
                .ok()
                .map(|s| s.descriptors)
        });
        let (_, pair_gaps) = shape_dissimilarity(&gt_desc, pred_desc.as_ref(), &zeros)?;
        for (acc, g) in gaps.iter_mut().zip(pair_gaps) {
            *acc += g;
        }
    }
    Ok(gaps)
}

/// Shape-aware loss `(1 + β) · CE` with its breakdown. `omegas.len()` is the
/// descriptor order.
pub fn fourier_loss(
    pred: &ProbabilityMap,
    gt: &BinaryMask,
    omegas: &[f64],
    mode: MatchMode,
) -> Result<LossBreakdown> {
    let ce = cross_entropy(pred, gt)?;
    let gaps = harmonic_gaps(&pred.threshold(), gt, omegas.len(), mode)?;
    Ok(compose(ce, gaps, omegas))
}

/// Assembles a breakdown from a cross-entropy value and harmonic gaps.
pub fn compose(ce: f64, gaps: Vec<f64>, omegas: &[f64]) -> LossBreakdown {
    let beta = weighted_sum(omegas, &gaps);
    LossBreakdown {
        ce,
        beta,
        total: (1.0 + beta) * ce,
        gaps,
        omegas: omegas.to_vec(),
    }
}

/// `∂total/∂ω_n = CE · gap_n`.
pub fn omega_gradient(ce: f64, gaps: &[f64]) -> Vec<f64> {
    gaps.iter().map(|g| ce * g).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaSnapshot {
    pub omegas: Vec<f64>,
    pub gradients: Vec<f64>,
}

/// Trainable loss coefficients ω_1..ω_N.
///
/// Not synchronised: one training driver owns and mutates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaState {
    omegas: Vec<f64>,
    learning_rate: f64,
    history: Vec<OmegaSnapshot>,
}

impl OmegaState {
    pub fn new(omegas: Vec<f64>, learning_rate: f64) -> Result<Self> {
        if omegas.is_empty() || omegas.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(ShapeError::InvalidParams(
                "loss coefficients must be a non-empty list of finite values >= 0".into(),
            ));
        }
        if !(learning_rate >= 0.0) {
            return Err(ShapeError::InvalidParams(
                "coefficient learning rate must be >= 0".into(),
            ));
        }
        Ok(Self {
            omegas,
            learning_rate,
            history: Vec::new(),
        })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn order(&self) -> usize {
        self.omegas.len()
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn history(&self) -> &[OmegaSnapshot] {
        &self.history
    }

    /// `ω_n ← max(0, ω_n + lr · gradient_n)`; records the step in the history.
    pub fn update(&mut self, gradients: &[f64]) -> Result<()> {
        if gradients.len() != self.omegas.len() {
            return Err(ShapeError::OrderMismatch {
                descriptors: gradients.len(),
                omegas: self.omegas.len(),
            });
        }
        for (w, g) in self.omegas.iter_mut().zip(gradients) {
            *w = (*w + self.learning_rate * g).max(0.0);
        }
        self.history.push(OmegaSnapshot {
            omegas: self.omegas.clone(),
            gradients: gradients.to_vec(),
        });
        Ok(())
    }
}

/// Functional form of [`OmegaState::update`].
pub fn update_omega(state: &OmegaState, gradients: &[f64]) -> Result<OmegaState> {
    let mut next = state.clone();
    next.update(gradients)?;
    Ok(next)
}

/// One-sided distance-weighted squared error
/// `Σ_q (p̂_q − p_q)² · d_G(q)^α`, with `d_G` the Euclidean distance to the
/// ground-truth foreground boundary.
pub fn hausdorff_penalty_loss(pred: &ProbabilityMap, gt: &BinaryMask, alpha: f64) -> Result<f64> {
    let weights = hausdorff_weights(gt, alpha)?;
    ensure_same_dims(pred.dims(), gt.dims())?;
    Ok(pred
        .probs
        .iter()
        .zip(gt.data())
        .zip(&weights)
        .map(|((&p, &y), &w)| (p - y as f64).powi(2) * w)
        .sum())
}

/// `d_G(q)^α` for every pixel.
pub fn hausdorff_weights(gt: &BinaryMask, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(ShapeError::InvalidParams(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    let d = distance::distance_to_boundary(gt).ok_or(ShapeError::EmptyGroundTruth)?;
    Ok(d.into_iter().map(|x| x.powf(alpha)).collect())
}

/// `∂/∂p̂` of [`hausdorff_penalty_loss`] given precomputed weights.
pub fn hausdorff_penalty_prob_grad(
    pred: &ProbabilityMap,
    gt: &BinaryMask,
    weights: &[f64],
) -> Vec<f64> {
    pred.probs
        .iter()
        .zip(gt.data())
        .zip(weights)
        .map(|((&p, &y), &w)| 2.0 * (p - y as f64) * w)
        .collect()
}

/// Active-contour loss with the ground truth as the target image:
///
/// ```text
/// length = Σ √((p̂[r][c+1] − p̂[r][c])² + (p̂[r+1][c] − p̂[r][c])² + ε)   over r < H−1, c < W−1
/// region = |Σ p̂ · (p − 1)²| + |Σ (1 − p̂) · (p − 0)²|
/// loss   = length + λ · region
/// ```
///
/// This is the length-plus-region energy of Chen et al. (2019) with the
/// inside/outside constants fixed to 1 and 0.
pub fn active_contour_loss(pred: &ProbabilityMap, gt: &BinaryMask, lambda: f64) -> Result<f64> {
    ensure_same_dims(pred.dims(), gt.dims())?;
    let (length, region_in, region_out) = active_contour_terms(pred, gt);
    Ok(length + lambda * (region_in.abs() + region_out.abs()))
}

/// `(length, region_in, region_out)` of the active-contour energy.
pub fn active_contour_terms(pred: &ProbabilityMap, gt: &BinaryMask) -> (f64, f64, f64) {
    let (w, h) = pred.dims();
    let p = &pred.probs;
    let mut length = 0.0;
    for r in 0..h.saturating_sub(1) {
        for c in 0..w.saturating_sub(1) {
            let i = r * w + c;
            let dx = p[i + 1] - p[i];
            let dy = p[i + w] - p[i];
            length += (dx * dx + dy * dy + CONTOUR_EPS).sqrt();
        }
    }
    let (mut region_in, mut region_out) = (0.0, 0.0);
    for (&pp, &y) in p.iter().zip(gt.data()) {
        let y = y as f64;
        region_in += pp * (y - 1.0).powi(2);
        region_out += (1.0 - pp) * y * y;
    }
    (length, region_in, region_out)
}

/// `∂/∂p̂` of [`active_contour_loss`].
pub fn active_contour_prob_grad(pred: &ProbabilityMap, gt: &BinaryMask, lambda: f64) -> Vec<f64> {
    let (w, h) = pred.dims();
    let p = &pred.probs;
    let mut grad = vec![0.0; p.len()];
    for r in 0..h.saturating_sub(1) {
        for c in 0..w.saturating_sub(1) {
            let i = r * w + c;
            let dx = p[i + 1] - p[i];
            let dy = p[i + w] - p[i];
            let s = (dx * dx + dy * dy + CONTOUR_EPS).sqrt();
            grad[i] -= (dx + dy) / s;
            grad[i + 1] += dx / s;
            grad[i + w] += dy / s;
        }
    }
    // Both region sums are non-negative for p̂ in [0, 1], so the absolute
    // values are smooth there.
    for ((g, _), &y) in grad.iter_mut().zip(p).zip(gt.data()) {
        let y = y as f64;
        *g += lambda * ((y - 1.0).powi(2) - y * y);
    }
    grad
}
