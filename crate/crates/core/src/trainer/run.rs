//! The training loop and its per-epoch log.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, Dataset, Partition};
use crate::error::{Result, ShapeError};
use crate::loss::{self, OmegaState, ProbabilityMap};
use crate::metrics::{self, MeanStd};

use super::net::TinySegNet;
use super::objective::{logit_gradient, objective_value, Objective};
use super::{LossKind, TrainConfig};

/// Minimum decrease of the validation loss that counts as an improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-6;

/// One line of the run log. Epoch 0 describes the initial weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-pixel training loss of the epoch (absent for epoch 0).
    pub train_loss: Option<f64>,
    /// Mean per-pixel validation shape-aware loss, always with the initial ω.
    pub val_fourier_loss: f64,
    pub val_iou: f64,
    pub val_fscore: f64,
    /// Mean over validation images where the distance is defined.
    pub val_hausdorff: Option<f64>,
    pub val_hausdorff_missing: usize,
    /// ω at the end of the epoch.
    pub omegas: Vec<f64>,
    /// Mean per-image harmonic gaps over the epoch's training images
    /// (Fourier kinds only).
    pub gap_means: Vec<f64>,
    pub warmup: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: TrainConfig,
    pub records: Vec<EpochRecord>,
    pub stop_epoch: usize,
    pub stop_reason: StopReason,
    /// Epoch after warm-up with the lowest validation loss (0 if training
    /// ended inside warm-up).
    pub best_epoch: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum LogLine {
    Config(TrainConfig),
    Epoch(EpochRecord),
    Stop {
        stop_epoch: usize,
        stop_reason: StopReason,
        best_epoch: usize,
    },
}

impl RunLog {
    /// One JSON object per line: the config, each epoch, then the stop record.
    pub fn to_jsonl(&self) -> String {
        let mut lines = vec![
            serde_json::to_string(&LogLine::Config(self.config.clone())).expect("serialisable")
        ];
        lines.extend(
            self.records
                .iter()
                .map(|r| serde_json::to_string(&LogLine::Epoch(r.clone())).expect("serialisable")),
        );
        lines.push(
            serde_json::to_string(&LogLine::Stop {
                stop_epoch: self.stop_epoch,
                stop_reason: self.stop_reason,
                best_epoch: self.best_epoch,
            })
            .expect("serialisable"),
        );
        lines.join("\n") + "\n"
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut config = None;
        let mut records = Vec::new();
        let mut stop = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str(line)? {
                LogLine::Config(c) => config = Some(c),
                LogLine::Epoch(r) => records.push(r),
                LogLine::Stop {
                    stop_epoch,
                    stop_reason,
                    best_epoch,
                } => stop = Some((stop_epoch, stop_reason, best_epoch)),
            }
        }
        let missing = |what: &str| ShapeError::Format {
            what: "run log",
            detail: format!("missing {what} line"),
        };
        let config = config.ok_or_else(|| missing("config"))?;
        let (stop_epoch, stop_reason, best_epoch) = stop.ok_or_else(|| missing("stop"))?;
        Ok(Self {
            config,
            records,
            stop_epoch,
            stop_reason,
            best_epoch,
        })
    }

    pub fn omega_trace(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.omegas.clone()).collect()
    }

    pub fn final_record(&self) -> &EpochRecord {
        self.records.last().expect("a run log always holds epoch 0")
    }
}

struct ImageStep {
    grad: Vec<f64>,
    loss: f64,
    ce: f64,
    gaps: Vec<f64>,
}

struct Validation {
    fourier_loss: f64,
    iou: f64,
    fscore: f64,
    hausdorff: Option<f64>,
    hausdorff_missing: usize,
}

fn validate(net: &TinySegNet, dataset: &Dataset, config: &TrainConfig) -> Result<Validation> {
    let rows = dataset
        .ids(Partition::Val)
        .par_iter()
        .map(|&id| {
            let s = &dataset.samples[id];
            let npix = (s.image.width * s.image.height) as f64;
            let pred = ProbabilityMap::new(
                s.image.width,
                s.image.height,
                net.forward(&s.image.pixels, s.image.width, s.image.height),
            )?;
            let fl = loss::fourier_loss(&pred, &s.mask, &config.omega_init, config.match_mode)?;
            let m =
                metrics::evaluate_pair(crate::data::sample_name(id), &s.mask, &pred.threshold())?;
            Ok((fl.total / npix, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let hd: Vec<f64> = rows.iter().filter_map(|(_, m)| m.hausdorff).collect();
    Ok(Validation {
        fourier_loss: rows.iter().map(|(l, _)| l).sum::<f64>() / n,
        iou: rows.iter().map(|(_, m)| m.scores.iou).sum::<f64>() / n,
        fscore: rows.iter().map(|(_, m)| m.scores.fscore).sum::<f64>() / n,
        hausdorff: (!hd.is_empty()).then(|| MeanStd::of(&hd).mean),
        hausdorff_missing: rows.len() - hd.len(),
    })
}

fn image_step(
    net: &TinySegNet,
    dataset: &Dataset,
    id: usize,
    config: &TrainConfig,
    omegas: &[f64],
    warm: bool,
    hd_weights: &[Vec<f64>],
) -> Result<ImageStep> {
    let s = &dataset.samples[id];
    let (w, h) = s.image.dims();
    let cache = net.forward_cached(&s.image.pixels, w, h);
    let pred = ProbabilityMap::new(w, h, cache.probs.clone())?;
    let ce = loss::cross_entropy(&pred, &s.mask)?;
    let kind = config.loss_kind;
    let gaps = if kind.is_fourier() {
        loss::harmonic_gaps(&pred.threshold(), &s.mask, config.order, config.match_mode)?
    } else {
        Vec::new()
    };
    let obj = match kind {
        LossKind::CrossEntropy => Objective::ScaledCrossEntropy { beta: 0.0 },
        LossKind::FourierAdaptive | LossKind::FourierFixed => Objective::ScaledCrossEntropy {
            beta: if warm {
                0.0
            } else {
                omegas.iter().zip(&gaps).map(|(o, g)| o * g).sum()
            },
        },
        LossKind::HausdorffPenalty => Objective::HausdorffPenalty {
            weights: &hd_weights[id],
        },
        LossKind::ActiveContour => Objective::ActiveContour {
            lambda: config.lambda,
        },
    };
    let loss = objective_value(&pred, &s.mask, obj)?;
    let grad = net.backward(&cache, &logit_gradient(&pred, &s.mask, obj));
    Ok(ImageStep {
        grad,
        loss,
        ce,
        gaps,
    })
}

/// Trains a freshly initialised network (weights from `config.seed`).
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<(TinySegNet, RunLog)> {
    train_from(config, dataset, TinySegNet::init(config.seed))
}

/// Trains `net` by plain gradient descent and returns the weights at the
/// stopping epoch. Early stopping considers only epochs after warm-up.
///
/// Each batch step descends the batch mean of per-pixel-mean losses. For
/// `fourier-adaptive`, after warm-up, ω is updated once per batch with the
/// summed per-image gradients `Σ_batch CE_mean · gap_n`, where `CE_mean` is
/// the per-pixel-mean cross-entropy.
pub fn train_from(
    config: &TrainConfig,
    dataset: &Dataset,
    mut net: TinySegNet,
) -> Result<(TinySegNet, RunLog)> {
    config.validate()?;
    let train_ids = dataset.ids(Partition::Train).to_vec();
    if train_ids.is_empty() || dataset.ids(Partition::Val).is_empty() {
        return Err(ShapeError::EmptyDataset);
    }
    let hd_weights: Vec<Vec<f64>> = if config.loss_kind == LossKind::HausdorffPenalty {
        dataset
            .samples
            .iter()
            .map(|s| loss::hausdorff_weights(&s.mask, config.alpha))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut omega = OmegaState::new(config.omega_init.clone(), config.omega_lr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x5EED));

    let record =
        |epoch: usize, v: Validation, train_loss, omegas: &[f64], gap_means, warmup| EpochRecord {
            epoch,
            train_loss,
            val_fourier_loss: v.fourier_loss,
            val_iou: v.iou,
            val_fscore: v.fscore,
            val_hausdorff: v.hausdorff,
            val_hausdorff_missing: v.hausdorff_missing,
            omegas: omegas.to_vec(),
            gap_means,
            warmup,
        };

    let v0 = validate(&net, dataset, config)?;
    // Early stopping only watches epochs trained on the configured loss.
    let mut best = (f64::INFINITY, 0usize);
    let mut records = vec![record(0, v0, None, omega.omegas(), Vec::new(), false)];
    let mut since_best = 0;
    let mut stop_reason = StopReason::MaxEpochs;

    let mut order = train_ids;
    for epoch in 1..=config.max_epochs {
        let warm = epoch <= config.warmup_epochs;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut gap_sum = vec![
            0.0;
            if config.loss_kind.is_fourier() {
                config.order
            } else {
                0
            }
        ];
        for batch in order.chunks(config.batch_size) {
            let omegas = omega.omegas().to_vec();
            let steps = batch
                .par_iter()
                .map(|&id| image_step(&net, dataset, id, config, &omegas, warm, &hd_weights))
                .collect::<Result<Vec<_>>>()?;
            let mut grad = vec![0.0; net.params().len()];
            let mut omega_grad = vec![0.0; config.order];
            let mut pixels = 0.0;
            // Fixed reduction order keeps runs bit-reproducible.
            for (step, &id) in steps.iter().zip(batch) {
                let npix =
                    (dataset.samples[id].image.width * dataset.samples[id].image.height) as f64;
                pixels = npix;
                for (g, s) in grad.iter_mut().zip(&step.grad) {
                    *g += s;
                }
                for (acc, g) in gap_sum.iter_mut().zip(&step.gaps) {
                    *acc += g;
                }
                for (acc, g) in omega_grad
                    .iter_mut()
                    .zip(loss::omega_gradient(step.ce / npix, &step.gaps))
                {
                    *acc += g;
                }
                loss_sum += step.loss / npix;
            }
            net.step(&grad, config.param_lr / (batch.len() as f64 * pixels));
            if config.loss_kind == LossKind::FourierAdaptive && !warm {
                omega.update(&omega_grad)?;
            }
        }
        let n = order.len() as f64;
        let v = validate(&net, dataset, config)?;
        let val = v.fourier_loss;
        records.push(record(
            epoch,
            v,
            Some(loss_sum / n),
            omega.omegas(),
            gap_sum.iter().map(|g| g / n).collect(),
            warm,
        ));
        if warm {
            continue;
        }
        if val < best.0 - MIN_IMPROVEMENT {
            best = (val, epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if config.patience.is_some_and(|p| since_best >= p) {
            stop_reason = StopReason::EarlyStopping;
            break;
        }
    }
    let stop_epoch = records.last().map_or(0, |r| r.epoch);
    Ok((
        net,
        RunLog {
            config: config.clone(),
            records,
            stop_epoch,
            stop_reason,
            best_epoch: best.1,
        },
    ))
}
