//! Acceptance suite: one check per primary criterion, each printed as a
//! PASS or FAIL line. Runs as a plain binary so every line is shown.
//!
//! Failed criteria are always reported in the output. With
//! `ACCEPTANCE_STRICT=1` the process also exits with status 1 when any
//! criterion fails. `ACCEPTANCE_ONLY=<n>` runs a single criterion.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shapeloss::contour::{self, RadialProfile};
use shapeloss::data::{generate_sample, Dataset, DatasetSpec, GenParams, Partition, StarShape};
use shapeloss::fourier::{self, fourier_coefficients};
use shapeloss::io::GrayImage;
use shapeloss::loss::{self, MatchMode, ProbabilityMap};
use shapeloss::mask::BinaryMask;
use shapeloss::metrics;
use shapeloss::trainer::{self, LossKind, Objective, TinySegNet, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn params(harmonics: u32) -> GenParams {
    GenParams {
        harmonics,
        ..GenParams::default()
    }
}

/// Star-shaped masks with 1..=5 radius harmonics.
fn random_masks(seed: u64, count: usize) -> Vec<BinaryMask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            generate_sample(rng.gen(), &params(rng.gen_range(1..=5)))
                .unwrap()
                .mask
        })
        .collect()
}

/// `(2/L) ∫ ξ(l) {cos, sin}(2πnl/L) dl` for the step profile `ξ(l) = ξ_t` on
/// `[l_t, l_t+1)`, by a trapezoid rule with `sub` panels inside each step.
fn trapezoid_coefficients(profile: &RadialProfile, n: usize, sub: usize) -> (f64, f64) {
    let total = profile.total_length();
    let k = 2.0 * std::f64::consts::PI * n as f64 / total;
    let (mut a, mut b) = (0.0, 0.0);
    for t in 0..profile.len() {
        let start = profile.arc_lengths()[t];
        let h = profile.segment_length(t) / sub as f64;
        let xi = profile.xi()[t];
        for j in 0..sub {
            let (l0, l1) = (start + j as f64 * h, start + (j + 1) as f64 * h);
            a += 0.5 * h * xi * ((k * l0).cos() + (k * l1).cos());
            b += 0.5 * h * xi * ((k * l0).sin() + (k * l1).sin());
        }
    }
    (2.0 * a / total, 2.0 * b / total)
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn criterion_1() -> Outcome {
    let masks = random_masks(101, 50);
    let start = Instant::now();
    let shapes: Vec<_> = masks
        .iter()
        .map(|m| fourier::describe_largest(m, 8).unwrap())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    for shape in &shapes {
        for n in 1..=8 {
            let (a, b) = shape.descriptors.coeffs[n - 1];
            let (ta, tb) = trapezoid_coefficients(&shape.profile, n, 1024);
            worst = worst.max(rel_err(a, ta)).max(rel_err(b, tb));
        }
    }
    outcome(
        worst < 1e-3 && secs < 10.0,
        format!("descriptor vs dense trapezoid integration: max relative error {worst:.2e} over 50 masks, N = 8, {secs:.2} s"),
    )
}

fn criterion_2() -> Outcome {
    let t = 360;
    let total = 2.0 * std::f64::consts::PI * 20.0;
    let arcs: Vec<f64> = (0..t).map(|i| i as f64 * total / t as f64).collect();
    let constant = RadialProfile::from_samples((0.0, 0.0), vec![20.0; t], arcs, total).unwrap();
    let d = fourier_coefficients(&constant, 8).unwrap();
    let analytic_max = d.amplitudes.iter().fold(0.0f64, |m, z| m.max(*z));

    let disk = StarShape::disk((49.5, 49.5), 30.0).rasterize(100, 100);
    let dd = fourier::describe_largest(&disk, 4).unwrap().descriptors;
    let ratio_max = dd
        .amplitudes
        .iter()
        .map(|z| z / dd.a0)
        .fold(0.0f64, f64::max);
    outcome(
        analytic_max < 1e-12 && ratio_max < 0.02,
        format!("constant profile max Z_n {analytic_max:.1e}; r0 = 30 disk max Z_n/a0 {ratio_max:.4} for n <= 4"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut start_err, mut shift_err, mut rot_err) = (0.0f64, 0.0f64, 0.0f64);
    let max_diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    for mask in random_masks(303, 20) {
        let n = 8;
        let base = fourier::describe_largest(&mask, n).unwrap();
        let z = &base.descriptors.amplitudes;

        let shift = rng.gen_range(1..base.contour.len());
        let rotated = base.contour.rotated_start(shift);
        let profile = contour::radial_profile(&rotated, base.profile.centroid()).unwrap();
        start_err = start_err.max(max_diff(
            z,
            &fourier_coefficients(&profile, n).unwrap().amplitudes,
        ));

        let (w, h) = mask.dims();
        let moved = mask
            .padded(w + 24, h + 24, 12, 12)
            .shifted(rng.gen_range(-10..=10), rng.gen_range(-10..=10));
        let zs = fourier::describe_largest(&moved, n)
            .unwrap()
            .descriptors
            .amplitudes;
        shift_err = shift_err.max(max_diff(z, &zs));

        let zr = fourier::describe_largest(&mask.rotate90(), n)
            .unwrap()
            .descriptors
            .amplitudes;
        rot_err = rot_err.max(max_diff(z, &zr));
    }
    let worst = start_err.max(shift_err).max(rot_err);
    outcome(
        worst < 1e-6,
        format!("max |dZ| start point {start_err:.1e}, translation {shift_err:.1e}, 90 deg rotation {rot_err:.1e} over 20 shapes"),
    )
}

/// Soft prediction: another random shape, blurred towards 0.5 with noise.
fn soft_prediction(rng: &mut ChaCha8Rng, mask: &BinaryMask) -> ProbabilityMap {
    let probs = mask
        .data()
        .iter()
        .map(|&m| {
            let base = if m != 0 { 0.8 } else { 0.2 };
            (base + rng.gen_range(-0.15..0.15f64)).clamp(0.0, 1.0)
        })
        .collect();
    ProbabilityMap::new(mask.width(), mask.height(), probs).unwrap()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let gts = random_masks(404, 20);
    let preds = random_masks(405, 20);
    let mut worst = 0.0f64;
    for (gt, pm) in gts.iter().zip(&preds) {
        let pred = soft_prediction(&mut rng, pm);
        let order = rng.gen_range(1..=4);
        let omegas: Vec<f64> = (0..order).map(|_| rng.gen_range(0.1..4.0)).collect();
        let base = loss::fourier_loss(&pred, gt, &omegas, MatchMode::Largest).unwrap();
        let analytic = loss::omega_gradient(base.ce, &base.gaps);
        for n in 0..order {
            let h = 1e-3;
            let total_at = |delta: f64| {
                let mut w = omegas.clone();
                w[n] += delta;
                loss::fourier_loss(&pred, gt, &w, MatchMode::Largest)
                    .unwrap()
                    .total
            };
            let fd = (total_at(h) - total_at(-h)) / (2.0 * h);
            worst = worst.max(rel_err(analytic[n], fd));
        }
    }
    outcome(
        worst < 1e-8,
        format!("omega gradient vs central difference: max relative error {worst:.1e} on 20 pairs"),
    )
}

/// Which hidden units are active, for spotting ReLU kinks crossed by a
/// finite-difference step.
fn activation_pattern(net: &TinySegNet, image: &GrayImage) -> Vec<bool> {
    let cache = net.forward_cached(&image.pixels, image.width, image.height);
    cache.layer_inputs()[1..]
        .iter()
        .flatten()
        .map(|&v| v > 0.0)
        .collect()
}

fn criterion_5() -> Outcome {
    // A small image keeps the number of ReLU units near zero low.
    let side = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let gt = StarShape::disk((7.5, 7.5), 5.0).rasterize(side, side);
    let image = GrayImage {
        width: side,
        height: side,
        pixels: gt
            .data()
            .iter()
            .map(|&m| 0.5 + if m != 0 { 0.05 } else { 0.0 } + rng.gen_range(-0.1..0.1))
            .collect(),
    };
    let net = TinySegNet::init(505);
    let base_pattern = activation_pattern(&net, &image);
    let mut layer_starts = vec![0];
    for s in trainer::net::layer_shapes() {
        layer_starts.push(layer_starts.last().unwrap() + s.param_count());
    }
    let h = 1e-4;
    let shifted = |i: usize, delta: f64| {
        let mut p = net.clone();
        p.params_mut()[i] += delta;
        p
    };
    // 20 parameters per layer whose +-h step crosses no ReLU kink.
    let mut indices = Vec::new();
    let mut skipped = 0;
    for w in layer_starts.windows(2) {
        let mut taken = 0;
        while taken < 20 {
            let i = rng.gen_range(w[0]..w[1]);
            let smooth = [h, -h]
                .iter()
                .all(|&d| activation_pattern(&shifted(i, d), &image) == base_pattern);
            if smooth {
                indices.push(i);
                taken += 1;
            } else {
                skipped += 1;
            }
        }
    }
    let mut worst = 0.0f64;
    for beta in [0.0, 1.7] {
        let analytic =
            trainer::backward(&net, &image, &gt, LossKind::FourierAdaptive, beta).unwrap();
        let value = |p: &TinySegNet| {
            let pred =
                ProbabilityMap::new(side, side, p.forward(&image.pixels, side, side)).unwrap();
            trainer::objective_value(&pred, &gt, Objective::ScaledCrossEntropy { beta }).unwrap()
        };
        for &i in &indices {
            let fd = (value(&shifted(i, h)) - value(&shifted(i, -h))) / (2.0 * h);
            worst = worst.max(rel_err(analytic[i], fd));
        }
    }
    outcome(
        worst < 1e-4,
        format!(
            "backward vs central difference (h = 1e-4): max relative error {worst:.1e} over {} parameters \
             (20 per layer, {skipped} draws crossing a ReLU kink redrawn), beta in {{0, 1.7}}",
            indices.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let gts = random_masks(606, 100);
    let mut mismatches = 0;
    for gt in &gts {
        let probs = (0..gt.data().len()).map(|_| rng.gen::<f64>()).collect();
        let pred = ProbabilityMap::new(gt.width(), gt.height(), probs).unwrap();
        let order = rng.gen_range(1..=6);
        let total = loss::fourier_loss(&pred, gt, &vec![0.0; order], MatchMode::Largest)
            .unwrap()
            .total;
        let ce = loss::cross_entropy(&pred, gt).unwrap();
        if total.to_bits() != ce.to_bits() {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!(
            "omega = 0 loss bitwise equal to cross-entropy on {} of 100 pairs",
            100 - mismatches
        ),
    )
}

fn brute_hausdorff(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let pa: Vec<_> = a.foreground_pixels().collect();
    let pb: Vec<_> = b.foreground_pixels().collect();
    let directed = |from: &[(usize, usize)], to: &[(usize, usize)]| {
        from.iter()
            .map(|&(r, c)| {
                to.iter()
                    .map(|&(s, d)| {
                        ((r as f64 - s as f64).powi(2) + (c as f64 - d as f64).powi(2)).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(&pa, &pb).max(directed(&pb, &pa))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    while pairs < 50 {
        let density = rng.gen_range(0.02..0.6);
        let mut random = || BinaryMask::from_fn(16, 16, |_, _| rng.gen_bool(density));
        let (a, b) = (random(), random());
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let fast = metrics::hausdorff_distance(&a, &b).unwrap();
        worst = worst.max((fast - brute_hausdorff(&a, &b)).abs());
        pairs += 1;
    }
    outcome(
        worst < 1e-9,
        format!("distance-transform Hausdorff vs all-pairs: max |diff| {worst:.1e} on 50 pairs of 16x16 masks"),
    )
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let dataset = Dataset::generate(DatasetSpec::default()).unwrap();
    let kinds = [
        LossKind::CrossEntropy,
        LossKind::FourierAdaptive,
        LossKind::FourierFixed,
    ];
    let mut iou = [vec![], vec![], vec![]];
    let mut monotone = true;
    let mut non_uniform = true;
    let mut attention_shift = false;
    let mut increments = Vec::new();
    for (ki, &kind) in kinds.iter().enumerate() {
        for seed in 0..5 {
            let cfg = TrainConfig {
                loss_kind: kind,
                seed,
                ..TrainConfig::default()
            };
            let (net, log) = trainer::train(&cfg, &dataset).unwrap();
            let ev = trainer::evaluate(&net, &dataset, Partition::Test).unwrap();
            iou[ki].push(ev.summary.iou.mean);
            if kind == LossKind::FourierAdaptive {
                let trace = log.omega_trace();
                monotone &= trace
                    .windows(2)
                    .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| b >= a));
                let first = &trace[0];
                let last = trace.last().unwrap();
                let delta: Vec<f64> = first.iter().zip(last).map(|(a, b)| b - a).collect();
                non_uniform &= delta.iter().any(|d| (d - delta[0]).abs() > 1e-12);
                increments.push(delta);
                // Normalised increments over the first and last thirds of training.
                let len = trace.len();
                let share = |a: &[f64], b: &[f64]| {
                    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
                    let s: f64 = d.iter().sum();
                    d.iter()
                        .map(|v| if s > 0.0 { v / s } else { 0.0 })
                        .collect::<Vec<_>>()
                };
                if len >= 4 {
                    let early = share(&trace[0], &trace[len / 3]);
                    let late = share(&trace[len - 1 - len / 3], &trace[len - 1]);
                    attention_shift |= early.iter().zip(&late).any(|(a, b)| (a - b).abs() > 1e-6);
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let (ce, ad, fx) = (mean(&iou[0]), mean(&iou[1]), mean(&iou[2]));
    let within_time = elapsed < Duration::from_secs(30 * 60);
    let vs_fixed = ad >= fx;
    let vs_ce = ad >= ce - 0.005;
    let pass = within_time && vs_fixed && vs_ce && monotone && non_uniform;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{:.2}", 100.0 * x))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        pass,
        format!(
            "mean test IoU (%) cross-entropy {:.2} [{}], fourier-adaptive {:.2} [{}], fourier-fixed {:.2} [{}]; \
             adaptive >= fixed: {vs_fixed}; adaptive >= cross-entropy - 0.5: {vs_ce}; omega monotone: {monotone}; \
             non-uniform increments: {non_uniform} {:?}; attention shift observed: {attention_shift}; \
             matrix time {:.0} s (< 1800 s: {within_time})",
            100.0 * ce,
            fmt(&iou[0]),
            100.0 * ad,
            fmt(&iou[1]),
            100.0 * fx,
            fmt(&iou[2]),
            increments
                .iter()
                .map(|d| d.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/"))
                .collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut monotone = true;
    let mut improved = 0;
    let mut checked = 0;
    let mut worst_gain = f64::INFINITY;
    for _ in 0..20 {
        // Harmonics >= 2, so no shape is close to a circle.
        let sample = generate_sample(rng.gen(), &params(rng.gen_range(2..=5))).unwrap();
        let shape = fourier::describe_largest(&sample.mask, 8).unwrap();
        let errors: Vec<f64> = (1..=8)
            .map(|n| fourier::truncation_error(&shape.profile, &shape.descriptors.truncated(n)))
            .collect();
        monotone &= errors.windows(2).all(|w| w[1] <= w[0]);
        let (w, h) = sample.mask.dims();
        let iou1 = sample
            .mask
            .iou(&fourier::reconstruct_mask(&shape, 1, w, h))
            .unwrap();
        let iou8 = sample
            .mask
            .iou(&fourier::reconstruct_mask(&shape, 8, w, h))
            .unwrap();
        checked += 1;
        if iou8 > iou1 {
            improved += 1;
        }
        worst_gain = worst_gain.min(iou8 - iou1);
    }
    outcome(
        monotone && improved == checked,
        format!(
            "truncation error non-increasing for N = 1..8: {monotone}; order-8 IoU > order-1 IoU on {improved}/{checked} shapes (smallest gain {worst_gain:.4})"
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "descriptor correctness", criterion_1),
        (2, "circle null test", criterion_2),
        (3, "invariance suite", criterion_3),
        (4, "omega gradient", criterion_4),
        (5, "network gradient", criterion_5),
        (6, "collapse identity", criterion_6),
        (7, "Hausdorff oracle", criterion_7),
        (8, "desk-scale training", criterion_8),
        (9, "reconstruction monotonicity", criterion_9),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id} [{verdict}] {name}: {} ({:.1} s)",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) FAILED");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
        return;
    }
    println!("acceptance: all criteria passed");
}
