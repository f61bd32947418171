//! Fourier descriptors of the distance-to-centre function.
//!
//! For a profile ξ sampled at arc lengths `l_t` on a contour of length `L`,
//! with increments `Δξ_t = ξ(l_{t-1}) − ξ(l_t)`:
//!
//! ```text
//! a_n =  1/(πn) Σ_t Δξ_t sin(2πn l_t / L)
//! b_n = −1/(πn) Σ_t Δξ_t cos(2πn l_t / L)
//! Z_n = √(a_n² + b_n²)
//! ```
//!
//! These are the exact Fourier coefficients of the profile held constant at
//! `ξ_t` along each arc `[l_t, l_{t+1})`, so truncated reconstructions obey
//! Parseval and the amplitudes do not depend on where the contour starts.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::contour::{self, Contour, RadialProfile};
use crate::error::{Result, ShapeError};
use crate::mask::{BinaryMask, Component, ComponentMap};

/// Harmonic coefficients and amplitudes for `n = 1..=order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierDescriptors {
    pub order: usize,
    pub a0: f64,
    /// `(a_n, b_n)` for `n = 1..=order`.
    pub coeffs: Vec<(f64, f64)>,
    /// `Z_n` for `n = 1..=order`.
    pub amplitudes: Vec<f64>,
    pub total_length: f64,
    /// Centroid the profile was measured from, `(row, col)`.
    pub centroid: (f64, f64),
}

/// Largest order accepted for a profile of `samples` points.
pub fn max_order(samples: usize) -> usize {
    samples / 2
}

pub fn fourier_coefficients(profile: &RadialProfile, order: usize) -> Result<FourierDescriptors> {
    let max = max_order(profile.len());
    if order < 1 || order > max {
        return Err(ShapeError::InvalidOrder { order, max });
    }
    let total = profile.total_length();
    let mut coeffs = Vec::with_capacity(order);
    for n in 1..=order {
        let w = 2.0 * PI * n as f64 / total;
        let (mut s, mut c) = (0.0, 0.0);
        for (&d, &l) in profile.deltas().iter().zip(profile.arc_lengths()) {
            let (sin, cos) = (w * l).sin_cos();
            s += d * sin;
            c += d * cos;
        }
        let k = 1.0 / (PI * n as f64);
        coeffs.push((k * s, -k * c));
    }
    let amplitudes = coeffs.iter().map(|&(a, b)| a.hypot(b)).collect();
    Ok(FourierDescriptors {
        order,
        a0: profile.mean_radius(),
        coeffs,
        amplitudes,
        total_length: total,
        centroid: profile.centroid(),
    })
}

impl FourierDescriptors {
    /// Copy keeping only the first `order` harmonics.
    pub fn truncated(&self, order: usize) -> Self {
        let order = order.min(self.order);
        Self {
            order,
            coeffs: self.coeffs[..order].to_vec(),
            amplitudes: self.amplitudes[..order].to_vec(),
            ..self.clone()
        }
    }

    /// Truncated series value ξ_N(l).
    pub fn evaluate(&self, arc: f64) -> f64 {
        let w = 2.0 * PI * arc / self.total_length;
        self.coeffs
            .iter()
            .enumerate()
            .fold(self.a0, |acc, (i, &(a, b))| {
                let (s, c) = (w * (i + 1) as f64).sin_cos();
                acc + a * c + b * s
            })
    }

    /// Writes `a0,<value>,L,<value>` followed by `n,a_n,b_n,Z_n` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("a0,{},L,{}\nn,a_n,b_n,Z_n\n", self.a0, self.total_length);
        for (i, (&(a, b), &z)) in self.coeffs.iter().zip(&self.amplitudes).enumerate() {
            let _ = writeln!(out, "{},{a},{b},{z}", i + 1);
        }
        out
    }
}

/// Samples ξ_N at each requested arc length.
pub fn reconstruct_profile(desc: &FourierDescriptors, sample_arcs: &[f64]) -> Result<Vec<f64>> {
    sample_arcs
        .iter()
        .map(|&l| {
            if !(0.0..=desc.total_length).contains(&l) {
                return Err(ShapeError::ArcOutOfRange {
                    arc: l,
                    total: desc.total_length,
                });
            }
            Ok(desc.evaluate(l))
        })
        .collect()
}

/// RMS difference between the profile and its truncated series over `[0, L]`,
/// from the closed form `(1/L)∫ξ² − a0² − ½ Σ Z_n²`.
pub fn truncation_error(profile: &RadialProfile, desc: &FourierDescriptors) -> f64 {
    let energy: f64 = (0..profile.len())
        .map(|t| profile.xi()[t].powi(2) * profile.segment_length(t))
        .sum::<f64>()
        / profile.total_length();
    let captured: f64 =
        desc.a0 * desc.a0 + 0.5 * desc.amplitudes.iter().map(|z| z * z).sum::<f64>();
    (energy - captured).max(0.0).sqrt()
}

/// Boundary polygon with the original angular positions and truncated radii:
/// point `t` is `centroid + ξ_N(l_t) · û_t`, `û_t` pointing from the centroid
/// to contour point `t`.
pub fn reconstruct_boundary(contour: &Contour, desc: &FourierDescriptors) -> Vec<(f64, f64)> {
    let (cr, cc) = desc.centroid;
    contour
        .points()
        .iter()
        .zip(contour.arc_lengths())
        .map(|(&(r, c), &l)| {
            let (dr, dc) = (r as f64 - cr, c as f64 - cc);
            let norm = dr.hypot(dc);
            let radius = desc.evaluate(l);
            (cr + radius * dr / norm, cc + radius * dc / norm)
        })
        .collect()
}

/// Filled mask of the order-`order` reconstruction of `shape`.
pub fn reconstruct_mask(
    shape: &ShapeDescription,
    order: usize,
    width: usize,
    height: usize,
) -> BinaryMask {
    let poly = reconstruct_boundary(&shape.contour, &shape.descriptors.truncated(order));
    BinaryMask::from_polygon(width, height, &poly)
}

/// Contour, profile and descriptors of one object.
#[derive(Debug, Clone)]
pub struct ShapeDescription {
    pub contour: Contour,
    pub profile: RadialProfile,
    pub descriptors: FourierDescriptors,
}

/// Full descriptor pipeline for one labelled component.
pub fn describe_component(
    labels: &ComponentMap,
    component: &Component,
    order: usize,
) -> Result<ShapeDescription> {
    let contour = contour::trace_component(labels, component)?;
    let profile = contour::radial_profile(&contour, component.centroid())?;
    let descriptors = fourier_coefficients(&profile, order)?;
    Ok(ShapeDescription {
        contour,
        profile,
        descriptors,
    })
}

/// Full descriptor pipeline for the largest object of a mask.
pub fn describe_largest(mask: &BinaryMask, order: usize) -> Result<ShapeDescription> {
    if order < 1 {
        return Err(ShapeError::InvalidOrder { order, max: 0 });
    }
    let labels = mask.components();
    let comp = labels.largest().ok_or(ShapeError::EmptyMask)?;
    describe_component(&labels, comp, order)
}
