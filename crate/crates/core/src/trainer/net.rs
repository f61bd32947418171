//! Three-layer fully-convolutional segmenter with hand-written backprop.
//!
//! Layers are 3×3 convolutions with zero "same" padding and channel widths
//! 1 → 8 → 8 → 1; ReLU follows the first two, a logistic the last. All
//! parameters live in one flat vector: for each layer the weights in
//! `[out][in][ky][kx]` order, then the biases. The input image is
//! standardised per image before the first convolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};

pub const KERNEL: usize = 3;
pub const CHANNELS: [usize; 4] = [1, 8, 8, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl LayerShape {
    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

pub fn layer_shapes() -> Vec<LayerShape> {
    CHANNELS
        .windows(2)
        .map(|w| LayerShape {
            in_channels: w[0],
            out_channels: w[1],
            kernel: KERNEL,
        })
        .collect()
}

pub fn param_count() -> usize {
    layer_shapes().iter().map(LayerShape::param_count).sum()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinySegNet {
    params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub width: usize,
    pub height: usize,
    /// Zero-padded input of each layer (the image, then the two ReLU outputs).
    inputs: Vec<Vec<f64>>,
    /// Output probabilities.
    pub probs: Vec<f64>,
}

impl ForwardCache {
    /// Zero-padded input of each layer: the standardized image, then the two
    /// ReLU outputs.
    pub fn layer_inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }
}

impl TinySegNet {
    pub fn zeros() -> Self {
        Self {
            params: vec![0.0; param_count()],
        }
    }

    /// Weights uniform in `±√(1/fan_in)`, biases zero.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count());
        for shape in layer_shapes() {
            let bound = (1.0 / shape.fan_in() as f64).sqrt();
            params.extend((0..shape.weight_count()).map(|_| rng.gen_range(-bound..=bound)));
            params.extend(std::iter::repeat(0.0).take(shape.out_channels));
        }
        Self { params }
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() != param_count() {
            return Err(ShapeError::InvalidParams(format!(
                "expected {} parameters, got {}",
                param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(ShapeError::InvalidParams("non-finite parameter".into()));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `params ← params − lr · grad`.
    pub fn step(&mut self, grad: &[f64], lr: f64) {
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p -= lr * g;
        }
    }

    fn layer_slices(&self) -> Vec<(&[f64], &[f64], LayerShape)> {
        let mut out = Vec::new();
        let mut off = 0;
        for s in layer_shapes() {
            let w = &self.params[off..off + s.weight_count()];
            let b = &self.params[off + s.weight_count()..off + s.param_count()];
            out.push((w, b, s));
            off += s.param_count();
        }
        out
    }

    /// Probabilities for a single-channel image, row-major.
    pub fn forward(&self, image: &[f64], width: usize, height: usize) -> Vec<f64> {
        self.forward_cached(image, width, height).probs
    }

    pub fn forward_cached(&self, image: &[f64], width: usize, height: usize) -> ForwardCache {
        assert_eq!(image.len(), width * height, "image size mismatch");
        let layers = self.layer_slices();
        let mut inputs = vec![pad(&standardize(image), 1, width, height)];
        let mut probs = Vec::new();
        for (li, (w, b, s)) in layers.iter().enumerate() {
            let mut z = correlate(
                inputs.last().expect("non-empty"),
                s.in_channels,
                s.out_channels,
                width,
                height,
                |o, i, dy, dx| w[((o * s.in_channels + i) * KERNEL + dy) * KERNEL + dx],
                b,
            );
            if li + 1 < layers.len() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
                inputs.push(pad(&z, s.out_channels, width, height));
            } else {
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
                probs = z;
            }
        }
        ForwardCache {
            width,
            height,
            inputs,
            probs,
        }
    }

    /// Parameter gradient given `∂loss/∂logit` for every output pixel.
    pub fn backward(&self, cache: &ForwardCache, logit_grad: &[f64]) -> Vec<f64> {
        let (width, height) = (cache.width, cache.height);
        let layers = self.layer_slices();
        let mut grad = vec![0.0; self.params.len()];
        let mut off = grad.len();
        let mut dz = logit_grad.to_vec();
        for li in (0..layers.len()).rev() {
            let (w, _, s) = layers[li];
            off -= s.param_count();
            let xp = &cache.inputs[li];
            let (gw, gb) = grad[off..off + s.param_count()].split_at_mut(s.weight_count());
            conv_param_grad(xp, &dz, s, width, height, gw, gb);
            if li > 0 {
                // Transposed convolution: correlate the padded output gradient
                // with the spatially flipped kernel, channels swapped.
                let k = KERNEL;
                let mut dx = correlate(
                    &pad(&dz, s.out_channels, width, height),
                    s.out_channels,
                    s.in_channels,
                    width,
                    height,
                    |i, o, dy, dxx| {
                        w[((o * s.in_channels + i) * k + (k - 1 - dy)) * k + (k - 1 - dxx)]
                    },
                    &vec![0.0; s.in_channels],
                );
                // The layer input is a ReLU output; its gradient vanishes where it is zero.
                let pw = width + 2;
                for c in 0..s.in_channels {
                    for r in 0..height {
                        let act = &xp[c * pw * (height + 2) + (r + 1) * pw + 1..][..width];
                        for (d, &a) in dx[(c * height + r) * width..][..width].iter_mut().zip(act) {
                            if a <= 0.0 {
                                *d = 0.0;
                            }
                        }
                    }
                }
                dz = dx;
            }
        }
        grad
    }
}

/// Fixed input layer: zero mean and unit variance per image (a constant
/// image only has its mean removed).
pub fn standardize(image: &[f64]) -> Vec<f64> {
    let n = image.len() as f64;
    let mean = image.iter().sum::<f64>() / n;
    let var = image.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 1e-24 { 1.0 / var.sqrt() } else { 1.0 };
    image.iter().map(|v| (v - mean) * scale).collect()
}

/// Copies `channels` planes into zero-bordered `(height+2)×(width+2)` planes.
fn pad(x: &[f64], channels: usize, width: usize, height: usize) -> Vec<f64> {
    let pw = width + 2;
    let pplane = pw * (height + 2);
    let mut out = vec![0.0; channels * pplane];
    for c in 0..channels {
        for r in 0..height {
            let dst = c * pplane + (r + 1) * pw + 1;
            out[dst..dst + width].copy_from_slice(&x[(c * height + r) * width..][..width]);
        }
    }
    out
}

/// 3×3 cross-correlation of padded input planes with "same" output size:
/// `out[o][r][c] = bias[o] + Σ_i Σ_dy Σ_dx weight(o, i, dy, dx) · xp[i][r+dy][c+dx]`.
fn correlate(
    xp: &[f64],
    in_channels: usize,
    out_channels: usize,
    width: usize,
    height: usize,
    weight: impl Fn(usize, usize, usize, usize) -> f64,
    bias: &[f64],
) -> Vec<f64> {
    let pw = width + 2;
    let pplane = pw * (height + 2);
    let mut out = vec![0.0; out_channels * width * height];
    for o in 0..out_channels {
        let taps: Vec<[f64; 3]> = (0..in_channels * KERNEL)
            .map(|j| {
                let (i, dy) = (j / KERNEL, j % KERNEL);
                [
                    weight(o, i, dy, 0),
                    weight(o, i, dy, 1),
                    weight(o, i, dy, 2),
                ]
            })
            .collect();
        for r in 0..height {
            let row = &mut out[(o * height + r) * width..][..width];
            row.iter_mut().for_each(|v| *v = bias[o]);
            for i in 0..in_channels {
                for dy in 0..KERNEL {
                    let [w0, w1, w2] = taps[i * KERNEL + dy];
                    let src = &xp[i * pplane + (r + dy) * pw..][..width + 2];
                    let (s0, s1, s2) = (&src[..width], &src[1..width + 1], &src[2..width + 2]);
                    for (((d, &a), &b), &c) in row.iter_mut().zip(s0).zip(s1).zip(s2) {
                        *d += w0 * a + w1 * b + w2 * c;
                    }
                }
            }
        }
    }
    out
}

/// Weight and bias gradients of one layer from its padded input and the
/// gradient at its pre-activation output.
fn conv_param_grad(
    xp: &[f64],
    dz: &[f64],
    s: LayerShape,
    width: usize,
    height: usize,
    gw: &mut [f64],
    gb: &mut [f64],
) {
    let pw = width + 2;
    let pplane = pw * (height + 2);
    let plane = width * height;
    // Per-column partial sums, reduced at the end in a fixed order.
    let mut acc = vec![0.0; 3 * width];
    for o in 0..s.out_channels {
        let dz_o = &dz[o * plane..(o + 1) * plane];
        gb[o] = dz_o.iter().sum();
        for i in 0..s.in_channels {
            for dy in 0..KERNEL {
                acc.iter_mut().for_each(|v| *v = 0.0);
                let (a0, rest) = acc.split_at_mut(width);
                let (a1, a2) = rest.split_at_mut(width);
                for r in 0..height {
                    let d = &dz_o[r * width..][..width];
                    let src = &xp[i * pplane + (r + dy) * pw..][..width + 2];
                    let (s0, s1, s2) = (&src[..width], &src[1..width + 1], &src[2..width + 2]);
                    for ((((&g, &x0), &x1), &x2), ((p0, p1), p2)) in d
                        .iter()
                        .zip(s0)
                        .zip(s1)
                        .zip(s2)
                        .zip(a0.iter_mut().zip(a1.iter_mut()).zip(a2.iter_mut()))
                    {
                        *p0 += g * x0;
                        *p1 += g * x1;
                        *p2 += g * x2;
                    }
                }
                let base = ((o * s.in_channels + i) * KERNEL + dy) * KERNEL;
                gw[base] = a0.iter().sum();
                gw[base + 1] = a1.iter().sum();
                gw[base + 2] = a2.iter().sum();
            }
        }
    }
}
