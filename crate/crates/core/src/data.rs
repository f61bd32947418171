//! Deterministic synthetic dataset of low-contrast star-convex objects.
//!
//! Every object is the star-convex region `ρ ≤ r(θ)` with
//! `r(θ) = r0 · (1 + Σ_k c_k cos(kθ + φ_k))`, rasterised at pixel centres.
//! Images are a 0.5 background raised by `contrast` inside the object, plus
//! Gaussian noise, clipped to `[0, 1]`. All randomness flows from one seed.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::contour;
use crate::error::{Result, ShapeError};
use crate::io::{self, GrayImage};
use crate::mask::BinaryMask;

/// Smallest object area accepted by the generator.
pub const MIN_AREA: usize = 50;
const MAX_ATTEMPTS: usize = 64;

/// One harmonic term `c · cos(kθ + φ)` of a star-convex radius function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusTerm {
    pub k: u32,
    pub amplitude: f64,
    pub phase: f64,
}

/// Star-convex shape with an analytic radius function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarShape {
    /// `(row, col)`
    pub center: (f64, f64),
    pub r0: f64,
    pub terms: Vec<RadiusTerm>,
}

impl StarShape {
    pub fn disk(center: (f64, f64), radius: f64) -> Self {
        Self {
            center,
            r0: radius,
            terms: Vec::new(),
        }
    }

    /// `θ` is measured from the +col axis towards +row.
    pub fn radius_at(&self, theta: f64) -> f64 {
        self.r0
            * (1.0
                + self
                    .terms
                    .iter()
                    .map(|t| t.amplitude * (t.k as f64 * theta + t.phase).cos())
                    .sum::<f64>())
    }

    pub fn max_radius(&self) -> f64 {
        self.r0 * (1.0 + self.terms.iter().map(|t| t.amplitude.abs()).sum::<f64>())
    }

    pub fn contains(&self, row: f64, col: f64) -> bool {
        let (dr, dc) = (row - self.center.0, col - self.center.1);
        let rho = dr.hypot(dc);
        rho <= self.radius_at(dr.atan2(dc))
    }

    pub fn rasterize(&self, width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_fn(width, height, |r, c| self.contains(r as f64, c as f64))
    }

    /// Real-valued boundary polygon sampled at `samples` equal angles.
    pub fn boundary(&self, samples: usize) -> Vec<(f64, f64)> {
        (0..samples)
            .map(|i| {
                let th = i as f64 * TAU / samples as f64;
                let r = self.radius_at(th);
                (self.center.0 + r * th.sin(), self.center.1 + r * th.cos())
            })
            .collect()
    }
}

/// Generator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub width: usize,
    pub height: usize,
    /// Intensity step between background and object.
    pub contrast: f64,
    pub noise_sigma: f64,
    /// Number of radius harmonics; 0 gives disks.
    pub harmonics: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            width: 96,
            height: 96,
            contrast: 0.05,
            noise_sigma: 0.1,
            harmonics: 3,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(ShapeError::InvalidParams(format!(
                "image size {}x{} is below 64x64",
                self.width, self.height
            )));
        }
        if !(self.contrast > 0.0 && self.contrast <= 0.5) {
            return Err(ShapeError::InvalidParams(format!(
                "contrast {} outside (0, 0.5]",
                self.contrast
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(ShapeError::InvalidParams(format!(
                "noise sigma {} must be >= 0",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSample {
    pub image: GrayImage,
    pub mask: BinaryMask,
    pub seed: u64,
    pub shape: StarShape,
}

/// SplitMix64 finaliser, used to derive independent per-item seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn draw_shape(rng: &mut ChaCha8Rng, params: &GenParams) -> StarShape {
    let side = params.width.min(params.height) as f64;
    let r0 = rng.gen_range(0.18..0.28) * side;
    let h = params.harmonics;
    let terms = (1..=h)
        .map(|k| RadiusTerm {
            k,
            amplitude: rng.gen_range(0.3..1.0) * 0.45 / h as f64,
            phase: rng.gen_range(0.0..TAU),
        })
        .collect::<Vec<_>>();
    let mut shape = StarShape {
        center: (0.0, 0.0),
        r0,
        terms,
    };
    let reach = shape.max_radius() + 2.0;
    let row = rng.gen_range(reach..(params.height as f64 - reach - 1.0).max(reach + 1e-9));
    let col = rng.gen_range(reach..(params.width as f64 - reach - 1.0).max(reach + 1e-9));
    shape.center = (row, col);
    shape
}

/// Draws one sample; a pure function of `(seed, params)`.
pub fn generate_sample(seed: u64, params: &GenParams) -> Result<ShapeSample> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let shape = draw_shape(&mut rng, params);
        let mask = shape.rasterize(params.width, params.height);
        if mask.foreground_count() < MIN_AREA || contour::trace_largest(&mask).is_err() {
            continue;
        }
        let image = render_image(&mask, params, &mut rng);
        return Ok(ShapeSample {
            image,
            mask,
            seed,
            shape,
        });
    }
    Err(ShapeError::InvalidParams(
        "could not draw a valid object for these parameters".into(),
    ))
}

fn render_image(mask: &BinaryMask, params: &GenParams, rng: &mut ChaCha8Rng) -> GrayImage {
    let noise = Normal::new(0.0, params.noise_sigma).expect("sigma validated");
    let pixels = mask
        .data()
        .iter()
        .map(|&m| {
            let base = 0.5 + params.contrast * m as f64;
            let n = if params.noise_sigma > 0.0 {
                noise.sample(rng)
            } else {
                0.0
            };
            (base + n).clamp(0.0, 1.0)
        })
        .collect();
    GrayImage {
        width: params.width,
        height: params.height,
        pixels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitCounts {
    fn default() -> Self {
        Self {
            train: 200,
            val: 50,
            test: 100,
        }
    }
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// Sample ids of each partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random disjoint partition of `0..counts.total()`.
pub fn make_split(seed: u64, counts: SplitCounts) -> Result<Split> {
    if counts.train == 0 || counts.val == 0 || counts.test == 0 {
        return Err(ShapeError::InvalidParams(
            "every split needs at least one sample".into(),
        ));
    }
    let mut ids: Vec<usize> = (0..counts.total()).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX)));
    let test = ids.split_off(counts.train + counts.val);
    let val = ids.split_off(counts.train);
    Ok(Split {
        train: ids,
        val,
        test,
    })
}

/// What is needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub seed: u64,
    pub counts: SplitCounts,
    pub params: GenParams,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            counts: SplitCounts::default(),
            params: GenParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Partition {
    type Err = ShapeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            other => Err(ShapeError::InvalidParams(format!(
                "unknown split `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub samples: Vec<ShapeSample>,
    pub split: Split,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    id: usize,
    seed: u64,
    shape: StarShape,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    spec: DatasetSpec,
    split: Split,
    samples: Vec<ManifestEntry>,
}

pub fn sample_name(id: usize) -> String {
    format!("{id:04}")
}

impl Dataset {
    pub fn generate(spec: DatasetSpec) -> Result<Self> {
        let split = make_split(spec.seed, spec.counts)?;
        let samples = (0..spec.counts.total())
            .map(|id| generate_sample(derive_seed(spec.seed, id as u64), &spec.params))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            samples,
            split,
        })
    }

    pub fn ids(&self, part: Partition) -> &[usize] {
        match part {
            Partition::Train => &self.split.train,
            Partition::Val => &self.split.val,
            Partition::Test => &self.split.test,
        }
    }

    pub fn part(&self, part: Partition) -> Vec<&ShapeSample> {
        self.ids(part).iter().map(|&i| &self.samples[i]).collect()
    }

    /// Writes `<id>_img.pgm`, `<id>_mask.pbm` and `manifest.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.samples.len());
        for (id, s) in self.samples.iter().enumerate() {
            let name = sample_name(id);
            io::write_image_pgm(dir.join(format!("{name}_img.pgm")), &s.image)?;
            io::write_pbm(dir.join(format!("{name}_mask.pbm")), &s.mask)?;
            entries.push(ManifestEntry {
                id,
                seed: s.seed,
                shape: s.shape.clone(),
            });
        }
        let manifest = Manifest {
            spec: self.spec,
            split: self.split.clone(),
            samples: entries,
        };
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }

    /// Loads a dataset written by [`save`](Self::save). Images come back
    /// quantised to 8 bits.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        let mut samples = Vec::with_capacity(manifest.samples.len());
        for e in manifest.samples {
            let name = sample_name(e.id);
            let image = io::read_image(dir.join(format!("{name}_img.pgm")))?;
            let mask = io::read_mask(dir.join(format!("{name}_mask.pbm")))?;
            if image.dims() != mask.dims() {
                return Err(ShapeError::DimensionMismatch {
                    left: image.dims(),
                    right: mask.dims(),
                });
            }
            samples.push(ShapeSample {
                image,
                mask,
                seed: e.seed,
                shape: e.shape,
            });
        }
        let all = manifest
            .split
            .train
            .iter()
            .chain(&manifest.split.val)
            .chain(&manifest.split.test);
        if let Some(bad) = all.into_iter().find(|&&i| i >= samples.len()) {
            return Err(ShapeError::Format {
                what: "dataset manifest",
                detail: format!("split references missing sample {bad}"),
            });
        }
        Ok(Self {
            spec: manifest.spec,
            samples,
            split: manifest.split,
        })
    }
}
