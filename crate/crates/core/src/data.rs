//! Procedurally generated `1 x 16 x 16` images in up to six classes:
//! horizontal bars, vertical bars, a blob, a ring, a checkerboard and
//! diagonal bars, each with random phase, position or amplitude plus
//! additive Gaussian noise. Regenerated from the seed, never stored.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Tensor;

pub const SIDE: usize = 16;
pub const MAX_CLASSES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticConfig {
    pub classes: usize,
    pub samples: usize,
    /// Standard deviation of the additive pixel noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { classes: 4, samples: 1000, noise: 0.8, seed: 2024 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub config: SyntheticConfig,
    pub images: Vec<Tensor>,
    pub labels: Vec<usize>,
    /// Indices of the training split (80 %); disjoint from `test`.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SyntheticDataset {
    pub fn train_samples(&self) -> impl Iterator<Item = (&Tensor, usize)> + '_ {
        self.train.iter().map(move |&i| (&self.images[i], self.labels[i]))
    }

    pub fn test_samples(&self) -> impl Iterator<Item = (&Tensor, usize)> + '_ {
        self.test.iter().map(move |&i| (&self.images[i], self.labels[i]))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.config.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// `samples` images, labels balanced to within one, with the default noise level.
pub fn make_synthetic(classes: usize, samples: usize, seed: u64) -> Result<SyntheticDataset> {
    generate(&SyntheticConfig { classes, samples, seed, ..SyntheticConfig::default() })
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    if config.classes < 2 || config.classes > MAX_CLASSES {
        return Err(Error::Config(format!("classes must be in 2..={MAX_CLASSES}, got {}", config.classes)));
    }
    if config.samples < 2 * config.classes {
        return Err(Error::Config(format!("need at least {} samples", 2 * config.classes)));
    }
    if !(config.noise >= 0.0) || !config.noise.is_finite() {
        return Err(Error::Param(format!("noise level {} must be nonnegative", config.noise)));
    }
    let noise = Normal::new(0.0, config.noise).map_err(|e| Error::Param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut labels: Vec<usize> = (0..config.samples).map(|i| i % config.classes).collect();
    labels.shuffle(&mut rng);
    let mut images = Vec::with_capacity(config.samples);
    for &label in &labels {
        let mut pixels = pattern(label, &mut rng);
        if config.noise > 0.0 {
            pixels.iter_mut().for_each(|p| *p += noise.sample(&mut rng));
        }
        images.push(Tensor::new(vec![1, SIDE, SIDE], pixels)?);
    }
    let cut = config.samples * 4 / 5;
    let train = (0..cut).collect();
    let test = (cut..config.samples).collect();
    Ok(SyntheticDataset { config: *config, images, labels, train, test })
}

fn pattern<R: Rng + ?Sized>(label: usize, rng: &mut R) -> Vec<f64> {
    let amp = rng.random_range(0.8..1.2);
    let phase = rng.random_range(0..2usize);
    let dx = rng.random_range(-1.5..1.5);
    let dy = rng.random_range(-1.5..1.5);
    let size: f64 = rng.random_range(0.0..1.0);
    let centre = (SIDE as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; SIDE * SIDE];
    for r in 0..SIDE {
        for c in 0..SIDE {
            let (y, x) = (r as f64 - centre - dy, c as f64 - centre - dx);
            let on = |b: bool| if b { 1.0 } else { 0.0 };
            let v = match label {
                0 => on((r + phase) % 4 < 2),
                1 => on((c + phase) % 4 < 2),
                2 => {
                    let s = 2.0 + size;
                    math::exp(-(x * x + y * y) / (2.0 * s * s))
                }
                3 => {
                    let d = math::sqrt(x * x + y * y) - (4.5 + 1.5 * size);
                    math::exp(-d * d / (2.0 * 0.8 * 0.8))
                }
                4 => on(((r + 2 * phase) / 4 + (c + 2 * phase) / 4) % 2 == 0),
                _ => on((r + c + phase) % 6 < 3),
            };
            out[r * SIDE + c] = amp * v;
        }
    }
    out
}
