//! Biased digit datasets: MNIST loading, color-bias injection, the binary
//! dataset cache and per-class batching.

pub mod batch;
pub mod cache;
pub mod coloring;
pub mod glyphs;
pub mod idx;

use serde::{Deserialize, Serialize};

use crate::tensor::{Real, Tensor};
use crate::{Error, Result, NUM_CLASSES};

pub use batch::{split_by_class, ClassBatch, EpochSampler};
pub use coloring::{generate, generate_colored, generate_multi_color};
pub use glyphs::synthesize_glyphs;

pub const IMAGE_SIDE: usize = 28;
pub const CHANNELS: usize = 3;
pub const GRAY_LEN: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const IMAGE_LEN: usize = CHANNELS * GRAY_LEN;
/// Columns `0..HALF_SPLIT` form the left half, the rest the right half.
pub const HALF_SPLIT: usize = 14;

/// Class-to-color palette: color `c` is the bias-aligned color of digit `c`.
pub const PALETTE: [[u8; 3]; NUM_CLASSES] = [
    [230, 25, 75],   // red
    [60, 180, 75],   // green
    [255, 225, 25],  // yellow
    [0, 130, 200],   // blue
    [245, 130, 48],  // orange
    [145, 30, 180],  // purple
    [70, 240, 240],  // cyan
    [240, 50, 230],  // magenta
    [210, 245, 60],  // lime
    [128, 0, 0],     // maroon
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Independent left-half and right-half background colors.
    MultiColor,
    /// Digit strokes colored, black background.
    ColoredFg,
    /// Whole background colored, white strokes.
    ColoredBg,
    /// Procedurally drawn grayscale digits, a stand-in for MNIST.
    SyntheticGlyph,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::MultiColor => 0,
            Variant::ColoredFg => 1,
            Variant::ColoredBg => 2,
            Variant::SyntheticGlyph => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Variant::MultiColor,
            1 => Variant::ColoredFg,
            2 => Variant::ColoredBg,
            3 => Variant::SyntheticGlyph,
            _ => return None,
        })
    }

    /// Number of bias attributes a dataset of this variant carries.
    pub fn attributes(self) -> usize {
        match self {
            Variant::MultiColor => 2,
            Variant::ColoredFg | Variant::ColoredBg => 1,
            Variant::SyntheticGlyph => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub variant: Variant,
    /// Fraction of bias-aligned training samples, one per attribute.
    pub ratios: Vec<f64>,
    pub seed: u64,
    pub train_count: usize,
    pub test_count: usize,
    /// Std of the Gaussian perturbation added to palette colors.
    pub jitter_std: f64,
}

impl DatasetConfig {
    pub fn multi_color(left: f64, right: f64, seed: u64) -> Self {
        Self {
            variant: Variant::MultiColor,
            ratios: vec![left, right],
            seed,
            train_count: 60_000,
            test_count: 8_000,
            jitter_std: 0.0,
        }
    }

    pub fn colored(variant: Variant, ratio: f64, seed: u64) -> Self {
        Self {
            variant,
            ratios: vec![ratio],
            ..Self::multi_color(ratio, ratio, seed)
        }
    }

    pub fn glyphs(train_count: usize, test_count: usize, seed: u64) -> Self {
        Self {
            variant: Variant::SyntheticGlyph,
            ratios: Vec::new(),
            seed,
            train_count,
            test_count,
            jitter_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.variant.attributes();
        if self.ratios.len() != want {
            return Err(Error::Config(format!(
                "{:?} takes {want} ratio(s), got {}",
                self.variant,
                self.ratios.len()
            )));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::Config(format!("ratio {r} outside (0, 1]")));
        }
        if self.train_count == 0 || self.test_count == 0 {
            return Err(Error::Config("train and test counts must be positive".into()));
        }
        let cells = (1usize << want) * NUM_CLASSES;
        if want > 0 && self.test_count < cells {
            return Err(Error::Config(format!(
                "test_count {} leaves an empty stratification cell (need >= {cells})",
                self.test_count
            )));
        }
        if !(self.jitter_std >= 0.0 && self.jitter_std.is_finite()) {
            return Err(Error::Config(format!("jitter_std {} must be >= 0", self.jitter_std)));
        }
        Ok(())
    }
}

/// Grayscale digits with labels, `GRAY_LEN` bytes per image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayDigits {
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl GrayDigits {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.pixels[i * GRAY_LEN..(i + 1) * GRAY_LEN]
    }
}

/// One colored sample with its generation-time bias labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedSample {
    /// Channel-major 3×28×28 values in [0, 1].
    pub image: Vec<f32>,
    pub target: usize,
    pub bias_groups: Vec<u8>,
    pub aligned_flags: Vec<bool>,
}

/// Colored dataset stored as quantized bytes, struct-of-arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub variant: Variant,
    pub ratios: Vec<f32>,
    pub attributes: usize,
    pub pixels: Vec<u8>,
    pub targets: Vec<u8>,
    /// `attributes` entries per sample.
    pub bias_groups: Vec<u8>,
    pub aligned: Vec<bool>,
}

impl Dataset {
    pub fn empty(variant: Variant, ratios: &[f64]) -> Self {
        Self {
            variant,
            ratios: ratios.iter().map(|&r| r as f32).collect(),
            attributes: ratios.len(),
            pixels: Vec::new(),
            targets: Vec::new(),
            bias_groups: Vec::new(),
            aligned: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn push(&mut self, image: &[u8], target: u8, groups: &[u8]) {
        debug_assert_eq!(image.len(), IMAGE_LEN);
        debug_assert_eq!(groups.len(), self.attributes);
        self.pixels.extend_from_slice(image);
        self.targets.push(target);
        self.bias_groups.extend_from_slice(groups);
        self.aligned.extend(groups.iter().map(|&g| g == target));
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.pixels[i * IMAGE_LEN..(i + 1) * IMAGE_LEN]
    }

    pub fn target(&self, i: usize) -> usize {
        usize::from(self.targets[i])
    }

    pub fn bias_group(&self, i: usize, attr: usize) -> u8 {
        self.bias_groups[i * self.attributes + attr]
    }

    pub fn is_aligned(&self, i: usize, attr: usize) -> bool {
        self.aligned[i * self.attributes + attr]
    }

    pub fn sample(&self, i: usize) -> BiasedSample {
        let a = self.attributes;
        BiasedSample {
            image: self.image(i).iter().map(|&p| f32::from(p) / 255.0).collect(),
            target: self.target(i),
            bias_groups: self.bias_groups[i * a..(i + 1) * a].to_vec(),
            aligned_flags: self.aligned[i * a..(i + 1) * a].to_vec(),
        }
    }

    /// Images at `indices` as an `n×3×28×28` tensor scaled into [0, 1].
    pub fn batch_tensor<T: Real>(&self, indices: &[usize]) -> Tensor<T> {
        let scale = T::of(1.0 / 255.0);
        let mut data = Vec::with_capacity(indices.len() * IMAGE_LEN);
        for &i in indices {
            data.extend(self.image(i).iter().map(|&p| T::of(f64::from(p)) * scale));
        }
        Tensor::new(vec![indices.len(), CHANNELS, IMAGE_SIDE, IMAGE_SIDE], data)
            .expect("batch of whole images")
    }

    pub fn aligned_fraction(&self, attr: usize) -> f64 {
        let hits = (0..self.len()).filter(|&i| self.is_aligned(i, attr)).count();
        hits as f64 / self.len().max(1) as f64
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &t in &self.targets {
            counts[usize::from(t)] += 1;
        }
        counts
    }

    /// First `n` samples (datasets are generated in a random order).
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let a = self.attributes;
        Dataset {
            variant: self.variant,
            ratios: self.ratios.clone(),
            attributes: a,
            pixels: self.pixels[..n * IMAGE_LEN].to_vec(),
            targets: self.targets[..n].to_vec(),
            bias_groups: self.bias_groups[..n * a].to_vec(),
            aligned: self.aligned[..n * a].to_vec(),
        }
    }
}

/// Train/test pair produced by one generation call.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPair {
    pub train: Dataset,
    pub test: Dataset,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(DatasetConfig::multi_color(0.99, 0.95, 1).validate().is_ok());
        assert!(DatasetConfig::multi_color(1.5, 0.95, 1).validate().is_err());
        assert!(DatasetConfig::multi_color(0.0, 0.95, 1).validate().is_err());
        let mut c = DatasetConfig::colored(Variant::ColoredFg, 0.995, 1);
        assert!(c.validate().is_ok());
        c.ratios.push(0.9);
        assert!(c.validate().is_err());
        let mut c = DatasetConfig::multi_color(0.99, 0.95, 1);
        c.ratios.push(0.9);
        assert!(c.validate().is_err(), "more than two attributes are rejected");
        let mut c = DatasetConfig::multi_color(0.99, 0.95, 1);
        c.test_count = 39;
        assert!(c.validate().is_err());
    }

    #[test]
    fn variant_codes_round_trip() {
        for v in [Variant::MultiColor, Variant::ColoredFg, Variant::ColoredBg, Variant::SyntheticGlyph] {
            assert_eq!(Variant::from_code(v.code()), Some(v));
        }
        assert_eq!(Variant::from_code(9), None);
    }

    #[test]
    fn palette_colors_are_distinct() {
        for (i, a) in PALETTE.iter().enumerate() {
            for (j, b) in PALETTE.iter().enumerate().skip(i + 1) {
                let d: i32 = a.iter().zip(b).map(|(&x, &y)| (i32::from(x) - i32::from(y)).abs()).sum();
                assert!(d > 90, "colors {i} and {j} too close");
            }
        }
    }
}
