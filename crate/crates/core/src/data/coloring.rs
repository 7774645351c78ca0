//! Spurious color-bias injection.
//!
//! Training samples of class `c` get palette color `c` on each bias attribute
//! with probability `ratio`, otherwise one of the other nine colors uniformly.
//! Test sets are stratified exactly: every class has the same number of
//! samples in every aligned/conflicting combination.

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, DatasetConfig, DatasetPair, GrayDigits, Variant, GRAY_LEN, HALF_SPLIT, IMAGE_LEN, IMAGE_SIDE, PALETTE};
use crate::{Error, Result, NUM_CLASSES};

const STREAM_TRAIN_ORDER: u64 = 1;
const STREAM_TEST_ORDER: u64 = 2;
const STREAM_TRAIN_COLOR: u64 = 3;
const STREAM_TEST_COLOR: u64 = 4;

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Builds the colored train/test pair for any coloring variant.
pub fn generate(train_src: &GrayDigits, test_src: &GrayDigits, config: &DatasetConfig) -> Result<DatasetPair> {
    match config.variant {
        Variant::MultiColor => generate_multi_color(train_src, test_src, config),
        Variant::ColoredFg | Variant::ColoredBg => generate_colored(train_src, test_src, config),
        Variant::SyntheticGlyph => Err(Error::Config(
            "synthetic-glyph is a digit source, not a coloring variant".into(),
        )),
    }
}

pub fn generate_multi_color(train_src: &GrayDigits, test_src: &GrayDigits, config: &DatasetConfig) -> Result<DatasetPair> {
    if config.variant != Variant::MultiColor {
        return Err(Error::Config(format!("expected multi-color, got {:?}", config.variant)));
    }
    build(train_src, test_src, config)
}

pub fn generate_colored(train_src: &GrayDigits, test_src: &GrayDigits, config: &DatasetConfig) -> Result<DatasetPair> {
    if !matches!(config.variant, Variant::ColoredFg | Variant::ColoredBg) {
        return Err(Error::Config(format!("expected a colored variant, got {:?}", config.variant)));
    }
    build(train_src, test_src, config)
}

fn build(train_src: &GrayDigits, test_src: &GrayDigits, config: &DatasetConfig) -> Result<DatasetPair> {
    config.validate()?;
    if train_src.is_empty() || test_src.is_empty() {
        return Err(Error::Config("source digit set is empty".into()));
    }
    if config.train_count > train_src.len() {
        return Err(Error::Config(format!(
            "train_count {} exceeds the {} available digits",
            config.train_count,
            train_src.len()
        )));
    }
    let painter = Painter::new(config);
    let train = build_train(train_src, config, &painter);
    let test = build_test(test_src, config, &painter)?;
    Ok(DatasetPair { train, test })
}

fn conflicting_color(target: u8, rng: &mut impl Rng) -> u8 {
    ((usize::from(target) + 1 + rng.random_range(0..NUM_CLASSES - 1)) % NUM_CLASSES) as u8
}

fn build_train(src: &GrayDigits, config: &DatasetConfig, painter: &Painter) -> Dataset {
    let mut order: Vec<usize> = (0..src.len()).collect();
    order.shuffle(&mut stream(config.seed, STREAM_TRAIN_ORDER));
    let mut rng = stream(config.seed, STREAM_TRAIN_COLOR);
    let mut out = Dataset::empty(config.variant, &config.ratios);
    let mut image = vec![0u8; IMAGE_LEN];
    let mut groups = vec![0u8; config.ratios.len()];
    for &i in order.iter().take(config.train_count) {
        let target = src.labels[i];
        for (g, &ratio) in groups.iter_mut().zip(&config.ratios) {
            *g = if rng.random::<f64>() < ratio {
                target
            } else {
                conflicting_color(target, &mut rng)
            };
        }
        painter.paint(src.image(i), &groups, &mut rng, &mut image);
        out.push(&image, target, &groups);
    }
    out
}

fn build_test(src: &GrayDigits, config: &DatasetConfig, painter: &Painter) -> Result<Dataset> {
    let attrs = config.ratios.len();
    let cells = 1usize << attrs;
    let per_cell = config.test_count / (cells * NUM_CLASSES);
    let mut order: Vec<usize> = (0..src.len()).collect();
    order.shuffle(&mut stream(config.seed, STREAM_TEST_ORDER));
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for i in order {
        pools[usize::from(src.labels[i])].push(i);
    }
    if let Some(c) = pools.iter().position(Vec::is_empty) {
        return Err(Error::Config(format!("test source has no digits of class {c}")));
    }
    let mut rng = stream(config.seed, STREAM_TEST_COLOR);
    let mut out = Dataset::empty(config.variant, &config.ratios);
    let mut image = vec![0u8; IMAGE_LEN];
    let mut groups = vec![0u8; attrs];
    for (class, pool) in pools.iter().enumerate() {
        let target = class as u8;
        for j in 0..cells * per_cell {
            // cell bits, most significant = first attribute; 0 = aligned
            let cell = j / per_cell;
            for (a, g) in groups.iter_mut().enumerate() {
                let conflicting = (cell >> (attrs - 1 - a)) & 1 == 1;
                *g = if conflicting {
                    conflicting_color(target, &mut rng)
                } else {
                    target
                };
            }
            // Pools smaller than the quota are reused with fresh colors.
            let src_idx = pool[j % pool.len()];
            painter.paint(src.image(src_idx), &groups, &mut rng, &mut image);
            out.push(&image, target, &groups);
        }
    }
    Ok(out)
}

struct Painter {
    variant: Variant,
    jitter: Option<Normal<f64>>,
}

impl Painter {
    fn new(config: &DatasetConfig) -> Self {
        let jitter = (config.jitter_std > 0.0)
            .then(|| Normal::new(0.0, config.jitter_std).expect("validated std"));
        Self {
            variant: config.variant,
            jitter,
        }
    }

    fn color(&self, id: u8, rng: &mut impl Rng) -> [f64; 3] {
        let base = PALETTE[usize::from(id)];
        let mut out = [0.0; 3];
        for (o, &b) in out.iter_mut().zip(&base) {
            let noise = self.jitter.map_or(0.0, |n| n.sample(rng));
            *o = (f64::from(b) / 255.0 + noise).clamp(0.0, 1.0);
        }
        out
    }

    /// Writes the channel-major colored image for one grayscale digit.
    fn paint(&self, gray: &[u8], groups: &[u8], rng: &mut impl Rng, out: &mut [u8]) {
        let colors: Vec<[f64; 3]> = groups.iter().map(|&g| self.color(g, rng)).collect();
        for (p, &v) in gray.iter().enumerate() {
            let intensity = f64::from(v) / 255.0;
            let col = p % IMAGE_SIDE;
            let color = match self.variant {
                Variant::MultiColor if col >= HALF_SPLIT => colors[1],
                _ => colors[0],
            };
            for (ch, &c) in color.iter().enumerate() {
                let value = match self.variant {
                    Variant::ColoredFg => c * intensity,
                    _ => c * (1.0 - intensity) + intensity,
                };
                out[ch * GRAY_LEN + p] = (value * 255.0).round() as u8;
            }
        }
    }
}
