//! Seven-segment digit glyphs with seeded affine jitter.
//!
//! Used wherever MNIST is not available (tests, benches, offline smoke runs).
//! Sample `i` has label `i % 10`, so any count that is a multiple of ten is
//! exactly class-balanced.

use rand::Rng;

use super::coloring::stream;
use super::{DatasetConfig, GrayDigits, Variant, GRAY_LEN, IMAGE_SIDE};
use crate::{Error, Result, NUM_CLASSES};

const STREAM_TRAIN: u64 = 5;
const STREAM_TEST: u64 = 6;

// Segment endpoints in glyph units, x in [-0.5, 0.5], y in [-1, 1] (down).
const TL: (f64, f64) = (-0.5, -1.0);
const TR: (f64, f64) = (0.5, -1.0);
const ML: (f64, f64) = (-0.5, 0.0);
const MR: (f64, f64) = (0.5, 0.0);
const BL: (f64, f64) = (-0.5, 1.0);
const BR: (f64, f64) = (0.5, 1.0);

/// Segments a..g: top, upper right, lower right, bottom, lower left, upper left, middle.
const SEGMENTS: [((f64, f64), (f64, f64)); 7] = [
    (TL, TR),
    (TR, MR),
    (MR, BR),
    (BL, BR),
    (ML, BL),
    (TL, ML),
    (ML, MR),
];

/// Bit `s` set when segment `s` is lit.
const DIGIT_SEGMENTS: [u8; NUM_CLASSES] = [
    0b011_1111, // 0: abcdef
    0b000_0110, // 1: bc
    0b101_1011, // 2: abdeg
    0b100_1111, // 3: abcdg
    0b110_0110, // 4: bcfg
    0b110_1101, // 5: acdfg
    0b111_1101, // 6: acdefg
    0b000_0111, // 7: abc
    0b111_1111, // 8
    0b110_1111, // 9: abcdfg
];

/// Draws the train and test grayscale sets described by `config`.
pub fn synthesize_glyphs(config: &DatasetConfig) -> Result<(GrayDigits, GrayDigits)> {
    if config.variant != Variant::SyntheticGlyph {
        return Err(Error::Config(format!("expected synthetic-glyph, got {:?}", config.variant)));
    }
    config.validate()?;
    Ok((
        draw_set(config.train_count, &mut stream(config.seed, STREAM_TRAIN)),
        draw_set(config.test_count, &mut stream(config.seed, STREAM_TEST)),
    ))
}

fn draw_set(count: usize, rng: &mut impl Rng) -> GrayDigits {
    let mut pixels = vec![0u8; count * GRAY_LEN];
    let mut labels = Vec::with_capacity(count);
    for (i, out) in pixels.chunks_exact_mut(GRAY_LEN).enumerate() {
        let label = (i % NUM_CLASSES) as u8;
        draw_glyph(label, rng, out);
        labels.push(label);
    }
    GrayDigits { pixels, labels }
}

fn draw_glyph(label: u8, rng: &mut impl Rng, out: &mut [u8]) {
    let angle = rng.random_range(-0.2..0.2f64);
    let scale = 9.0 * rng.random_range(0.85..1.1f64);
    let shear = rng.random_range(-0.2..0.2f64);
    let center = (
        13.5 + rng.random_range(-2.0..2.0f64),
        13.5 + rng.random_range(-1.5..1.5f64),
    );
    let half_width = rng.random_range(1.0..2.0f64);
    let (sin, cos) = angle.sin_cos();
    let to_pixels = |(x, y): (f64, f64)| {
        let xs = x + shear * y;
        (
            center.0 + scale * (cos * xs - sin * y),
            center.1 + scale * (sin * xs + cos * y),
        )
    };
    let lit: Vec<_> = SEGMENTS
        .iter()
        .enumerate()
        .filter(|(s, _)| DIGIT_SEGMENTS[usize::from(label)] >> s & 1 == 1)
        .map(|(_, &(a, b))| (to_pixels(a), to_pixels(b)))
        .collect();
    for (p, px) in out.iter_mut().enumerate() {
        let q = ((p % IMAGE_SIDE) as f64, (p / IMAGE_SIDE) as f64);
        let d = lit
            .iter()
            .map(|&(a, b)| segment_distance(q, a, b))
            .fold(f64::INFINITY, f64::min);
        // one-pixel linear ramp at the stroke edge
        let v = (half_width + 0.5 - d).clamp(0.0, 1.0);
        *px = (v * 255.0).round() as u8;
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (cx * cx + cy * cy).sqrt()
}
