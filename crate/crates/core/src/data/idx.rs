//! IDX reader for the MNIST distribution files.

use std::path::Path;

use thiserror::Error;

use super::{GrayDigits, GRAY_LEN, IMAGE_SIDE};
use crate::{Error, NUM_CLASSES};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdxError {
    #[error("unknown magic {magic:#010x} at byte {offset}")]
    UnknownMagic { offset: usize, magic: u32 },
    #[error("truncated at byte {offset}: needed {needed} bytes, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("dimension mismatch at byte {offset}: {detail}")]
    DimensionMismatch { offset: usize, detail: String },
    #[error("label {value} at byte {offset} is not a digit class")]
    InvalidLabel { offset: usize, value: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.rows * self.cols;
        &self.pixels[i * len..(i + 1) * len]
    }

    /// Pixel values scaled into [0, 1].
    pub fn scaled(&self) -> Vec<f32> {
        self.pixels.iter().map(|&p| f32::from(p) / 255.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    Images(IdxImages),
    Labels(Vec<u8>),
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, IdxError> {
    let chunk = bytes.get(offset..offset + 4).ok_or(IdxError::Truncated {
        offset,
        needed: 4,
        available: bytes.len().saturating_sub(offset),
    })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("4-byte slice")))
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData, IdxError> {
    let magic = read_u32(bytes, 0)?;
    let ndims = match magic {
        IMAGE_MAGIC => 3,
        LABEL_MAGIC => 1,
        _ => return Err(IdxError::UnknownMagic { offset: 0, magic }),
    };
    let dims = (0..ndims)
        .map(|d| read_u32(bytes, 4 + 4 * d).map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let header = 4 + 4 * ndims;
    if let Some(pos) = dims[1..].iter().position(|&d| d == 0) {
        return Err(IdxError::DimensionMismatch {
            offset: 8 + 4 * pos,
            detail: "zero-sized image dimension".into(),
        });
    }
    let payload: usize = dims.iter().product();
    let available = bytes.len() - header;
    if available < payload {
        return Err(IdxError::Truncated {
            offset: header,
            needed: payload,
            available,
        });
    }
    if available > payload {
        return Err(IdxError::DimensionMismatch {
            offset: header + payload,
            detail: format!("{} bytes beyond the {payload}-byte payload", available - payload),
        });
    }
    let body = bytes[header..].to_vec();
    Ok(if ndims == 3 {
        IdxData::Images(IdxImages {
            count: dims[0],
            rows: dims[1],
            cols: dims[2],
            pixels: body,
        })
    } else {
        IdxData::Labels(body)
    })
}

/// Serializes images back into an IDX file (magic 2051, dimensions big-endian).
pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

/// Serializes labels back into an IDX file (magic 2049).
pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Combines an image file and a label file into a digit set, checking they agree.
pub fn digits_from_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<GrayDigits, IdxError> {
    let IdxData::Images(images) = parse_idx(image_bytes)? else {
        return Err(IdxError::UnknownMagic {
            offset: 0,
            magic: LABEL_MAGIC,
        });
    };
    let IdxData::Labels(labels) = parse_idx(label_bytes)? else {
        return Err(IdxError::UnknownMagic {
            offset: 0,
            magic: IMAGE_MAGIC,
        });
    };
    if images.rows != IMAGE_SIDE || images.cols != IMAGE_SIDE {
        return Err(IdxError::DimensionMismatch {
            offset: 8,
            detail: format!("images are {}x{}, expected 28x28", images.rows, images.cols),
        });
    }
    if images.count != labels.len() {
        return Err(IdxError::DimensionMismatch {
            offset: 4,
            detail: format!("{} images but {} labels", images.count, labels.len()),
        });
    }
    if let Some(i) = labels.iter().position(|&l| usize::from(l) >= NUM_CLASSES) {
        return Err(IdxError::InvalidLabel {
            offset: 8 + i,
            value: labels[i],
        });
    }
    debug_assert_eq!(images.pixels.len(), images.count * GRAY_LEN);
    Ok(GrayDigits {
        pixels: images.pixels,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn file_names(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        }
    }
}

/// Loads one MNIST split from a directory holding the uncompressed IDX files.
pub fn load_mnist(dir: &Path, split: Split) -> crate::Result<GrayDigits> {
    let (img_name, lbl_name) = split.file_names();
    let read = |name: &str| {
        let path = dir.join(name);
        std::fs::read(&path).map_err(|e| Error::io(path, e))
    };
    let images = read(img_name)?;
    let labels = read(lbl_name)?;
    Ok(digits_from_idx(&images, &labels)?)
}
