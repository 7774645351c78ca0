//! Binary dataset cache (`DBMC`) and the JSON sidecar describing a generated pair.
//!
//! Layout, little-endian: magic `DBMC`, u16 version, u8 variant code, u8
//! attribute count `A`, `A` × f32 ratio, u32 sample count, then per sample
//! u8 target, `A` × u8 bias group, `A` × u8 aligned flag, 3×28×28 u8 pixels.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetConfig, DatasetPair, Variant, IMAGE_LEN};
use crate::{Error, Result, NUM_CLASSES};

pub const MAGIC: &[u8; 4] = b"DBMC";
pub const VERSION: u16 = 1;
pub const TRAIN_FILE: &str = "train.dbmc";
pub const TEST_FILE: &str = "test.dbmc";
pub const SIDECAR_FILE: &str = "dataset.json";

pub fn encode(ds: &Dataset) -> Vec<u8> {
    let a = ds.attributes;
    let mut out = Vec::with_capacity(12 + 4 * a + ds.len() * (1 + 2 * a + IMAGE_LEN));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(ds.variant.code());
    out.push(a as u8);
    for r in &ds.ratios {
        out.extend_from_slice(&r.to_le_bytes());
    }
    out.extend_from_slice(&(ds.len() as u32).to_le_bytes());
    for i in 0..ds.len() {
        out.push(ds.targets[i]);
        out.extend_from_slice(&ds.bias_groups[i * a..(i + 1) * a]);
        out.extend(ds.aligned[i * a..(i + 1) * a].iter().map(|&f| u8::from(f)));
        out.extend_from_slice(ds.image(i));
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| {
            Error::format(
                self.path,
                "dataset cache",
                format!("truncated reading {what} at byte {}", self.pos),
            )
        })?;
        self.pos = end;
        Ok(chunk)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("sized chunk"))
    }

    fn bad(&self, detail: String) -> Error {
        Error::format(self.path, "dataset cache", detail)
    }
}

/// Parses a cache image; `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0, path };
    if &r.array::<4>("magic")? != MAGIC {
        return Err(r.bad("bad magic (expected DBMC)".into()));
    }
    let version = u16::from_le_bytes(r.array("version")?);
    if version != VERSION {
        return Err(r.bad(format!("unsupported version {version}")));
    }
    let code = r.u8("variant")?;
    let variant = Variant::from_code(code).ok_or_else(|| r.bad(format!("unknown variant code {code}")))?;
    let a = usize::from(r.u8("attribute count")?);
    if a != variant.attributes() {
        return Err(r.bad(format!("{variant:?} with {a} attributes")));
    }
    let ratios: Vec<f64> = (0..a)
        .map(|_| r.array("ratio").map(|b| f64::from(f32::from_le_bytes(b))))
        .collect::<Result<_>>()?;
    let count = u32::from_le_bytes(r.array("count")?) as usize;
    let record = 1 + 2 * a + IMAGE_LEN;
    let remaining = bytes.len() - r.pos;
    if remaining != count * record {
        return Err(r.bad(format!(
            "{count} samples need {} payload bytes, found {remaining}",
            count * record
        )));
    }
    let mut ds = Dataset::empty(variant, &ratios);
    ds.ratios = ratios.iter().map(|&x| x as f32).collect();
    ds.pixels.reserve(count * IMAGE_LEN);
    for i in 0..count {
        let target = r.u8("target")?;
        if usize::from(target) >= NUM_CLASSES {
            return Err(r.bad(format!("sample {i}: target {target} out of range")));
        }
        let groups = r.take(a, "bias groups")?;
        let flags = r.take(a, "aligned flags")?;
        for (&g, &f) in groups.iter().zip(flags) {
            if usize::from(g) >= NUM_CLASSES || f > 1 || (f == 1) != (g == target) {
                return Err(r.bad(format!("sample {i}: inconsistent bias labels")));
            }
        }
        let image = r.take(IMAGE_LEN, "pixels")?;
        ds.push(image, target, groups);
    }
    Ok(ds)
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    std::fs::write(path, encode(ds)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Where the grayscale digits came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DigitSource {
    Mnist,
    SyntheticGlyph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u16,
    pub config: DatasetConfig,
    pub source: DigitSource,
    pub train_count: usize,
    pub test_count: usize,
    pub train_aligned_fraction: Vec<f64>,
    pub test_aligned_fraction: Vec<f64>,
}

impl Sidecar {
    pub fn describe(pair: &DatasetPair, config: &DatasetConfig, source: DigitSource) -> Self {
        let fractions = |ds: &Dataset| (0..ds.attributes).map(|a| ds.aligned_fraction(a)).collect();
        Self {
            format_version: VERSION,
            config: config.clone(),
            source,
            train_count: pair.train.len(),
            test_count: pair.test.len(),
            train_aligned_fraction: fractions(&pair.train),
            test_aligned_fraction: fractions(&pair.test),
        }
    }
}

pub fn sidecar_path(dir: &Path) -> PathBuf {
    dir.join(SIDECAR_FILE)
}

/// Writes both caches and the sidecar into `dir`, creating it if needed.
pub fn save_pair(dir: &Path, pair: &DatasetPair, sidecar: &Sidecar) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_dataset(&dir.join(TRAIN_FILE), &pair.train)?;
    write_dataset(&dir.join(TEST_FILE), &pair.test)?;
    let path = sidecar_path(dir);
    let mut json = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| Error::io(path, e))
}

pub fn read_sidecar(dir: &Path) -> Result<Sidecar> {
    let path = sidecar_path(dir);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, "dataset sidecar", e.to_string()))
}

pub fn load_pair(dir: &Path) -> Result<(DatasetPair, Sidecar)> {
    let sidecar = read_sidecar(dir)?;
    let pair = DatasetPair {
        train: read_dataset(&dir.join(TRAIN_FILE))?,
        test: read_dataset(&dir.join(TEST_FILE))?,
    };
    if pair.train.variant != sidecar.config.variant || pair.test.variant != sidecar.config.variant {
        return Err(Error::Mismatch(format!(
            "{}: cache variant differs from sidecar",
            dir.display()
        )));
    }
    Ok((pair, sidecar))
}
