//! Training data: a generated 8×8 two-class task and CIFAR-10 binary records.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bytes per CIFAR-10 record: one label byte, then 1024 R, 1024 G, 1024 B.
pub const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;
const CIFAR_CLASSES: usize = 10;

/// Images stored `[sample][channel][row][col]`, pixel values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub images: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_size(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let s = self.sample_size();
        &self.images[i * s..(i + 1) * s]
    }

    pub fn subset(&self, limit: usize) -> Dataset {
        let n = limit.min(self.len());
        Dataset {
            images: self.images[..n * self.sample_size()].to_vec(),
            labels: self.labels[..n].to_vec(),
            ..self.clone()
        }
    }
}

/// Two classes on 8×8: class 0 has a bright left half, class 1 a bright top
/// half. Pixels are 0.8 (bright) or 0.2 (dark) plus `U[-noise, noise]`,
/// clamped to `[0, 1]`. Labels alternate 0, 1, 0, …
pub fn synthetic(samples: usize, noise: f64, seed: u64) -> Dataset {
    let side = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(samples * side * side);
    let mut labels = Vec::with_capacity(samples);
    for s in 0..samples {
        let label = (s % 2) as u8;
        for r in 0..side {
            for c in 0..side {
                let bright = if label == 0 { c < side / 2 } else { r < side / 2 };
                let base = if bright { 0.8 } else { 0.2 };
                let jitter = if noise > 0.0 {
                    rng.gen_range(-noise..=noise)
                } else {
                    0.0
                };
                images.push(f64::clamp(base + jitter, 0.0, 1.0));
            }
        }
        labels.push(label);
    }
    Dataset {
        channels: 1,
        height: side,
        width: side,
        classes: 2,
        images,
        labels,
    }
}

/// Parses concatenated CIFAR-10 records, keeping at most `limit` of them.
pub fn parse_cifar(bytes: &[u8], limit: Option<usize>) -> Result<Dataset> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD) {
        return Err(Error::Parse(format!(
            "CIFAR data length {} is not a multiple of {CIFAR_RECORD}",
            bytes.len()
        )));
    }
    let count = (bytes.len() / CIFAR_RECORD).min(limit.unwrap_or(usize::MAX));
    let mut images = Vec::with_capacity(count * (CIFAR_RECORD - 1));
    let mut labels = Vec::with_capacity(count);
    for (i, record) in bytes.chunks_exact(CIFAR_RECORD).take(count).enumerate() {
        if record[0] as usize >= CIFAR_CLASSES {
            return Err(Error::Parse(format!("record {i} has label {}", record[0])));
        }
        labels.push(record[0]);
        images.extend(record[1..].iter().map(|&b| f64::from(b) / 255.0));
    }
    Ok(Dataset {
        channels: 3,
        height: 32,
        width: 32,
        classes: CIFAR_CLASSES,
        images,
        labels,
    })
}

pub fn read_cifar(path: impl AsRef<Path>, limit: Option<usize>) -> Result<Dataset> {
    parse_cifar(&fs::read(path)?, limit)
}

/// Inverse of [`parse_cifar`] for 3 × 32 × 32 datasets; pixels are rounded
/// to the nearest byte.
pub fn encode_cifar(data: &Dataset) -> Result<Vec<u8>> {
    if (data.channels, data.height, data.width) != (3, 32, 32) {
        return Err(Error::Dimension("CIFAR records are 3x32x32".into()));
    }
    let mut out = Vec::with_capacity(data.len() * CIFAR_RECORD);
    for i in 0..data.len() {
        out.push(data.labels[i]);
        out.extend(data.image(i).iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    Ok(out)
}

pub fn write_cifar(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    fs::write(path, encode_cifar(data)?)?;
    Ok(())
}
