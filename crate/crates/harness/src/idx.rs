//! Reader for the big-endian IDX image/label format (MNIST and friends).

use std::fs;
use std::path::Path;

use purl_core::data::{Dataset, Split};
use purl_core::nn::Matrix;
use purl_core::Error;

use crate::error::{HarnessError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> purl_core::Result<u32> {
    let chunk = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| format_err(offset, "truncated header"))?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
}

/// Parses an image file into `(count, pixels per image, raw bytes)`.
pub fn parse_images(bytes: &[u8]) -> purl_core::Result<(usize, usize, &[u8])> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(format_err(0, format!("bad image magic {magic:#010x}")));
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let pixels = rows * cols;
    let need = count * pixels;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(format_err(
            16 + payload.len(),
            format!(
                "truncated image payload: expected {need} bytes, found {}",
                payload.len()
            ),
        ));
    }
    Ok((count, pixels, &payload[..need]))
}

pub fn parse_labels(bytes: &[u8]) -> purl_core::Result<&[u8]> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(format_err(0, format!("bad label magic {magic:#010x}")));
    }
    let count = read_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(format_err(
            8 + payload.len(),
            format!(
                "truncated label payload: expected {count} bytes, found {}",
                payload.len()
            ),
        ));
    }
    Ok(&payload[..count])
}

/// Builds a dataset from in-memory IDX files. Pixels are scaled to `[0, 1]`;
/// the class count is one more than the largest label (at least 2).
pub fn parse_idx(images: &[u8], labels: &[u8], split: Split) -> purl_core::Result<Dataset> {
    let (count, pixels, raw) = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if labels.len() != count {
        return Err(format_err(4, format!("{count} images but {} labels", labels.len())));
    }
    let values = raw.iter().map(|&p| p as f64 / 255.0).collect();
    let inputs = Matrix::new(count, pixels, values)?;
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Dataset::new(inputs, labels, classes, split)
}

pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<Dataset> {
    let img = fs::read(images)?;
    let lab = fs::read(labels)?;
    parse_idx(&img, &lab, split).map_err(|e| match e {
        Error::Format { .. } => HarnessError::DataFormat {
            path: format!("{} / {}", images.display(), labels.display()),
            message: e.to_string(),
        },
        other => other.into(),
    })
}
