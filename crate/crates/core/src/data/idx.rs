//! Reader for the IDX binary format: two zero bytes, a type code (0x08 for
//! unsigned bytes), the number of dimensions, then one big-endian u32 per
//! dimension followed by the row-major payload.

use std::path::Path;

use ndarray::Array2;

use super::dataset::{split_sizes, LabeledDataset, Split};
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| format_err(bytes.len(), "file truncated inside the header"))
}

/// Parsed header: dimension sizes and the payload slice.
pub fn parse_idx(bytes: &[u8], expected_magic: u32) -> Result<(Vec<usize>, &[u8])> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected_magic {
        return Err(format_err(
            0,
            format!("bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"),
        ));
    }
    let ndims = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        dims.push(read_u32(bytes, 4 + 4 * d)? as usize);
    }
    let header = 4 + 4 * ndims;
    let len: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() < len {
        return Err(format_err(
            bytes.len(),
            format!("payload truncated: expected {len} bytes after the header"),
        ));
    }
    Ok((dims, &payload[..len]))
}

/// Images as rows of features scaled to `[0, 1]`.
pub fn parse_images(bytes: &[u8]) -> Result<Array2<f64>> {
    let (dims, payload) = parse_idx(bytes, IMAGE_MAGIC)?;
    let rows = dims[0];
    let cols = dims[1] * dims[2];
    Ok(Array2::from_shape_fn((rows, cols), |(r, c)| {
        f64::from(payload[r * cols + c]) / 255.0
    }))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let (_, payload) = parse_idx(bytes, LABEL_MAGIC)?;
    Ok(payload.iter().map(|&b| usize::from(b)).collect())
}

/// Builds a dataset from parsed images and labels. Each class is split
/// 70/15/15 into train/valid/test in file order.
pub fn dataset_from_idx(features: Array2<f64>, labels: Vec<usize>) -> Result<LabeledDataset> {
    if features.nrows() != labels.len() {
        return Err(format_err(
            4,
            format!("{} images but {} labels", features.nrows(), labels.len()),
        ));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut counts = vec![0usize; num_classes];
    for &y in &labels {
        counts[y] += 1;
    }
    let mut seen = vec![0usize; num_classes];
    let splits = labels
        .iter()
        .map(|&y| {
            let (train, valid, _) = split_sizes(counts[y]);
            let i = seen[y];
            seen[y] += 1;
            if i < train {
                Split::Train
            } else if i < train + valid {
                Split::Valid
            } else {
                Split::Test
            }
        })
        .collect();
    LabeledDataset::new(features, labels, splits, num_classes)
}

pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<LabeledDataset> {
    let images = std::fs::read(image_path).map_err(|e| Error::file(image_path, e))?;
    let labels = std::fs::read(label_path).map_err(|e| Error::file(label_path, e))?;
    dataset_from_idx(parse_images(&images)?, parse_labels(&labels)?)
}
