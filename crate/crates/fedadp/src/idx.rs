//! IDX file loading (the MNIST container format): big-endian magic and
//! dimension header, then raw unsigned bytes.

use std::fs;
use std::path::Path;

use fedadp_core::data::Dataset;
use fedadp_core::Matrix;

use crate::{AppError, Result};

const MAGIC_IMAGES: u32 = 2051;
const MAGIC_LABELS: u32 = 2049;

fn fmt_err(path: &Path, what: impl std::fmt::Display) -> AppError {
    AppError::Runtime(anyhow::anyhow!("{}: {}", path.display(), what))
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Load an IDX image file (magic 2051) as one row per image, pixels scaled
/// to `[0, 1]` by dividing by 255.
pub fn load_idx_images(path: &Path) -> Result<(Matrix, usize, usize)> {
    let bytes = fs::read(path).map_err(|e| fmt_err(path, e))?;
    if bytes.len() < 16 {
        return Err(fmt_err(path, "truncated IDX image header (< 16 bytes)"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != MAGIC_IMAGES {
        return Err(fmt_err(
            path,
            format!("bad IDX image magic {magic}, expected {MAGIC_IMAGES}"),
        ));
    }
    let n = be_u32(&bytes, 4) as usize;
    let rows = be_u32(&bytes, 8) as usize;
    let cols = be_u32(&bytes, 12) as usize;
    let expected = 16 + n * rows * cols;
    if bytes.len() != expected {
        return Err(fmt_err(
            path,
            format!("IDX image payload is {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    let data: Vec<f64> = bytes[16..].iter().map(|&b| f64::from(b) / 255.0).collect();
    let inputs = Matrix::from_vec(n, rows * cols, data)?;
    Ok((inputs, rows, cols))
}

/// Load an IDX label file (magic 2049) as class indices.
pub fn load_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = fs::read(path).map_err(|e| fmt_err(path, e))?;
    if bytes.len() < 8 {
        return Err(fmt_err(path, "truncated IDX label header (< 8 bytes)"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != MAGIC_LABELS {
        return Err(fmt_err(
            path,
            format!("bad IDX label magic {magic}, expected {MAGIC_LABELS}"),
        ));
    }
    let n = be_u32(&bytes, 4) as usize;
    if bytes.len() != 8 + n {
        return Err(fmt_err(
            path,
            format!("IDX label payload is {} bytes, header implies {}", bytes.len(), 8 + n),
        ));
    }
    Ok(bytes[8..].iter().map(|&b| b as usize).collect())
}

/// Load a paired image/label IDX set into a `Dataset`.
pub fn load_mnist(images: &Path, labels: &Path) -> Result<Dataset> {
    let (inputs, _, _) = load_idx_images(images)?;
    let labels_vec = load_idx_labels(labels)?;
    if inputs.rows() != labels_vec.len() {
        return Err(fmt_err(
            images,
            format!(
                "image count {} does not match label count {}",
                inputs.rows(),
                labels_vec.len()
            ),
        ));
    }
    if let Some(&bad) = labels_vec.iter().find(|&&l| l > 9) {
        return Err(fmt_err(labels, format!("label {bad} out of range 0..=9")));
    }
    Ok(Dataset::new(inputs, labels_vec, String::from("mnist"))?)
}
