//! Feature-importance artifacts: a two-column CSV and an 8-bit grayscale
//! PGM heatmap, min-max normalized so the darkest pixels are the least
//! important features.

use std::fs;
use std::path::Path;

use crate::{AppError, Result};

/// Render scores as binary PGM bytes, one pixel per score in row-major
/// order. Constant maps (degenerate normalization) pin every pixel to 128.
pub fn render_pgm(scores: &[f64], rows: usize, cols: usize) -> Result<Vec<u8>> {
    if rows * cols != scores.len() {
        return Err(AppError::Usage(format!(
            "shape {rows}x{cols} does not hold {} scores",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(AppError::Usage(String::from("scores must be finite")));
    }
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    if hi > lo {
        let span = hi - lo;
        out.extend(scores.iter().map(|s| ((s - lo) / span * 255.0).round() as u8));
    } else {
        out.extend(std::iter::repeat(128u8).take(scores.len()));
    }
    Ok(out)
}

/// Side length if `n` is a perfect square.
pub fn square_side(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

pub fn write_pgm(path: &Path, scores: &[f64], rows: usize, cols: usize) -> Result<()> {
    let bytes = render_pgm(scores, rows, cols)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Write the `feature_index,score` CSV for one importance map.
pub fn write_fi_csv(path: &Path, scores: &[f64]) -> Result<()> {
    let mut text = String::from("feature_index,score\n");
    for (i, s) in scores.iter().enumerate() {
        text.push_str(&format!("{i},{s}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Read scores back from a `feature_index,score` CSV.
pub fn read_fi_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("feature_index,score") => {}
        _ => {
            return Err(AppError::Usage(format!(
                "{}: expected header \"feature_index,score\"",
                path.display()
            )))
        }
    }
    let mut scores = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let (idx, score) = line.split_once(',').ok_or_else(|| {
            AppError::Usage(format!("{}:{}: not a two-column row", path.display(), lineno + 2))
        })?;
        let idx: usize = idx.parse().map_err(|_| {
            AppError::Usage(format!("{}:{}: bad feature index", path.display(), lineno + 2))
        })?;
        if idx != scores.len() {
            return Err(AppError::Usage(format!(
                "{}:{}: feature indices must be consecutive from 0",
                path.display(),
                lineno + 2
            )));
        }
        let score: f64 = score.parse().map_err(|_| {
            AppError::Usage(format!("{}:{}: bad score", path.display(), lineno + 2))
        })?;
        scores.push(score);
    }
    if scores.is_empty() {
        return Err(AppError::Usage(format!("{}: no scores", path.display())));
    }
    Ok(scores)
}
