//! Inspection exports for PSFs and aperture patterns.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use ndarray::{Array2, ArrayView2};

use super::psf::PointSpreadFunction;
use crate::{Error, Result};

/// Writes `<stem>.f32` (little-endian `f32`, row-major) with a `<stem>.txt`
/// header, plus `<stem>.png`: a 16-bit grayscale view normalized by the
/// kernel maximum. The PNG is for looking at, not for reloading.
pub fn write_psf(stem: &Path, psf: &PointSpreadFunction) -> Result<()> {
    let (rows, cols) = psf.kernel.dim();
    let mut bytes = Vec::with_capacity(rows * cols * 4);
    for v in psf.kernel.iter() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(with_ext(stem, "f32"), bytes)?;
    let header = format!(
        "format = f32le row-major\nrows = {rows}\ncols = {cols}\npsi = {}\nenergy = {}\npng = max-normalized, lossy\n",
        psf.psi, psf.total_energy
    );
    fs::write(with_ext(stem, "txt"), header)?;
    let peak = psf.kernel.iter().cloned().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    write_gray16(&with_ext(stem, "png"), (&psf.kernel * scale).view())
}

/// Reads the `f32` grid written by [`write_psf`].
pub fn read_psf_grid(stem: &Path) -> Result<Array2<f64>> {
    let header = fs::read_to_string(with_ext(stem, "txt"))?;
    let field = |key: &str| -> Result<usize> {
        header
            .lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .and_then(|(_, v)| v.trim().parse().ok())
            .ok_or_else(|| Error::InvalidConfig(format!("PSF header lacks {key}")))
    };
    let (rows, cols) = (field("rows")?, field("cols")?);
    let bytes = fs::read(with_ext(stem, "f32"))?;
    if bytes.len() != rows * cols * 4 {
        return Err(Error::ShapeMismatch(format!(
            "{} bytes for a {rows}x{cols} f32 grid",
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// Writes an aperture as `<stem>.csv` (one row per line, full precision) and
/// `<stem>.png` (16-bit grayscale, transmittance 1 = white).
pub fn write_aperture(stem: &Path, values: ArrayView2<f64>) -> Result<()> {
    let mut csv = Vec::new();
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(csv, "{}", line.join(","))?;
    }
    fs::write(with_ext(stem, "csv"), csv)?;
    write_gray16(&with_ext(stem, "png"), values)
}

/// Parses a CSV written by [`write_aperture`].
pub fn read_aperture_csv(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| v.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad CSV value {v:?}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::ShapeMismatch("ragged aperture CSV".into()));
    }
    Array2::from_shape_vec((rows.len(), cols), rows.concat()).map_err(|e| Error::ShapeMismatch(e.to_string()))
}

fn write_gray16(path: &Path, values: ArrayView2<f64>) -> Result<()> {
    let (rows, cols) = values.dim();
    let img = ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(cols as u32, rows as u32, |x, y| {
        Luma([quantize16(values[(y as usize, x as usize)])])
    });
    img.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

/// Clamps to `[0, 1]` and rounds to the nearest 16-bit level.
pub fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}
