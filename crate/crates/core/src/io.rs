//! File formats for sampled maps: 8-bit grayscale PNG and float32 raw dumps.
//!
//! Raw files are row-major little-endian `f32`, one value per pixel for real
//! maps and interleaved `re, im` pairs for complex fields. A JSON sidecar
//! `{n, window, waist}` describes the grid; the layout follows from the byte
//! count. PNG rows follow array rows, so row 0 is the most negative `y`.

use std::f64::consts::TAU;
use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat};
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optics::{intensity_map, phase_map, wrap_phase, FieldGrid, GridSpec};

/// Sidecar describing a raw dump.
pub type RawHeader = GridSpec;

fn png_bytes(n_rows: usize, n_cols: usize, pixels: Vec<u8>) -> Result<Vec<u8>> {
    let img = GrayImage::from_raw(n_cols as u32, n_rows as u32, pixels)
        .ok_or_else(|| Error::ShapeMismatch("pixel buffer does not match image size".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Linear map of `[0, max]` onto `0..=255`; an all-zero map stays black.
pub fn intensity_png(map: &Array2<f64>) -> Result<Vec<u8>> {
    let max = map.iter().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let pixels = map
        .iter()
        .map(|v| (v.max(0.0) * scale).round().min(255.0) as u8)
        .collect();
    png_bytes(map.nrows(), map.ncols(), pixels)
}

/// Gray level of a phase: `[0, 2 pi)` onto `0..=255`, after wrapping.
pub fn phase_level(phi: f64) -> u8 {
    ((wrap_phase(phi) / TAU * 256.0).floor() as i64).clamp(0, 255) as u8
}

pub fn phase_png(map: &Array2<f64>) -> Result<Vec<u8>> {
    let pixels = map.iter().map(|p| phase_level(*p)).collect();
    png_bytes(map.nrows(), map.ncols(), pixels)
}

pub fn field_intensity_png(field: &FieldGrid) -> Result<Vec<u8>> {
    intensity_png(&intensity_map(field))
}

pub fn field_phase_png(field: &FieldGrid) -> Result<Vec<u8>> {
    phase_png(&phase_map(field))
}

pub fn encode_raw_real(map: &Array2<f64>) -> Vec<u8> {
    map.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect()
}

pub fn encode_raw_complex(map: &Array2<Complex64>) -> Vec<u8> {
    map.iter()
        .flat_map(|z| {
            let mut b = [0u8; 8];
            b[..4].copy_from_slice(&(z.re as f32).to_le_bytes());
            b[4..].copy_from_slice(&(z.im as f32).to_le_bytes());
            b
        })
        .collect()
}

pub fn raw_header_json(spec: &GridSpec) -> Result<String> {
    Ok(serde_json::to_string_pretty(spec)?)
}

/// Parses and validates a sidecar.
pub fn parse_raw_header(text: &str) -> Result<RawHeader> {
    let spec: GridSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawData {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

/// Decodes a raw dump against its header.
pub fn decode_raw(header: &RawHeader, bytes: &[u8]) -> Result<RawData> {
    header.validate()?;
    let n = header.n;
    let cells = n
        .checked_mul(n)
        .ok_or_else(|| Error::InvalidGrid(format!("n = {n} overflows")))?;
    let floats: Vec<f64> = if bytes.len().is_multiple_of(4) {
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect()
    } else {
        Vec::new()
    };
    if bytes.len() == cells * 4 {
        let map = Array2::from_shape_vec((n, n), floats)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(RawData::Real(map))
    } else if bytes.len() == cells * 8 {
        let values = floats.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let map = Array2::from_shape_vec((n, n), values)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(RawData::Complex(map))
    } else {
        Err(Error::ShapeMismatch(format!(
            "{} bytes fit neither a real nor a complex {n}x{n} map",
            bytes.len()
        )))
    }
}

/// Writes `<stem>.raw` and `<stem>.json`; returns both paths.
pub fn write_raw(
    dir: &Path,
    stem: &str,
    spec: &GridSpec,
    bytes: &[u8],
) -> Result<[std::path::PathBuf; 2]> {
    let raw = dir.join(format!("{stem}.raw"));
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&raw, bytes)?;
    std::fs::write(&json, raw_header_json(spec)?)?;
    Ok([raw, json])
}
