//! File formats: numeric CSV tables, 16-bit PGM frames, exposure
//! manifests and JSON reports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{ExposureFrame, Image};
use crate::error::{Error, Result};

fn parse_err(path: &Path, reason: impl ToString) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Writes a header row and string records.
pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_err(path, e))?;
    w.write_record(header).map_err(|e| parse_err(path, e))?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref())).map_err(|e| parse_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Numeric table with a header row. Empty cells and `nan` read as NaN.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(path, e))?;
    let header = r
        .headers()
        .map_err(|e| parse_err(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        let row = rec
            .iter()
            .map(|c| {
                let c = c.trim();
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse::<f64>()
                        .map_err(|_| parse_err(path, format!("row {}: `{c}` is not a number", i + 2)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads an 8- or 16-bit binary PGM into an [`Image`] of raw counts.
pub fn read_pgm(path: &Path) -> Result<Image> {
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| parse_err(path, e))?
        .into_luma16();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(f64::from).collect();
    Image::new(w as usize, h as usize, data)
}

/// Writes `img` as a 16-bit big-endian P5 file, rounding and clamping to
/// `0..=65535`.
pub fn write_pgm16(path: &Path, img: &Image) -> Result<()> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    out.reserve(2 * img.data.len());
    for v in &img.data {
        out.extend_from_slice(&(v.round().clamp(0.0, 65535.0) as u16).to_be_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// One row of an exposure manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub scale: f64,
    pub saturation_level: f64,
}

/// Reads `path,scale,saturation_level` rows; relative frame paths resolve
/// against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for rec in r.deserialize::<ManifestEntry>() {
        let mut e = rec.map_err(|e| parse_err(path, e))?;
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
        out.push(e);
    }
    if out.is_empty() {
        return Err(parse_err(path, "manifest lists no frames"));
    }
    Ok(out)
}

/// Loads every frame of a manifest.
pub fn load_exposures(manifest: &Path, pixel_size: f64) -> Result<Vec<ExposureFrame>> {
    read_manifest(manifest)?
        .into_iter()
        .map(|e| ExposureFrame::new(read_pgm(&e.path)?.with_pixel_size(pixel_size), e.scale, e.saturation_level))
        .collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Shortest round-trip text of `v`; NaN as `nan`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}
