//! Measured RFI files: raw little-endian f32 samples in column-major order
//! (fast time fastest) plus a JSON sidecar `<file>.json` describing them.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DTYPE_F32LE: &str = "f32le";
pub const LAYOUT_COL_MAJOR: &str = "col-major";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfiMetadata {
    pub n_fast: usize,
    pub m_slow: usize,
    pub fs_hz: f64,
    pub dtype: String,
    pub layout: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasuredRfi {
    pub data: DMatrix<f64>,
    pub metadata: RfiMetadata,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn fail(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn ingest_measured_rfi(path: &Path) -> Result<MeasuredRfi> {
    let meta_path = sidecar_path(path);
    let meta_text = fs::read_to_string(&meta_path)
        .map_err(|e| fail(path, format!("cannot read sidecar {}: {e}", meta_path.display())))?;
    let metadata: RfiMetadata = serde_json::from_str(&meta_text)
        .map_err(|e| fail(path, format!("malformed sidecar: {e}")))?;
    if metadata.dtype != DTYPE_F32LE {
        return Err(fail(path, format!("unsupported dtype {:?}", metadata.dtype)));
    }
    if metadata.layout != LAYOUT_COL_MAJOR {
        return Err(fail(path, format!("unsupported layout {:?}", metadata.layout)));
    }
    let bytes = fs::read(path).map_err(|e| fail(path, format!("cannot read data: {e}")))?;
    let expected = metadata
        .n_fast
        .checked_mul(metadata.m_slow)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| fail(path, "declared size overflows"))?;
    if bytes.len() != expected {
        return Err(fail(
            path,
            format!("size mismatch: expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(fail(path, "data contains non-finite samples"));
    }
    let data = DMatrix::from_vec(metadata.n_fast, metadata.m_slow, values);
    Ok(MeasuredRfi { data, metadata })
}

/// Writes `data` (cast to f32) and its sidecar.
pub fn export_measured_rfi(path: &Path, data: &DMatrix<f64>, fs_hz: f64) -> Result<()> {
    let bytes: Vec<u8> = data.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    fs::write(path, bytes)?;
    let meta = RfiMetadata {
        n_fast: data.nrows(),
        m_slow: data.ncols(),
        fs_hz,
        dtype: DTYPE_F32LE.into(),
        layout: LAYOUT_COL_MAJOR.into(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(dir: &Path, values: &[f32], meta: &RfiMetadata) -> PathBuf {
        let path = dir.join("rfi.f32");
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&path, bytes).unwrap();
        fs::write(sidecar_path(&path), serde_json::to_string(meta).unwrap()).unwrap();
        path
    }

    fn meta(n: usize, m: usize) -> RfiMetadata {
        RfiMetadata {
            n_fast: n,
            m_slow: m,
            fs_hz: 8e9,
            dtype: DTYPE_F32LE.into(),
            layout: LAYOUT_COL_MAJOR.into(),
        }
    }

    #[test]
    fn column_major_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_raw(dir.path(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &meta(2, 3));
        let got = ingest_measured_rfi(&path).unwrap();
        assert_eq!(got.data, DMatrix::from_row_slice(2, 3, &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]));
    }

    #[test]
    fn truncated_file_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_raw(dir.path(), &[1.0, 2.0, 3.0, 4.0, 5.0], &meta(2, 3));
        let err = ingest_measured_rfi(&path).unwrap_err().to_string();
        assert!(err.contains("size mismatch"), "{err}");
    }

    #[test]
    fn unknown_dtype_and_missing_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let mut md = meta(1, 1);
        md.dtype = "f64le".into();
        let path = write_raw(dir.path(), &[1.0], &md);
        assert!(ingest_measured_rfi(&path).unwrap_err().to_string().contains("dtype"));
        md.dtype = DTYPE_F32LE.into();
        md.layout = "row-major".into();
        let path = write_raw(dir.path(), &[1.0], &md);
        assert!(ingest_measured_rfi(&path).unwrap_err().to_string().contains("layout"));
        fs::remove_file(sidecar_path(&path)).unwrap();
        assert!(ingest_measured_rfi(&path).unwrap_err().to_string().contains("sidecar"));
    }

    #[test]
    fn export_ingest_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data = DMatrix::from_fn(5, 7, |i, j| ((i * 7 + j) as f32 * 0.377 - 3.1) as f64);
        let path = dir.path().join("x.f32");
        export_measured_rfi(&path, &data, 8e9).unwrap();
        let first = fs::read(&path).unwrap();
        let got = ingest_measured_rfi(&path).unwrap();
        assert_eq!(got.data, data);
        assert_eq!(got.metadata.fs_hz, 8e9);
        export_measured_rfi(&path, &got.data, 8e9).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }
}
