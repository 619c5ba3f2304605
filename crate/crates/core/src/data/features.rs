//! Feature matrices on disk: 4 magic bytes, `u32` rows, `u32` cols (both
//! little-endian), then row-major little-endian `f32` values.

use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"PLFT";
pub const FEATURE_EXT: &str = "feat";

pub fn encode_features(m: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * m.len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for &v in m.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8], path: &Path) -> Result<Array2<f64>> {
    let fail = |reason: String| Error::FeatureFile {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 12 {
        return Err(fail("file shorter than its 12-byte header".into()));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(fail("bad magic bytes".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(8));
    if rows == 0 || cols == 0 {
        return Err(fail(format!("header declares an empty {rows}x{cols} matrix")));
    }
    let payload = &bytes[12..];
    let want = rows * cols * 4;
    if payload.len() < want {
        return Err(fail(format!(
            "payload shorter than header promises ({} of {want} bytes)",
            payload.len()
        )));
    }
    if payload.len() > want {
        return Err(fail(format!(
            "payload longer than header promises ({} of {want} bytes)",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: path.display().to_string(),
            index,
        });
    }
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

pub fn read_feature_file(path: &Path) -> Result<Array2<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, path)
}

pub fn write_feature_file(path: &Path, m: &Array2<f64>) -> Result<()> {
    std::fs::write(path, encode_features(m)).map_err(|e| Error::io(path, e))
}

pub fn feature_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(format!("{video_id}.{FEATURE_EXT}"))
}

/// Loads `<dir>/<video_id>.feat`.
pub fn load_features(dir: &Path, video_id: &str) -> Result<Array2<f64>> {
    read_feature_file(&feature_path(dir, video_id))
}

/// Picks `num_frames` rows at evenly spaced positions, repeating rows when
/// the input is shorter.
pub fn uniform_sample(features: &Array2<f64>, num_frames: usize) -> Result<Array2<f64>> {
    if num_frames < 2 {
        return Err(Error::invalid(format!("cannot sample {num_frames} frames; need at least 2")));
    }
    let t = features.nrows();
    if t == 0 {
        return Err(Error::invalid("cannot sample from an empty feature matrix"));
    }
    let idx: Vec<usize> = (0..num_frames)
        .map(|i| ((i * (t - 1)) as f64 / (num_frames - 1) as f64).round() as usize)
        .collect();
    Ok(features.select(ndarray::Axis(0), &idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(t: usize) -> Array2<f64> {
        Array2::from_shape_fn((t, 2), |(i, j)| (i * 10 + j) as f64)
    }

    fn sampled_rows(t: usize, lv: usize) -> Vec<usize> {
        let s = uniform_sample(&rows(t), lv).unwrap();
        s.column(0).iter().map(|v| (*v / 10.0) as usize).collect()
    }

    #[test]
    fn sample_examples() {
        assert_eq!(sampled_rows(4, 4), vec![0, 1, 2, 3]);
        assert_eq!(sampled_rows(7, 4), vec![0, 2, 4, 6]);
        assert_eq!(sampled_rows(2, 4), vec![0, 0, 1, 1]);
        assert!(uniform_sample(&rows(3), 1).is_err());
    }

    #[test]
    fn header_contract() {
        let dir = tempfile::tempdir().unwrap();
        let m = Array2::from_shape_fn((100, 1024), |(i, j)| (i as f64 - j as f64) * 0.25);
        write_feature_file(&feature_path(dir.path(), "vid"), &m).unwrap();
        let back = load_features(dir.path(), "vid").unwrap();
        assert_eq!(back.dim(), (100, 1024));
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_payload() {
        let m = rows(3);
        let mut bytes = encode_features(&m);
        bytes.truncate(bytes.len() - 2);
        let err = decode_features(&bytes, Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("payload shorter than header promises"));
    }

    #[test]
    fn nan_reports_first_index() {
        let mut m = rows(3);
        m[[1, 1]] = f64::NAN;
        m[[2, 0]] = f64::INFINITY;
        let err = decode_features(&encode_features(&m), Path::new("x")).unwrap_err();
        match err {
            Error::NonFinite { index, .. } => assert_eq!(index, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_file() {
        assert!(load_features(Path::new("/nonexistent"), "v").is_err());
    }
}
