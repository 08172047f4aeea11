//! Manifest and CSV formats.
//!
//! A dataset is a JSON manifest `{"views": ["v1.csv", ...], "labels": "y.csv"}`
//! whose paths are relative to the manifest. Every CSV is headerless, one
//! sample per line, with `NaN` marking a missing entry.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use nail_core::{Mask, Mat, MultiViewDataset};
use serde::{Deserialize, Serialize};

use crate::error::{NailError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub views: Vec<String>,
    pub labels: String,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| NailError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| NailError::Parse { path: path.into(), line: e.line(), message: e.to_string() })
}

/// Loads the dataset a manifest points to. Observation masks come from the
/// `NaN` entries.
pub fn load_dataset(manifest_path: &Path) -> Result<MultiViewDataset> {
    let manifest = read_manifest(manifest_path)?;
    if manifest.views.is_empty() {
        return Err(NailError::Data(format!("{}: manifest lists no views", manifest_path.display())));
    }
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let views = manifest.views.iter().map(|v| read_matrix(&base.join(v))).collect::<Result<Vec<_>>>()?;
    let labels = read_matrix(&base.join(&manifest.labels))?;
    Ok(MultiViewDataset::from_sentinel(views, labels)?)
}

/// Reads a headerless numeric CSV. Every line must have the same width.
pub fn read_matrix(path: &Path) -> Result<Mat> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(NailError::Parse { path: path.into(), line, message: format!("expected {w} fields, found {}", record.len()) })
            }
            _ => {}
        }
        for field in record.iter() {
            let value: f64 = field
                .parse()
                .map_err(|_| NailError::Parse { path: path.into(), line, message: format!("not a number: {field:?}") })?;
            data.push(value);
        }
        rows += 1;
    }
    let cols = width.ok_or_else(|| NailError::Data(format!("{}: no rows", path.display())))?;
    Ok(Mat::from_vec(rows, cols, data)?)
}

fn csv_error(path: &Path, e: csv::Error) -> NailError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => NailError::io(path, io),
        kind => NailError::Parse { path: path.into(), line, message: format!("{kind:?}") },
    }
}

/// Writes `m` with `NaN` wherever `mask` is unset. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_matrix(path: &Path, m: &Mat, mask: Option<&Mask>) -> Result<()> {
    let mut out = String::with_capacity(m.rows() * m.cols() * 8);
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            let observed = mask.is_none_or(|o| o.get(i, j));
            if observed {
                out.push_str(&m[(i, j)].to_string());
            } else {
                out.push_str("NaN");
            }
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = File::create(path).map_err(|e| NailError::io(path, e))?;
    file.write_all(bytes).map_err(|e| NailError::io(path, e))
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| NailError::io(dir, e))
}

/// Writes the observed part of `ds` as `view{v}.csv`, `labels.csv` and
/// `manifest.json` under `dir`, returning the manifest path. Hidden labels
/// are written as `NaN`.
pub fn write_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<PathBuf> {
    create_dir(dir)?;
    let mut views = Vec::with_capacity(ds.n_views());
    for v in 0..ds.n_views() {
        let name = format!("view{}.csv", v + 1);
        write_matrix(&dir.join(&name), ds.view(v), Some(ds.feature_mask(v)))?;
        views.push(name);
    }
    write_matrix(&dir.join("labels.csv"), ds.labels(), Some(ds.label_mask()))?;
    let manifest = Manifest { views, labels: "labels.csv".into() };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&path, json.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "1,2\n3\n").unwrap();
        match read_matrix(&path) {
            Err(NailError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_and_spacing_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "1, NaN\n-0.5,2e3\n").unwrap();
        let m = read_matrix(&path).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert!(m[(0, 1)].is_nan());
        assert_eq!(m[(1, 1)], 2000.0);
    }

    #[test]
    fn words_are_not_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "1,abc\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(NailError::Parse { .. })));
    }
}
