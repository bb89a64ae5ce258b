//! Output files: JSON with fixed numeric precision, CSV tables and a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Significant digits kept for every float written to JSON.
pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().unwrap_or(v)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// `value` as JSON with floats rounded to [`SIGNIFICANT_DIGITS`]. Non-finite
/// floats become `null`.
pub fn to_rounded_json<T: Serialize>(value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    round_value(&mut v);
    Ok(v)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let v = to_rounded_json(value)?;
    let text = serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One file written by a run.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub description: String,
    /// Column names for CSV files, empty otherwise.
    pub columns: Vec<String>,
}

/// Writer rooted at an output directory that records everything it writes.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    manifest: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    fn record(&mut self, name: &str, description: &str, columns: &[&str]) {
        self.manifest.retain(|e| e.file != name);
        self.manifest.push(ManifestEntry {
            file: name.to_string(),
            description: description.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
        });
    }

    /// CSV with a header row; floats in shortest round-trip form.
    pub fn csv<R>(&mut self, name: &str, description: &str, columns: &[&str], rows: R) -> Result<()>
    where
        R: IntoIterator,
        R::Item: AsRef<[f64]>,
    {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
        w.write_record(columns).map_err(|e| io_error(&path, e))?;
        for row in rows {
            let row = row.as_ref();
            if row.len() != columns.len() {
                return Err(Error::Io(format!("{name}: row has {} fields, header {}", row.len(), columns.len())));
            }
            w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
        self.record(name, description, columns);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, description: &str, value: &T) -> Result<()> {
        write_json(&self.path(name), value)?;
        self.record(name, description, &[]);
        Ok(())
    }

    pub fn text(&mut self, name: &str, description: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        self.record(name, description, &[]);
        Ok(())
    }
}

/// Read the named columns of a CSV file with a header row.
pub fn read_csv_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header = r.headers().map_err(|e| io_error(path, e))?.clone();
    let idx = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h.trim() == *n)
                .ok_or_else(|| Error::Io(format!("{}: missing column `{n}`", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_error(path, e))?;
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Io(format!("{}: row {}: bad number `{field}`", path.display(), line + 2)))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.234567890123456e-7), 1.23456789012e-7);
        assert_eq!(round_sig(-2.0), -2.0);
        assert!(round_sig(f64::NAN).is_nan());
        let v = to_rounded_json(&serde_json::json!({"a": [1.0000000000004, 3], "b": {"c": 2.5e300}})).unwrap();
        assert_eq!(v["a"][0].as_f64(), Some(1.0));
        assert_eq!(v["a"][1].as_u64(), Some(3));
    }

    #[test]
    fn csv_round_trip_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.csv("t.csv", "test", &["a", "b"], [[1.0, 2.5], [-3.0, 1e-300]]).unwrap();
        let cols = read_csv_columns(&out.path("t.csv"), &["b", "a"]).unwrap();
        assert_eq!(cols, vec![vec![2.5, 1e-300], vec![1.0, -3.0]]);
        assert_eq!(out.manifest()[0].columns, vec!["a", "b"]);
        assert!(read_csv_columns(&out.path("t.csv"), &["z"]).is_err());
        assert!(out.csv("bad.csv", "x", &["a"], [[1.0, 2.0]]).is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
