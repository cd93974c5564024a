//! Output writing with read-back validation, and the per-command manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub n_perm: Option<usize>,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub created_unix: u64,
}

/// Collects the files written by one command in its output directory.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<FileHash>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::internal(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(FileHash {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Writes pretty JSON, then checks that the file parses back into `T`
    /// and reserializes to the same bytes.
    pub fn json<T: Serialize + DeserializeOwned>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(format!("{name}: {e}")))?;
        text.push('\n');
        self.put(name, text.as_bytes())?;
        let back = fs::read_to_string(self.path(name)).map_err(|e| CliError::internal(format!("{name}: {e}")))?;
        let parsed: T =
            serde_json::from_str(&back).map_err(|e| CliError::internal(format!("{name} failed schema check: {e}")))?;
        let mut again = serde_json::to_string_pretty(&parsed).map_err(|e| CliError::internal(e.to_string()))?;
        again.push('\n');
        if again != back {
            return Err(CliError::internal(format!("{name} does not round-trip")));
        }
        Ok(())
    }

    /// Writes CSV rows, then checks the header and parses every row back.
    pub fn csv<T: Serialize + DeserializeOwned>(&mut self, name: &str, header: &[&str], rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let err = |e: csv::Error| CliError::internal(format!("{name}: {e}"));
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.serialize(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::internal(format!("{name}: {e}")))?;
        self.put(name, &bytes)?;

        let mut rdr = csv::Reader::from_path(self.path(name)).map_err(err)?;
        let got: Vec<String> = rdr.headers().map_err(err)?.iter().map(String::from).collect();
        if got != header {
            return Err(CliError::internal(format!("{name} header mismatch: {got:?}")));
        }
        let n = rdr
            .deserialize::<T>()
            .map(|r| r.map_err(|e| CliError::internal(format!("{name} failed schema check: {e}"))))
            .collect::<Result<Vec<T>, _>>()?
            .len();
        if n != rows.len() {
            return Err(CliError::internal(format!("{name}: wrote {} rows, read {n}", rows.len())));
        }
        Ok(())
    }

    /// Writes a labelled square matrix as CSV (first column holds labels).
    pub fn matrix(&mut self, name: &str, labels: &[String], values: &[Vec<f64>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::internal(format!("{name}: {e}"));
        let mut header = vec!["label".to_string()];
        header.extend(labels.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (l, row) in labels.iter().zip(values) {
            let mut rec = vec![l.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::internal(format!("{name}: {e}")))?;
        self.put(name, &bytes)?;

        let mut rdr = csv::Reader::from_path(self.path(name)).map_err(err)?;
        let mut n = 0;
        for rec in rdr.records() {
            let rec = rec.map_err(err)?;
            if rec.len() != labels.len() + 1 || rec.iter().skip(1).any(|v| v.parse::<f64>().is_err()) {
                return Err(CliError::internal(format!("{name} failed schema check at row {n}")));
            }
            n += 1;
        }
        if n != labels.len() {
            return Err(CliError::internal(format!("{name}: expected {} rows, read {n}", labels.len())));
        }
        Ok(())
    }

    /// Writes an SVG and checks it is a single well-formed root element.
    pub fn svg(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let t = text.trim();
        if !(t.starts_with("<svg") && t.ends_with("</svg>")) {
            return Err(CliError::internal(format!("{name} is not an svg document")));
        }
        self.put(name, text.as_bytes())
    }

    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        self.put(name, bytes)
    }

    /// Writes `{command}.manifest.json`; the only file carrying a timestamp.
    pub fn finish(self, mut manifest: Manifest) -> Result<(), CliError> {
        manifest.outputs = self.written;
        manifest.created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let name = format!("{}.manifest.json", manifest.command);
        let mut dir = OutputDir {
            root: self.root,
            written: Vec::new(),
        };
        dir.json(&name, &manifest)
    }
}
