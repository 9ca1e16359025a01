//! Run manifest: what was run, on which inputs, and checksums of everything
//! written. Contents depend only on the command line, the inputs and the
//! optional `SOURCE_DATE_EPOCH`, so identical runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use lagrograph::fields::Grid2D;
use lagrograph::solvers::SolverConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct GridRecord {
    pub n_per_side: usize,
    pub half_width: f64,
    pub mask_radius: f64,
}

impl From<&Grid2D> for GridRecord {
    fn from(g: &Grid2D) -> Self {
        GridRecord {
            n_per_side: g.n(),
            half_width: g.half_width(),
            mask_radius: g.mask_radius(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub arguments: Vec<String>,
    pub input_paths: Vec<FileRecord>,
    pub output_dir: String,
    pub config: SolverConfig,
    pub seed: u64,
    pub grid: Option<GridRecord>,
    /// `SOURCE_DATE_EPOCH` when set; wall-clock time would break byte
    /// reproducibility.
    pub timestamp_unix: Option<u64>,
    pub exit_code: i32,
    pub artifacts: Vec<FileRecord>,
}

pub fn record(path: &Path, shown: &str) -> Result<FileRecord, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::io(path, e))?;
    Ok(FileRecord {
        path: shown.to_owned(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Collects the files a command writes into the output directory.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_owned(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| Failure::io(&path, e))?;
        self.note(name);
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::validation(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    /// Registers a file written by other code under the output directory.
    pub fn note(&mut self, name: &str) {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_owned());
        }
    }

    pub fn records(&self) -> Result<Vec<FileRecord>, Failure> {
        self.written.iter().map(|name| record(&self.path(name), name)).collect()
    }
}

pub fn source_date_epoch() -> Result<Option<u64>, Failure> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::validation(format!("SOURCE_DATE_EPOCH must be an integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}
