//! CSV and JSON emission with a reproducibility manifest per run.

use crate::config::RunConfig;
use fesh3b::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write a CSV with a header row; every record must match its length.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name)).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
        std::fs::write(self.path(name), text + "\n")?;
        self.files.push(name.into());
        Ok(())
    }

    /// manifest.json describing the command, the resolved configuration
    /// and its hash, and every file written so far.
    pub fn manifest<T: Serialize>(&mut self, command: &str, config: &RunConfig, extra: &T) -> Result<()> {
        let canonical = serde_json::to_string(config).map_err(|e| Error::Numerical(e.to_string()))?;
        let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
        let manifest = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "config_sha256": hash,
            "files": self.files,
            "run": extra,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Numerical(e.to_string()))?;
        std::fs::write(self.path("manifest.json"), text + "\n")?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Shortest round-trip representation; empty for missing values.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
