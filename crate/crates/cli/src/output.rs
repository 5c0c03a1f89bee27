//! Output directory with checksummed files and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Outcome of one unit of work (a seed, or a sweep cell and seed).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskStatus {
    pub task: String,
    pub status: String,
}

impl TaskStatus {
    pub fn ok(task: impl Into<String>) -> Self {
        TaskStatus { task: task.into(), status: "ok".into() }
    }

    pub fn failed(task: impl Into<String>, err: impl std::fmt::Display) -> Self {
        TaskStatus { task: task.into(), status: format!("failed: {err}") }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub tasks: Vec<TaskStatus>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(format!("json: {e}")))?;
    v.push(b'\n');
    Ok(v)
}

pub fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Runtime(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))
}

#[derive(Clone, Debug)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutputDir { root: root.to_path_buf() })
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<FileEntry, CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 })
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<FileEntry, CliError> {
        self.write(name, &json_bytes(value)?)
    }

    pub fn write_csv<T: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<FileEntry, CliError> {
        self.write(name, &csv_bytes(rows)?)
    }

    /// Write the manifest, whose bytes depend only on the outputs, and the
    /// wall-clock record next to it.
    pub fn finish(&self, mut manifest: RunManifest, wall_clock: f64, workers: usize) -> Result<(), CliError> {
        manifest.files.sort();
        manifest.tasks.sort_by(|a, b| a.task.cmp(&b.task));
        self.write_json(MANIFEST, &manifest)?;
        let started = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64() - wall_clock)
            .unwrap_or(0.0);
        self.write_json(
            TIMING,
            &serde_json::json!({ "started_unix": started, "wall_clock_seconds": wall_clock, "workers": workers }),
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn csv_has_header_row() {
        #[derive(Serialize)]
        struct Row {
            n: u64,
            x: f64,
        }
        let b = csv_bytes([Row { n: 1, x: 0.5 }]).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "n,x\n1,0.5\n");
    }
}
