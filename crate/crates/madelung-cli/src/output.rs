// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Atomic scenario outputs.
//!
//! Every run stages its files in a temporary sibling directory and
//! renames it into place only after all writes succeeded, so failed
//! runs never leave partial outputs behind. Floating-point values are
//! written with 17 significant digits and round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub fn fmt_field(v: f64) -> String {
    format!("{v:.16e}")
}

/// A staged output directory; call [`OutputStage::commit`] to move it
/// to its final path.
pub struct OutputStage {
    staging: tempfile::TempDir,
    target: PathBuf,
}

impl OutputStage {
    pub fn new(target: &Path) -> Result<Self, CliError> {
        if target.exists() {
            let occupied = fs::read_dir(target)
                .map_err(|e| CliError::Io(format!("reading {}: {e}", target.display())))?
                .next()
                .is_some();
            if occupied {
                return Err(CliError::Io(format!(
                    "output directory {} exists and is not empty",
                    target.display()
                )));
            }
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", parent.display())))?;
        let staging = tempfile::Builder::new()
            .prefix(".madelung-stage-")
            .tempdir_in(&parent)
            .map_err(|e| CliError::Io(format!("staging under {}: {e}", parent.display())))?;
        Ok(Self { staging, target: target.to_path_buf() })
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.staging.path().join(name);
        fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.staging.path().join(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
    }

    /// Write a CSV with a fixed column order and 17-significant-digit
    /// floating point text.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut text = String::new();
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| fmt_field(*v)).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        self.write_text(name, &text)
    }

    pub fn commit(self) -> Result<PathBuf, CliError> {
        if self.target.exists() {
            fs::remove_dir(&self.target)
                .map_err(|e| CliError::Io(format!("replacing {}: {e}", self.target.display())))?;
        }
        let staged = self.staging.keep();
        fs::rename(&staged, &self.target).map_err(|e| {
            let _ = fs::remove_dir_all(&staged);
            CliError::Io(format!("moving outputs to {}: {e}", self.target.display()))
        })?;
        Ok(self.target)
    }
}

/// Row-major binary dump: two little-endian u32 dimensions, then the
/// values as little-endian f64.
pub fn flat_binary(dims: (usize, usize), values: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&(dims.0 as u32).to_le_bytes());
    bytes.extend_from_slice(&(dims.1 as u32).to_le_bytes());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Plain CSV loader for `compare`: first row is the header.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: empty file", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            CliError::Config(format!("{} row {}: {e}", path.display(), idx + 2))
        })?;
        if row.len() != header.len() {
            return Err(CliError::Config(format!(
                "{} row {}: {} fields, expected {}",
                path.display(),
                idx + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_stdout_csv(header: &[&str], rows: &[Vec<f64>]) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| fmt_field(*v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
}
