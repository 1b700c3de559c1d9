//! Plot-ready CSV tables and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, which is
//! locale independent and stable across runs. Every file has a one-line
//! header and newline-terminated rows.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use pareto_market::{CorrelationSample, Histogram, RankSize, SizeSnapshot, TrajectoryPoint};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn correlation_csv(samples: &[CorrelationSample]) -> String {
    let mut s = String::from("time,value\n");
    for c in samples {
        let _ = writeln!(s, "{},{}", c.time, c.value);
    }
    s
}

pub fn snapshots_csv(snapshots: &[SizeSnapshot]) -> String {
    let mut s = String::from("time,firm_id,radius,size\n");
    for snap in snapshots {
        for (id, r) in snap.radii.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", snap.time, id, r, 2.0 * r);
        }
    }
    s
}

pub fn ranksize_csv(curve: &[RankSize]) -> String {
    let mut s = String::from("rank,size\n");
    for p in curve {
        let _ = writeln!(s, "{},{}", p.rank, p.size);
    }
    s
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut s = String::from("bin_lo,bin_hi,count,density\n");
    let density = h.densities();
    for (k, count) in h.counts.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            h.bin_edges[k],
            h.bin_edges[k + 1],
            count,
            density[k]
        );
    }
    s
}

pub fn trajectory_csv(points: &[TrajectoryPoint]) -> String {
    let mut s = String::from("time,size,age\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.time, p.size, p.age);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Collects output files of one command, writing each exactly once.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    pub files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(OutputFile {
            path: name.to_string(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("cannot serialise {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_origin: String,
    /// The config file exactly as read.
    pub config_source: String,
    /// Effective configuration after command-line overrides.
    pub config: serde_json::Value,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<OutputFile>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}
