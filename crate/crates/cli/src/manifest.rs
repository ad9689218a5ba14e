use std::path::Path;

use pedflow_core::io::{read_json, write_json};
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Spatial frame of a run's snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameInfo {
    /// `lattice` (x = k h) or `grid` (cell centres).
    pub kind: FrameKind,
    pub length: f64,
    pub cells: usize,
    pub cell_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Lattice,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub time: f64,
    pub file: String,
}

/// Written last into every run directory; its presence marks a complete run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_path: Option<String>,
    pub outdir: String,
    pub wall_time_s: f64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameInfo>,
    pub snapshots: Vec<SnapshotEntry>,
    /// Every file in the run directory, this manifest included.
    pub files: Vec<String>,
    pub version: String,
}

impl RunManifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        Ok(read_json(&dir.join(MANIFEST_NAME))?)
    }

    pub fn save(&self, dir: &Path) -> CliResult<()> {
        Ok(write_json(&dir.join(MANIFEST_NAME), self)?)
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }
}
