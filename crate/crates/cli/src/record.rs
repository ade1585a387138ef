//! JSON run record: config snapshot plus references to every artifact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats;

pub const RECORD_FILE: &str = "record.json";
pub const LATTICE_FILE: &str = "lattice.edges";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool_version: String,
    pub config: RunConfig,
    pub config_hash: String,
    /// False while cycles are still missing.
    pub complete: bool,
    pub lattice_file: String,
    pub lattice_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRef>,
    pub cycles: Vec<CycleRecord>,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRef {
    pub iterations: usize,
    pub initial_spread: f64,
    pub final_spread: f64,
    /// `iteration,spread`.
    pub spread_file: String,
    /// `site,offset`.
    pub fbo_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub s_pause: f64,
    pub gamma_over_j: f64,
    /// Inverse temperature in 1/GHz at the pause point.
    pub beta: f64,
    pub trace_file: String,
    pub trace_sha256: String,
    pub loop_area: f64,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub h_gain: f64,
    pub direction: String,
    /// Content-addressed: `samples/<sha256>.bin`.
    pub samples: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
    pub protocol_time_us: f64,
    pub sweeps_per_step: usize,
}

impl RunRecord {
    pub fn path(dir: &Path) -> PathBuf {
        dir.join(RECORD_FILE)
    }

    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = Self::path(dir);
        let text = formats::read_text(&path)?;
        serde_json::from_str(&text).map_err(|e| CliError::format(&path, e))
    }

    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("record serializes");
        formats::write_atomic(&Self::path(dir), text.as_bytes())
    }

    /// Every referenced file exists, and sample and trace files match their
    /// recorded hashes.
    pub fn check(&self, dir: &Path) -> CliResult<()> {
        let exists = |rel: &str| {
            let p = dir.join(rel);
            if p.is_file() {
                Ok(p)
            } else {
                Err(CliError::format(&Self::path(dir), format!("missing artifact {rel}")))
            }
        };
        exists(&self.lattice_file)?;
        if let Some(c) = &self.calibration {
            exists(&c.spread_file)?;
            exists(&c.fbo_file)?;
        }
        for cycle in &self.cycles {
            let p = exists(&cycle.trace_file)?;
            if formats::sha256_hex(&formats::read_bytes(&p)?) != cycle.trace_sha256 {
                return Err(CliError::format(&p, "trace does not match its recorded hash"));
            }
            for step in &cycle.steps {
                let p = exists(&step.samples)?;
                let name = sample_hash(&step.samples);
                if formats::sha256_hex(&formats::read_bytes(&p)?) != name {
                    return Err(CliError::format(&p, "sample file does not match its name"));
                }
            }
        }
        Ok(())
    }
}

/// Relative path of a content-addressed sample file.
pub fn sample_path(hash: &str) -> String {
    format!("samples/{hash}.bin")
}

fn sample_hash(rel: &str) -> &str {
    rel.trim_start_matches("samples/").trim_end_matches(".bin")
}
