//! TOML run configuration.
//!
//! Relative paths inside a config file are resolved against the directory
//! that holds it. See `configs/` at the repository root for one annotated
//! example per model family.

use std::path::{Path, PathBuf};

use afmhyst_core::calibration::{DEFAULT_ITERATIONS, DEFAULT_SHOTS, DEFAULT_STEP};
use afmhyst_core::lattice::{make_high_coordination, make_odd_ring, make_open_grid};
use afmhyst_core::schedule::{self, SweepPattern};
use afmhyst_core::sqa::{SqaConfig, DEFAULT_BETA_J, DEFAULT_TROTTER};
use afmhyst_core::{EnergyTable, ProtocolWaveform, SpinLattice};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats;

pub const DEFAULT_SHOTS_PER_STEP: usize = 128;
pub const DEFAULT_SWEEPS_PER_STEP: usize = 10;
pub const DEFAULT_WARMUP_SWEEPS: usize = 20;
pub const DEFAULT_ANNEAL_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required before a run; `--seed` on the command line overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Shots per field step, one per independent replica.
    #[serde(default = "default_shots")]
    pub shots: usize,
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("afmhyst-out")
}

fn default_shots() -> usize {
    DEFAULT_SHOTS_PER_STEP
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ring,
    Grid,
    Regular,
    Edgelist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    /// Sites of a ring or regular graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ly: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Antiferromagnetic coupling of generated families, and the unit of
    /// `gamma_over_j`.
    #[serde(default = "default_one")]
    pub coupling: f64,
    /// Uniform per-site field `h_i`; generated families default to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// `"synthetic"` or a CSV path with header `s,A_GHz,B_GHz`.
    #[serde(default = "default_table")]
    pub table: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_pause: Option<Vec<f64>>,
    /// Pause points given by their `Gamma/J`; exclusive with `s_pause`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_over_j: Option<Vec<f64>>,
    pub h_max: f64,
    /// Values per branch, including both extremes.
    pub n_slices: usize,
    #[serde(default = "default_pattern")]
    pub pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_gain_max: Option<f64>,
}

fn default_table() -> String {
    "synthetic".into()
}

fn default_pattern() -> String {
    SweepPattern::UpDownUp.name().into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    #[default]
    Sqa,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default)]
    pub kind: SamplerKind,
    #[serde(default = "default_trotter")]
    pub n_trotter: usize,
    /// Inverse temperature in units of the pause-point coupling energy.
    #[serde(default = "default_beta_j")]
    pub beta_j: f64,
    #[serde(default = "default_sweeps")]
    pub sweeps_per_step: usize,
    #[serde(default = "default_warmup")]
    pub warmup_sweeps: usize,
    #[serde(default)]
    pub disorder_j: f64,
    #[serde(default)]
    pub disorder_h: f64,
    /// Width of static Gaussian per-site field offsets, the miscalibration
    /// that flux-bias offsets are tuned to cancel.
    #[serde(default)]
    pub bias_sigma: f64,
}

fn default_trotter() -> usize {
    DEFAULT_TROTTER
}

fn default_beta_j() -> f64 {
    DEFAULT_BETA_J
}

fn default_sweeps() -> usize {
    DEFAULT_SWEEPS_PER_STEP
}

fn default_warmup() -> usize {
    DEFAULT_WARMUP_SWEEPS
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            kind: SamplerKind::Sqa,
            n_trotter: DEFAULT_TROTTER,
            beta_j: DEFAULT_BETA_J,
            sweeps_per_step: DEFAULT_SWEEPS_PER_STEP,
            warmup_sweeps: DEFAULT_WARMUP_SWEEPS,
            disorder_j: 0.0,
            disorder_h: 0.0,
            bias_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationSampler {
    /// Forward anneal of the model at zero h-gain.
    #[default]
    Anneal,
    /// Exact thermal state of the model (small lattices only).
    Exact,
    /// Uncoupled spins at inverse temperature `beta`.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_cal_shots")]
    pub shots: usize,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub sampler: CalibrationSampler,
    /// End point of the calibration anneal; defaults to the first pause.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_final: Option<f64>,
    #[serde(default = "default_anneal_sweeps")]
    pub anneal_sweeps: usize,
    /// Inverse temperature of the free-spin sampler.
    #[serde(default = "default_free_beta")]
    pub beta: f64,
}

fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}

fn default_cal_shots() -> usize {
    DEFAULT_SHOTS
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_anneal_sweeps() -> usize {
    DEFAULT_ANNEAL_SWEEPS
}

fn default_free_beta() -> f64 {
    afmhyst_core::calibration::BENCHMARK_BETA
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            enabled: false,
            iterations: DEFAULT_ITERATIONS,
            shots: DEFAULT_SHOTS,
            step: DEFAULT_STEP,
            sampler: CalibrationSampler::Anneal,
            s_final: None,
            anneal_sweeps: DEFAULT_ANNEAL_SWEEPS,
            beta: default_free_beta(),
        }
    }
}

/// Pause point of one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pause {
    pub s: f64,
    pub gamma_over_j: f64,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        config.resolve_paths(base_dir);
        Ok(config)
    }

    /// Read, parse and validate a config file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let config = Self::from_toml(&text, base)?;
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
        if let Some(p) = &self.model.path {
            if p.is_relative() {
                self.model.path = Some(base.join(p));
            }
        }
        if self.schedule.table != "synthetic" && Path::new(&self.schedule.table).is_relative() {
            self.schedule.table = base.join(&self.schedule.table).to_string_lossy().into_owned();
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::config("seed is required (set `seed` or pass --seed)"))
    }

    /// Schema checks that need no sampling: referenced files exist, numbers
    /// are in range, and the lattice, table and waveforms build.
    pub fn validate(&self) -> CliResult<()> {
        if self.shots == 0 {
            return Err(CliError::config("shots must be at least 1"));
        }
        let s = &self.sampler;
        if s.n_trotter == 0 || s.sweeps_per_step == 0 {
            return Err(CliError::config("n_trotter and sweeps_per_step must be at least 1"));
        }
        if !(s.beta_j > 0.0 && s.beta_j.is_finite()) {
            return Err(CliError::config(format!("beta_j = {} must be positive", s.beta_j)));
        }
        if !(s.disorder_j >= 0.0 && s.disorder_h >= 0.0 && s.bias_sigma >= 0.0) {
            return Err(CliError::config("disorder and bias widths must be non-negative"));
        }
        let c = &self.calibration;
        if c.enabled {
            if c.shots == 0 || !(c.step > 0.0 && c.step.is_finite()) {
                return Err(CliError::config("calibration needs shots >= 1 and a positive step"));
            }
            if c.sampler == CalibrationSampler::Anneal && c.anneal_sweeps == 0 {
                return Err(CliError::config("calibration anneal_sweeps must be at least 1"));
            }
        }
        let lattice = self.lattice()?;
        let table = self.table()?;
        for pause in self.pauses(&table)? {
            self.waveform(pause.s)?;
        }
        if s.kind == SamplerKind::Exact && lattice.n_sites() > afmhyst_core::exact::MAX_SITES {
            return Err(CliError::config(format!(
                "exact sampler supports at most {} sites, model has {}",
                afmhyst_core::exact::MAX_SITES,
                lattice.n_sites()
            )));
        }
        Ok(())
    }

    fn need<T: Copy>(&self, value: Option<T>, name: &str) -> CliResult<T> {
        value.ok_or_else(|| {
            CliError::config(format!("model family {:?} needs `{name}`", self.model.family))
        })
    }

    pub fn lattice(&self) -> CliResult<SpinLattice> {
        let m = &self.model;
        let built = match m.family {
            Family::Ring => make_odd_ring(self.need(m.n, "n")?, m.coupling),
            Family::Grid => make_open_grid(self.need(m.lx, "lx")?, self.need(m.ly, "ly")?, m.coupling),
            Family::Regular => make_high_coordination(
                self.need(m.n, "n")?,
                self.need(m.degree, "degree")?,
                m.graph_seed.unwrap_or(0),
            ),
            Family::Edgelist => {
                let path = m
                    .path
                    .as_ref()
                    .ok_or_else(|| CliError::config("model family edgelist needs `path`"))?;
                require_file(path, "edge list")?;
                return Ok(match m.field {
                    Some(h) => formats::read_edge_list(path)?.with_uniform_field(h),
                    None => formats::read_edge_list(path)?,
                });
            }
        }
        .map_err(|e| CliError::config(e.to_string()))?;
        Ok(match m.field {
            Some(h) => built.with_uniform_field(h),
            None => built,
        })
    }

    pub fn table(&self) -> CliResult<EnergyTable> {
        if self.schedule.table == "synthetic" {
            return Ok(EnergyTable::synthetic());
        }
        let path = Path::new(&self.schedule.table);
        require_file(path, "schedule table")?;
        formats::read_energy_table(path)
    }

    /// Unit of `gamma_over_j`.
    pub fn coupling_unit(&self) -> f64 {
        self.model.coupling
    }

    pub fn pauses(&self, table: &EnergyTable) -> CliResult<Vec<Pause>> {
        let sch = &self.schedule;
        let j = self.coupling_unit();
        let out: Result<Vec<Pause>, afmhyst_core::Error> = match (&sch.s_pause, &sch.gamma_over_j) {
            (Some(list), None) => list
                .iter()
                .map(|&s| Ok(Pause { s, gamma_over_j: table.gamma_over_j(s, j)? }))
                .collect(),
            (None, Some(list)) => list
                .iter()
                .map(|&g| Ok(Pause { s: table.s_for_gamma_over_j(g, j)?, gamma_over_j: g }))
                .collect(),
            _ => return Err(CliError::config("set exactly one of `s_pause` and `gamma_over_j`")),
        };
        let out = out.map_err(|e| CliError::config(e.to_string()))?;
        if out.is_empty() {
            return Err(CliError::config("no pause points"));
        }
        Ok(out)
    }

    pub fn pattern(&self) -> CliResult<SweepPattern> {
        SweepPattern::parse(&self.schedule.pattern).ok_or_else(|| {
            CliError::config(format!(
                "pattern {:?} is not up-down-up or down-up-down",
                self.schedule.pattern
            ))
        })
    }

    /// Device limit on `|h-gain|`; unlimited when neither a device nor an
    /// explicit limit is given.
    pub fn h_gain_max(&self) -> CliResult<f64> {
        match (&self.schedule.device, self.schedule.h_gain_max) {
            (Some(_), Some(_)) => Err(CliError::config("set at most one of `device` and `h_gain_max`")),
            (Some(name), None) => schedule::device(name)
                .map(|d| d.max_h_gain)
                .ok_or_else(|| CliError::config(format!("unknown device {name:?}"))),
            (None, Some(limit)) => Ok(limit),
            (None, None) => Ok(f64::INFINITY),
        }
    }

    pub fn waveform(&self, s_pause: f64) -> CliResult<ProtocolWaveform> {
        ProtocolWaveform::sweep(
            s_pause,
            self.schedule.h_max,
            self.schedule.n_slices,
            self.h_gain_max()?,
            self.pattern()?,
        )
        .map_err(|e| CliError::config(e.to_string()))
    }

    pub fn sqa_config(&self, seed: u64) -> SqaConfig {
        let s = &self.sampler;
        SqaConfig {
            n_trotter: s.n_trotter,
            beta_j: s.beta_j,
            sweeps_per_step: s.sweeps_per_step,
            warmup_sweeps: s.warmup_sweeps,
            seed,
            replicas: self.shots,
            disorder_j: s.disorder_j,
            disorder_h: s.disorder_h,
        }
    }

    /// Stable digest of everything that affects results; the output
    /// directory is excluded.
    pub fn digest(&self) -> String {
        let mut copy = self.clone();
        copy.output_dir = PathBuf::new();
        formats::sha256_hex(serde_json::to_string(&copy).expect("config serializes").as_bytes())
    }
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} {} does not exist", path.display())))
    }
}
