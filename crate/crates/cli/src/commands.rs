//! The CLI verbs as library functions.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use afmhyst_core::calibration::{
    self, BiasedSampler, CalibrationState, ExactSiteSampler, FreeSpinSampler, SiteSampler,
};
use afmhyst_core::exact::{self, Temperature, TfimSpec};
use afmhyst_core::observables::{self, HysteresisTrace, TraceStep, SSF_GRID, SSF_SHOTS};
use afmhyst_core::schedule::{Direction, PROTOCOL_TIME_US};
use afmhyst_core::sqa::{self, AnnealSampler};
use afmhyst_core::theory::{self, DropletParams, GroupVelocity, WallModel};
use afmhyst_core::{rng, EnergyTable, ProtocolWaveform, SampleSet, SpinLattice};
use serde::Deserialize;

use crate::config::{CalibrationSampler, Pause, RunConfig, SamplerKind};
use crate::error::{CliError, CliResult};
use crate::formats::{self, HeatmapMeta};
use crate::record::{self, CalibrationRef, CycleRecord, Metadata, RunRecord, StepRecord};

const CALIBRATION_SPREAD_FILE: &str = "calibration/spread.csv";
const CALIBRATION_FBO_FILE: &str = "calibration/fbo.csv";

fn trace_file(cycle: usize) -> String {
    format!("traces/cycle_{cycle:02}.csv")
}

// run ------------------------------------------------------------------------

/// Run every cycle of `config`, resuming a partial record in the output
/// directory when its config hash matches.
pub fn run(config: &RunConfig) -> CliResult<RunRecord> {
    config.validate()?;
    let seed = config.seed()?;
    let dir = config.output_dir.clone();
    let clock = Instant::now();
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let hash = config.digest();

    let lattice = config.lattice()?;
    let table = config.table()?;
    let pauses = config.pauses(&table)?;
    let disordered = lattice.with_static_disorder(config.sampler.disorder_j, config.sampler.disorder_h, seed);
    let lattice_ref = format!("{:016x}", disordered.fingerprint());

    let mut record = match RunRecord::path(&dir).is_file() {
        true => {
            let old = RunRecord::load(&dir)?;
            if old.config_hash != hash {
                return Err(CliError::config(format!(
                    "{} holds a record of a different config",
                    dir.display()
                )));
            }
            old.check(&dir)?;
            if old.complete {
                return Ok(old);
            }
            old
        }
        false => RunRecord {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            config_hash: hash,
            complete: false,
            lattice_file: record::LATTICE_FILE.into(),
            lattice_ref: lattice_ref.clone(),
            calibration: None,
            cycles: Vec::new(),
            metadata: Metadata {
                started_unix_s: started,
                wall_clock_s: 0.0,
                protocol_time_us: PROTOCOL_TIME_US,
                sweeps_per_step: config.sampler.sweeps_per_step,
            },
        },
    };
    let elapsed_before = record.metadata.wall_clock_s;
    formats::write_atomic(&dir.join(record::LATTICE_FILE), formats::write_edge_list(&lattice).as_bytes())?;

    let bias = static_bias(config, lattice.n_sites(), seed)?;
    let fbo = if !config.calibration.enabled {
        None
    } else if let Some(c) = &record.calibration {
        Some(read_fbo(&dir.join(&c.fbo_file), lattice.n_sites())?)
    } else {
        let s_final = config.calibration.s_final.unwrap_or(pauses[0].s);
        let state = calibrate_model(config, &disordered, &table, s_final, bias.as_deref(), seed)?;
        record.calibration = Some(write_calibration(&dir, &state)?);
        record.save(&dir)?;
        Some(state.fbo)
    };
    let offsets = combine_offsets(bias.as_deref(), fbo.as_deref());

    for (c, pause) in pauses.iter().enumerate().skip(record.cycles.len()) {
        let waveform = config.waveform(pause.s)?;
        let (samples, trace, beta) = match config.sampler.kind {
            SamplerKind::Sqa => {
                let out = sqa::run_cycle(&lattice, &waveform, &table, &config.sqa_config(seed), offsets.as_deref())?;
                (out.samples, out.trace, out.pause.beta)
            }
            SamplerKind::Exact => {
                let (samples, trace) =
                    exact_cycle(config, &disordered, &lattice, &waveform, *pause, offsets.as_deref(), seed)?;
                let beta = sqa::PausePoint::new(&table, pause.s, config.sampler.beta_j)?.beta;
                (samples, trace, beta)
            }
        };
        let mut steps = Vec::with_capacity(samples.len());
        for (set, step) in samples.iter().zip(trace.steps()) {
            let bytes = formats::encode_samples(set);
            let rel = record::sample_path(&formats::sha256_hex(&bytes));
            let path = dir.join(&rel);
            if !path.is_file() {
                formats::write_atomic(&path, &bytes)?;
            }
            steps.push(StepRecord {
                h_gain: set.field_value,
                direction: step.direction.name().into(),
                samples: rel,
            });
        }
        let text = formats::write_trace(&trace);
        formats::write_atomic(&dir.join(trace_file(c)), text.as_bytes())?;
        record.cycles.push(CycleRecord {
            s_pause: pause.s,
            gamma_over_j: pause.gamma_over_j,
            beta,
            trace_file: trace_file(c),
            trace_sha256: formats::sha256_hex(text.as_bytes()),
            loop_area: observables::loop_area(&trace)?,
            steps,
        });
        record.metadata.wall_clock_s = elapsed_before + clock.elapsed().as_secs_f64();
        record.save(&dir)?;
    }
    record.complete = true;
    record.save(&dir)?;
    Ok(record)
}

/// Memoryless reference cycle: every step is an independent exact thermal
/// sample in units of `B(s*)/2`.
fn exact_cycle(
    config: &RunConfig,
    disordered: &SpinLattice,
    lattice: &SpinLattice,
    waveform: &ProtocolWaveform,
    pause: Pause,
    offsets: Option<&[f64]>,
    seed: u64,
) -> CliResult<(Vec<SampleSet>, HysteresisTrace)> {
    let gamma = pause.gamma_over_j * config.coupling_unit().abs();
    let lattice_ref = format!("{:016x}", disordered.fingerprint());
    let directions = waveform.directions();
    let mut samples = Vec::with_capacity(waveform.len());
    let mut steps = Vec::with_capacity(waveform.len());
    for (k, &g) in waveform.h_gain_steps.iter().enumerate() {
        let fields = disordered
            .fields()
            .iter()
            .enumerate()
            .map(|(i, h)| g * h + offsets.map_or(0.0, |o| o[i]))
            .collect();
        let step_lattice = SpinLattice::new(disordered.n_sites(), disordered.edges().to_vec(), fields)?;
        let spec = TfimSpec::new(step_lattice, gamma, 1.0, Temperature::Beta(config.sampler.beta_j))?;
        let mut set = exact::sample_z(&spec, config.shots, rng::mix(&[seed, k as u64]))?;
        set.field_value = g;
        set.lattice_ref = lattice_ref.clone();
        steps.push(TraceStep::from_samples(&set, lattice, directions[k])?);
        samples.push(set);
    }
    Ok((samples, HysteresisTrace::new(steps)?))
}

fn static_bias(config: &RunConfig, n: usize, seed: u64) -> CliResult<Option<Vec<f64>>> {
    let sigma = config.sampler.bias_sigma;
    if sigma == 0.0 {
        return Ok(None);
    }
    let probe = FreeSpinSampler { n_sites: n, beta: 1.0, seed };
    Ok(Some(BiasedSampler::gaussian(probe, sigma, seed)?.bias().to_vec()))
}

fn combine_offsets(bias: Option<&[f64]>, fbo: Option<&[f64]>) -> Option<Vec<f64>> {
    match (bias, fbo) {
        (None, None) => None,
        (Some(b), None) => Some(b.to_vec()),
        (None, Some(f)) => Some(f.to_vec()),
        (Some(b), Some(f)) => Some(b.iter().zip(f).map(|(x, y)| x + y).collect()),
    }
}

fn calibrate_with<S: SiteSampler>(
    inner: S,
    bias: Option<&[f64]>,
    config: &RunConfig,
) -> CliResult<CalibrationState> {
    let c = &config.calibration;
    Ok(match bias {
        Some(b) => calibration::calibrate(&BiasedSampler::new(inner, b.to_vec())?, c.iterations, c.shots, c.step)?,
        None => calibration::calibrate(&inner, c.iterations, c.shots, c.step)?,
    })
}

fn calibrate_model(
    config: &RunConfig,
    lattice: &SpinLattice,
    table: &EnergyTable,
    s_final: f64,
    bias: Option<&[f64]>,
    seed: u64,
) -> CliResult<CalibrationState> {
    let c = &config.calibration;
    match c.sampler {
        CalibrationSampler::Anneal => {
            let sampler = AnnealSampler {
                lattice: lattice.clone(),
                table: table.clone(),
                config: config.sqa_config(seed),
                s_final,
                sweeps: c.anneal_sweeps,
            };
            calibrate_with(sampler, bias, config)
        }
        CalibrationSampler::Exact => {
            let sampler = ExactSiteSampler {
                lattice: lattice.clone(),
                gamma: table.gamma_over_j(s_final, config.coupling_unit())? * config.coupling_unit().abs(),
                temperature: Temperature::Beta(config.sampler.beta_j),
                seed,
            };
            calibrate_with(sampler, bias, config)
        }
        CalibrationSampler::Free => {
            let sampler = FreeSpinSampler {
                n_sites: lattice.n_sites(),
                beta: c.beta,
                seed,
            };
            calibrate_with(sampler, bias, config)
        }
    }
}

fn write_calibration(dir: &Path, state: &CalibrationState) -> CliResult<CalibrationRef> {
    let spreads = state.spreads();
    let mut text = String::from("iteration,spread\n");
    for (k, s) in spreads.iter().enumerate() {
        text.push_str(&format!("{k},{s}\n"));
    }
    formats::write_atomic(&dir.join(CALIBRATION_SPREAD_FILE), text.as_bytes())?;
    let mut text = String::from("site,offset\n");
    for (i, f) in state.fbo.iter().enumerate() {
        text.push_str(&format!("{i},{f}\n"));
    }
    formats::write_atomic(&dir.join(CALIBRATION_FBO_FILE), text.as_bytes())?;
    Ok(CalibrationRef {
        iterations: state.iteration,
        initial_spread: spreads[0],
        final_spread: spreads[spreads.len() - 1],
        spread_file: CALIBRATION_SPREAD_FILE.into(),
        fbo_file: CALIBRATION_FBO_FILE.into(),
    })
}

#[derive(Deserialize)]
struct FboRow {
    site: usize,
    offset: f64,
}

fn read_fbo(path: &Path, n: usize) -> CliResult<Vec<f64>> {
    let text = formats::read_text(path)?;
    let mut out = vec![f64::NAN; n];
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<FboRow>() {
        let row = row.map_err(|e| CliError::format(path, e))?;
        *out.get_mut(row.site)
            .ok_or_else(|| CliError::format(path, format!("site {} out of range", row.site)))? = row.offset;
    }
    if out.iter().any(|v| v.is_nan()) {
        return Err(CliError::format(path, "missing sites"));
    }
    Ok(out)
}

// calibrate ------------------------------------------------------------------

/// Stand-alone calibration of a config's model; writes the spread history
/// and offsets under `out`.
pub fn calibrate_config(config: &RunConfig, out: &Path) -> CliResult<CalibrationRef> {
    config.validate()?;
    let seed = config.seed()?;
    let lattice = config.lattice()?;
    let table = config.table()?;
    let s_final = match config.calibration.s_final {
        Some(s) => s,
        None => config.pauses(&table)?[0].s,
    };
    let disordered = lattice.with_static_disorder(config.sampler.disorder_j, config.sampler.disorder_h, seed);
    let bias = static_bias(config, lattice.n_sites(), seed)?;
    let state = calibrate_model(config, &disordered, &table, s_final, bias.as_deref(), seed)?;
    write_calibration(out, &state)
}

/// Free-spin benchmark: `n_sites` uncoupled spins with Gaussian biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub n_sites: usize,
    pub bias_sigma: f64,
    pub beta: f64,
    pub iterations: usize,
    pub shots: usize,
    pub step: f64,
    pub seed: u64,
}

pub fn calibrate_benchmark(b: &Benchmark, out: &Path) -> CliResult<CalibrationRef> {
    let inner = FreeSpinSampler {
        n_sites: b.n_sites,
        beta: b.beta,
        seed: b.seed,
    };
    let sampler = BiasedSampler::gaussian(inner, b.bias_sigma, b.seed)?;
    let state = calibration::calibrate(&sampler, b.iterations, b.shots, b.step)?;
    write_calibration(out, &state)
}

// analyze --------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analysis {
    Trace,
    Ssf,
    Walls,
    Area,
    Heightmap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    /// Field steps for `ssf` and `heightmap`; defaults to the marked steps.
    pub steps: Option<Vec<usize>>,
    pub grid: usize,
    pub shots: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            steps: None,
            grid: SSF_GRID,
            shots: SSF_SHOTS,
        }
    }
}

/// A finished or partial record loaded for read-only analysis.
pub struct LoadedRecord {
    pub dir: PathBuf,
    pub record: RunRecord,
    pub lattice: SpinLattice,
}

impl LoadedRecord {
    pub fn open(dir: &Path) -> CliResult<Self> {
        let record = RunRecord::load(dir)?;
        record.check(dir)?;
        let lattice = formats::read_edge_list(&dir.join(&record.lattice_file))?;
        Ok(LoadedRecord {
            dir: dir.to_path_buf(),
            record,
            lattice,
        })
    }

    pub fn samples(&self, cycle: usize, step: usize) -> CliResult<SampleSet> {
        let rel = &self.record.cycles[cycle].steps[step].samples;
        let path = self.dir.join(rel);
        formats::decode_samples(&formats::read_bytes(&path)?, &self.record.lattice_ref, &path)
    }

    /// Trace recomputed from the sample files.
    pub fn trace(&self, cycle: usize) -> CliResult<HysteresisTrace> {
        let steps = &self.record.cycles[cycle].steps;
        let mut out = Vec::with_capacity(steps.len());
        for (k, step) in steps.iter().enumerate() {
            let direction = match step.direction.as_str() {
                "down" => Direction::Down,
                "up" => Direction::Up,
                other => {
                    return Err(CliError::format(
                        &RunRecord::path(&self.dir),
                        format!("unknown direction {other:?}"),
                    ))
                }
            };
            out.push(TraceStep::from_samples(&self.samples(cycle, k)?, &self.lattice, direction)?);
        }
        Ok(HysteresisTrace::new(out)?)
    }
}

/// Start, turning point and the step of smallest `|m_z|` on each branch.
pub fn marked_steps(trace: &HysteresisTrace) -> Vec<usize> {
    let steps = trace.steps();
    let mid = steps.len() / 2;
    let closest = |range: std::ops::Range<usize>| {
        range
            .min_by(|&a, &b| steps[a].m_z.abs().total_cmp(&steps[b].m_z.abs()))
            .unwrap_or(0)
    };
    let mut out = vec![0, closest(1..mid), mid, closest(mid + 1..steps.len() - 1)];
    out.dedup();
    out
}

/// Write the requested artifacts into `out` and return their paths.
pub fn analyze(dir: &Path, what: Analysis, options: &AnalyzeOptions, out: &Path) -> CliResult<Vec<PathBuf>> {
    let rec = LoadedRecord::open(dir)?;
    let n_cycles = rec.record.cycles.len();
    let precondition = CliError::Precondition;
    let mut written = Vec::new();
    let mut emit = |name: String, text: String| -> CliResult<()> {
        let path = out.join(name);
        formats::write_atomic(&path, text.as_bytes())?;
        written.push(path);
        Ok(())
    };
    match what {
        Analysis::Trace => {
            for c in 0..n_cycles {
                emit(trace_file(c), formats::write_trace(&rec.trace(c)?))?;
            }
        }
        Analysis::Area => {
            let mut text = String::from("s_pause,gamma_over_j,loop_area\n");
            for (c, cycle) in rec.record.cycles.iter().enumerate() {
                let area = observables::loop_area(&rec.trace(c)?)?;
                text.push_str(&format!("{},{},{}\n", cycle.s_pause, cycle.gamma_over_j, area));
            }
            emit("areas.csv".into(), text)?;
        }
        Analysis::Walls => {
            if !rec.lattice.is_ring() {
                return Err(precondition(afmhyst_core::Error::NotARing));
            }
            for c in 0..n_cycles {
                let mut text = String::from("step,H,direction,wall_total,wall_dd,wall_uu\n");
                for (k, step) in rec.record.cycles[c].steps.iter().enumerate() {
                    let w = observables::wall_density(&rec.samples(c, k)?, &rec.lattice)
                        .map_err(precondition)?;
                    text.push_str(&format!(
                        "{k},{},{},{},{},{}\n",
                        step.h_gain, step.direction, w.total, w.down_down, w.up_up
                    ));
                }
                emit(format!("walls_cycle_{c:02}.csv"), text)?;
            }
        }
        Analysis::Ssf | Analysis::Heightmap => {
            let Some(afmhyst_core::lattice::Geometry::Grid { lx, .. }) = rec.lattice.geometry() else {
                return Err(precondition(afmhyst_core::Error::MissingGeometry));
            };
            for c in 0..n_cycles {
                let trace = rec.trace(c)?;
                let steps = match &options.steps {
                    Some(s) => s.clone(),
                    None => marked_steps(&trace),
                };
                for k in steps {
                    if k >= trace.len() {
                        return Err(CliError::config(format!("step {k} out of range for {} steps", trace.len())));
                    }
                    let set = rec.samples(c, k)?;
                    if what == Analysis::Ssf {
                        let set = set.truncated(options.shots.min(set.shots()));
                        let map = observables::structure_factor(&set, &rec.lattice, options.grid)
                            .map_err(precondition)?;
                        let (a, b) = map.argmax();
                        let meta = HeatmapMeta {
                            grid: map.grid(),
                            q_min: map.q[0],
                            q_max: map.q[map.grid() - 1],
                            shots: map.shots,
                            cycle: c,
                            step: k,
                            h_gain: set.field_value,
                            m_z: trace.steps()[k].m_z,
                            argmax_qx: map.q[a],
                            argmax_qy: map.q[b],
                            brillouin_zone: [-std::f64::consts::PI, std::f64::consts::PI],
                        };
                        emit(format!("ssf_cycle_{c:02}_step_{k:03}.csv"), formats::write_heatmap(&map))?;
                        emit(
                            format!("ssf_cycle_{c:02}_step_{k:03}.json"),
                            serde_json::to_string_pretty(&meta).expect("meta serializes"),
                        )?;
                    } else {
                        let first = observables::height_map(set.shot(0), &rec.lattice).map_err(precondition)?;
                        let mut mean = vec![0.0; rec.lattice.n_sites()];
                        for shot in set.iter() {
                            let tau = observables::height_map(shot, &rec.lattice).map_err(precondition)?;
                            mean.iter_mut().zip(tau).for_each(|(m, t)| *m += f64::from(t));
                        }
                        mean.iter_mut().for_each(|m| *m /= set.shots() as f64);
                        emit(format!("heightmap_cycle_{c:02}_step_{k:03}.csv"), formats::write_int_grid(&first, lx))?;
                        emit(
                            format!("heightmap_mean_cycle_{c:02}_step_{k:03}.csv"),
                            formats::write_float_grid(&mean, lx),
                        )?;
                    }
                }
            }
        }
    }
    Ok(written)
}

// theory ---------------------------------------------------------------------

/// `m,k,E_plus,E_minus,v_plus,v_minus` over the Bloch momenta of an odd
/// ring; velocities are empty where the bands touch.
pub fn theory_bands(n: usize, coupling: f64, field: f64, gamma: f64) -> CliResult<String> {
    let model = WallModel::new(n, coupling, field, gamma)?;
    let mut text = String::from("m,k,E_plus,E_minus,v_plus,v_minus\n");
    for m in 0..n {
        let k = theory::momentum(n, m);
        let (plus, minus) = theory::bands(&model, m)?;
        let (vp, vm) = match theory::group_velocity(&model, k) {
            GroupVelocity::Finite { plus, minus } => (plus.to_string(), minus.to_string()),
            GroupVelocity::Degenerate => (String::new(), String::new()),
        };
        text.push_str(&format!("{m},{k},{plus},{minus},{vp},{vm}\n"));
    }
    Ok(text)
}

/// `R,E_surface,E_field,E_total` on `points` radii up to `2 R_c`, plus the
/// critical radius and barrier.
pub fn theory_droplet(params: &DropletParams, points: usize) -> CliResult<(String, f64, f64)> {
    let (r_c, e_c) = theory::critical_droplet(params)?;
    let mut text = String::from("R,E_surface,E_field,E_total\n");
    let points = points.max(2);
    for k in 0..points {
        let r = 2.0 * r_c * k as f64 / (points - 1) as f64;
        let e = theory::droplet(params, r);
        text.push_str(&format!("{r},{},{},{}\n", e.surface, e.field, e.total));
    }
    Ok((text, r_c, e_c))
}
