//! Path-integral (Suzuki-Trotter) Monte Carlo for the transverse-field Ising
//! model, carried from one h-gain step to the next so that the sampled state
//! keeps a memory of the drive history.
//!
//! The quantum model at inverse temperature `beta` maps onto `P` coupled
//! classical copies (Trotter slices) with action
//!
//! ```text
//! S = beta/P * sum_t [ sum_<ij> J_ij s_i^t s_j^t - sum_i f_i s_i^t ]
//!     - K * sum_t sum_i s_i^t s_i^{t+1},   K = -1/2 ln tanh(beta Gamma / P)
//! ```
//!
//! with periodic imaginary time. Single (site, slice) Metropolis flips on
//! this action satisfy detailed balance at fixed fields.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::SpinLattice;
use crate::observables::{HysteresisTrace, TraceStep};
use crate::rng;
use crate::sample::SampleSet;
use crate::schedule::{EnergyTable, ProtocolWaveform};

pub const DEFAULT_TROTTER: usize = 32;
/// Default inverse temperature in units of a unit coupling at the pause.
pub const DEFAULT_BETA_J: f64 = 8.0;

/// Sampler knobs. The transverse field is not a knob: it follows from
/// `A(s*)` of the energy table.
#[derive(Debug, Clone, PartialEq)]
pub struct SqaConfig {
    pub n_trotter: usize,
    /// `beta * B(s*) / 2`: inverse temperature measured against the energy of
    /// a unit coupling at the pause point.
    pub beta_j: f64,
    pub sweeps_per_step: usize,
    /// Extra sweeps at the first h-gain before the first measurement.
    pub warmup_sweeps: usize,
    pub seed: u64,
    /// Independent chains; also the number of shots per field step.
    pub replicas: usize,
    /// Gaussian static disorder on couplings and fields (0 disables).
    pub disorder_j: f64,
    pub disorder_h: f64,
}

impl SqaConfig {
    pub fn new(seed: u64, replicas: usize, sweeps_per_step: usize) -> Self {
        SqaConfig {
            n_trotter: DEFAULT_TROTTER,
            beta_j: DEFAULT_BETA_J,
            sweeps_per_step,
            warmup_sweeps: 0,
            seed,
            replicas,
            disorder_j: 0.0,
            disorder_h: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trotter == 0 {
            return Err(Error::SamplerConfig("n_trotter must be at least 1".into()));
        }
        if self.sweeps_per_step == 0 {
            return Err(Error::SamplerConfig("sweeps_per_step must be at least 1".into()));
        }
        if self.replicas == 0 {
            return Err(Error::SamplerConfig("replicas must be at least 1".into()));
        }
        if !(self.beta_j > 0.0 && self.beta_j.is_finite()) {
            return Err(Error::SamplerConfig(format!("beta_j = {} must be positive", self.beta_j)));
        }
        if !(self.disorder_j >= 0.0 && self.disorder_h >= 0.0) {
            return Err(Error::SamplerConfig("disorder widths must be non-negative".into()));
        }
        Ok(())
    }
}

/// Spins of one replica, slice-major: `spins[t * n_sites + i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaState {
    n_sites: usize,
    n_trotter: usize,
    spins: Vec<i8>,
}

impl ReplicaState {
    pub fn uniform(n_sites: usize, n_trotter: usize, spin: i8) -> Self {
        ReplicaState {
            n_sites,
            n_trotter,
            spins: vec![if spin < 0 { -1 } else { 1 }; n_sites * n_trotter],
        }
    }

    /// Independent uniform spins in every slice.
    pub fn random(n_sites: usize, n_trotter: usize, rng: &mut impl Rng) -> Self {
        let spins = (0..n_sites * n_trotter)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        ReplicaState {
            n_sites,
            n_trotter,
            spins,
        }
    }

    pub fn from_spins(n_sites: usize, n_trotter: usize, spins: Vec<i8>) -> Result<Self> {
        if n_sites == 0 || n_trotter == 0 || spins.len() != n_sites * n_trotter {
            return Err(Error::SiteMismatch {
                got: spins.len(),
                expected: n_sites * n_trotter,
            });
        }
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::NotASpin(bad));
        }
        Ok(ReplicaState {
            n_sites,
            n_trotter,
            spins,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_trotter(&self) -> usize {
        self.n_trotter
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn slice(&self, t: usize) -> &[i8] {
        &self.spins[t * self.n_sites..(t + 1) * self.n_sites]
    }
}

/// Trotterized action at fixed fields, pre-scaled by `beta / P`.
#[derive(Debug, Clone)]
pub struct SliceAction {
    n_sites: usize,
    n_trotter: usize,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    /// `beta/P * J_ij`.
    weights: Vec<f64>,
    /// `beta/P * f_i`.
    fields: Vec<f64>,
    /// Ferromagnetic coupling between neighbouring slices.
    k_perp: f64,
    /// Update classes with no coupling inside a class; `None` means a fresh
    /// random order over all (site, slice) pairs on every sweep.
    colors: Option<[Vec<u32>; 2]>,
}

impl SliceAction {
    /// `coupling_scale` multiplies every `J_ij`; `fields` are the effective
    /// longitudinal fields `f_i` in the same energy units as `gamma`.
    pub fn new(
        lattice: &SpinLattice,
        coupling_scale: f64,
        fields: &[f64],
        gamma: f64,
        beta: f64,
        n_trotter: usize,
    ) -> Result<Self> {
        let n = lattice.n_sites();
        if fields.len() != n {
            return Err(Error::SiteMismatch {
                got: fields.len(),
                expected: n,
            });
        }
        let k_perp = trotter_coupling(gamma, beta, n_trotter)?;
        if !fields.iter().all(|f| f.is_finite()) || !coupling_scale.is_finite() {
            return Err(Error::SamplerConfig("non-finite field or coupling".into()));
        }
        let bs = beta / n_trotter as f64;
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for i in 0..n {
            for &(j, c) in lattice.neighbors(i) {
                targets.push(j as u32);
                weights.push(bs * coupling_scale * c);
            }
            offsets.push(targets.len());
        }
        let colors = lattice
            .bipartition()
            .filter(|_| n_trotter == 1 || n_trotter % 2 == 0)
            .map(|labels| {
                let mut colors = [Vec::new(), Vec::new()];
                for t in 0..n_trotter {
                    for (i, l) in labels.iter().enumerate() {
                        let c = (usize::from(l.sign() < 0) + t) % 2;
                        colors[c].push((t * n + i) as u32);
                    }
                }
                colors
            });
        Ok(SliceAction {
            n_sites: n,
            n_trotter,
            offsets,
            targets,
            weights,
            fields: fields.iter().map(|f| bs * f).collect(),
            k_perp,
            colors,
        })
    }

    pub fn k_perp(&self) -> f64 {
        self.k_perp
    }

    /// Replace the longitudinal fields, keeping couplings and `K`.
    pub fn set_fields(&mut self, fields: &[f64], beta: f64) {
        let bs = beta / self.n_trotter as f64;
        for (dst, f) in self.fields.iter_mut().zip(fields) {
            *dst = bs * f;
        }
    }

    /// `dS` of flipping site `i` in slice `t`.
    #[inline]
    fn flip_cost(&self, spins: &[i8], i: usize, t: usize) -> f64 {
        let n = self.n_sites;
        let row = &spins[t * n..(t + 1) * n];
        let mut local = -self.fields[i];
        for k in self.offsets[i]..self.offsets[i + 1] {
            local += self.weights[k] * f64::from(row[self.targets[k] as usize]);
        }
        if self.n_trotter > 1 {
            let p = self.n_trotter;
            let up = spins[((t + 1) % p) * n + i];
            let down = spins[((t + p - 1) % p) * n + i];
            local -= self.k_perp * f64::from(up + down);
        }
        -2.0 * f64::from(row[i]) * local
    }

    #[inline]
    fn try_flip(&self, spins: &mut [i8], idx: usize, rng: &mut ChaCha8Rng) {
        let (t, i) = (idx / self.n_sites, idx % self.n_sites);
        let ds = self.flip_cost(spins, i, t);
        if ds <= 0.0 || rng.random::<f64>() < libm::exp(-ds) {
            spins[idx] = -spins[idx];
        }
    }

    /// Action of a full replica configuration.
    pub fn action(&self, state: &ReplicaState) -> f64 {
        let n = self.n_sites;
        let mut s = 0.0;
        for t in 0..self.n_trotter {
            let row = state.slice(t);
            for i in 0..n {
                let si = f64::from(row[i]);
                for k in self.offsets[i]..self.offsets[i + 1] {
                    let j = self.targets[k] as usize;
                    if j > i {
                        s += self.weights[k] * si * f64::from(row[j]);
                    }
                }
                s -= self.fields[i] * si;
            }
            if self.n_trotter > 1 {
                let next = state.slice((t + 1) % self.n_trotter);
                s -= self.k_perp * row.iter().zip(next).map(|(&a, &b)| f64::from(a * b)).sum::<f64>();
            }
        }
        s
    }
}

/// `K = -1/2 ln tanh(beta Gamma / P)`; zero when `P = 1`.
pub fn trotter_coupling(gamma: f64, beta: f64, n_trotter: usize) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::SamplerConfig(format!("beta = {beta} must be positive")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::SamplerConfig(format!("gamma = {gamma} must be non-negative")));
    }
    match n_trotter {
        0 => Err(Error::SamplerConfig("n_trotter must be at least 1".into())),
        1 if gamma == 0.0 => Ok(0.0),
        1 => Err(Error::SamplerConfig("a transverse field needs n_trotter >= 2".into())),
        _ if gamma == 0.0 => Err(Error::SamplerConfig(
            "zero transverse field needs n_trotter = 1".into(),
        )),
        p => {
            let k = -0.5 * libm::log(libm::tanh(beta * gamma / p as f64));
            if k.is_finite() {
                Ok(k)
            } else {
                Err(Error::SamplerConfig(format!("K = {k} is not finite")))
            }
        }
    }
}

/// Keys the random stream of one block of sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepKey {
    pub seed: u64,
    pub replica: u64,
    pub step: u64,
}

/// `sweeps` Metropolis sweeps at fixed fields. A sweep visits every
/// (site, slice) pair once: by colour class when the action is two-colourable,
/// otherwise in a fresh random order.
pub fn step_once(state: &mut ReplicaState, action: &SliceAction, sweeps: usize, key: SweepKey) {
    let mut order = Vec::new();
    for sweep in 0..sweeps {
        let mut rng = rng::sweep_stream(key.seed, key.replica, key.step, sweep as u64);
        one_sweep(state, action, &mut rng, &mut order);
    }
}

fn one_sweep(state: &mut ReplicaState, action: &SliceAction, rng: &mut ChaCha8Rng, order: &mut Vec<u32>) {
    assert_eq!(
        (state.n_sites, state.n_trotter),
        (action.n_sites, action.n_trotter),
        "replica shape does not match the action"
    );
    match &action.colors {
        Some(colors) => {
            for class in colors {
                for &idx in class {
                    action.try_flip(&mut state.spins, idx as usize, rng);
                }
            }
        }
        None => {
            if order.len() != state.spins.len() {
                *order = (0..state.spins.len() as u32).collect();
            }
            order.shuffle(rng);
            for &idx in order.iter() {
                action.try_flip(&mut state.spins, idx as usize, rng);
            }
        }
    }
}

/// Stream blocks kept apart from the field-step indices.
const ANNEAL_BLOCK: u64 = u64::MAX;
const WARMUP_BLOCK: u64 = u64::MAX - 1;

/// Forward anneal at fixed h-gain `g`: `s` ramps linearly from the start of
/// the table to `s_end` over `sweeps` sweeps at inverse temperature `beta`.
#[allow(clippy::too_many_arguments)]
fn forward_anneal(
    state: &mut ReplicaState,
    lattice: &SpinLattice,
    table: &EnergyTable,
    s_end: f64,
    g: f64,
    offsets: Option<&[f64]>,
    beta: f64,
    sweeps: usize,
    seed: u64,
    replica: u64,
) -> Result<()> {
    let (s0, _) = table.range();
    let mut order = Vec::new();
    for k in 0..sweeps {
        let s = s0 + (k + 1) as f64 / sweeps as f64 * (s_end - s0);
        let (a, b) = table.interpolate(s)?;
        let point = PausePoint {
            scale: 0.5 * b,
            gamma: 0.5 * a,
            beta,
        };
        let action = SliceAction::new(
            lattice,
            point.scale,
            &point.fields(lattice, g, offsets),
            point.gamma,
            beta,
            state.n_trotter,
        )?;
        let mut rng = rng::sweep_stream(seed, replica, ANNEAL_BLOCK, k as u64);
        one_sweep(state, &action, &mut rng, &mut order);
    }
    Ok(())
}

/// Slice index recorded as the z-measurement of one replica at one step.
fn measured_slice(seed: u64, replica: u64, step: u64, n_trotter: usize) -> usize {
    rng::stream(seed, rng::domain::MEASURE, replica, step).random_range(0..n_trotter)
}

/// Energies at the pause point, in the table's units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PausePoint {
    /// `B(s*) / 2`: energy of a unit coupling or a unit field.
    pub scale: f64,
    /// `A(s*) / 2`.
    pub gamma: f64,
    pub beta: f64,
}

impl PausePoint {
    pub fn new(table: &EnergyTable, s: f64, beta_j: f64) -> Result<Self> {
        let (a, b) = table.interpolate(s)?;
        if b <= 0.0 {
            return Err(Error::EnergyTable(format!("B({s}) = {b} must be positive")));
        }
        let scale = 0.5 * b;
        Ok(PausePoint {
            scale,
            gamma: 0.5 * a,
            beta: beta_j / scale,
        })
    }

    /// Transverse field in units of a unit coupling.
    pub fn gamma_over_j(&self) -> f64 {
        self.gamma / self.scale
    }

    /// Effective fields `B/2 (g h_i + offset_i)`.
    pub fn fields(&self, lattice: &SpinLattice, g: f64, offsets: Option<&[f64]>) -> Vec<f64> {
        let h = lattice.fields();
        (0..h.len())
            .map(|i| self.scale * (g * h[i] + offsets.map_or(0.0, |o| o[i])))
            .collect()
    }
}

/// Samples and trace of one hysteresis cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutput {
    pub samples: Vec<SampleSet>,
    pub trace: HysteresisTrace,
    pub pause: PausePoint,
}

fn check_offsets(lattice: &SpinLattice, offsets: Option<&[f64]>) -> Result<()> {
    match offsets {
        Some(o) if o.len() != lattice.n_sites() => Err(Error::SiteMismatch {
            got: o.len(),
            expected: lattice.n_sites(),
        }),
        Some(o) if !o.iter().all(|v| v.is_finite()) => {
            Err(Error::SamplerConfig("non-finite flux-bias offset".into()))
        }
        _ => Ok(()),
    }
}

/// Shots of one replica across the whole waveform.
fn run_replica(
    lattice: &SpinLattice,
    waveform: &ProtocolWaveform,
    pause: &PausePoint,
    config: &SqaConfig,
    offsets: Option<&[f64]>,
    replica: u64,
) -> Result<Vec<Vec<i8>>> {
    let (n, p) = (lattice.n_sites(), config.n_trotter);
    let steps = &waveform.h_gain_steps;
    let mut state = match steps[0].partial_cmp(&0.0) {
        Some(core::cmp::Ordering::Greater) => ReplicaState::uniform(n, p, 1),
        Some(core::cmp::Ordering::Less) => ReplicaState::uniform(n, p, -1),
        _ => ReplicaState::random(n, p, &mut rng::stream(config.seed, rng::domain::INIT, replica, 0)),
    };
    let mut action = SliceAction::new(
        lattice,
        pause.scale,
        &pause.fields(lattice, steps[0], offsets),
        pause.gamma,
        pause.beta,
        p,
    )?;
    let warmup = SweepKey {
        seed: config.seed,
        replica,
        step: WARMUP_BLOCK,
    };
    step_once(&mut state, &action, config.warmup_sweeps, warmup);
    let mut shots = Vec::with_capacity(steps.len());
    for (k, &g) in steps.iter().enumerate() {
        action.set_fields(&pause.fields(lattice, g, offsets), pause.beta);
        let key = SweepKey {
            seed: config.seed,
            replica,
            step: k as u64,
        };
        step_once(&mut state, &action, config.sweeps_per_step, key);
        let t = measured_slice(config.seed, replica, k as u64, p);
        shots.push(state.slice(t).to_vec());
    }
    Ok(shots)
}

/// One closed hysteresis cycle at the waveform's pause point.
///
/// Every replica starts polarized along the first h-gain (random if it is
/// zero), which is the state a slow forward anneal to the pause reaches once
/// the field exceeds the exchange scale. After `warmup_sweeps` at that gain it
/// runs `sweeps_per_step` sweeps at each h-gain and records one
/// uniformly chosen Trotter slice. `offsets` are per-site flux-bias offsets
/// added to `g h_i`.
pub fn run_cycle(
    lattice: &SpinLattice,
    waveform: &ProtocolWaveform,
    table: &EnergyTable,
    config: &SqaConfig,
    offsets: Option<&[f64]>,
) -> Result<CycleOutput> {
    waveform.validate()?;
    config.validate()?;
    check_offsets(lattice, offsets)?;
    let pause = PausePoint::new(table, waveform.s_pause, config.beta_j)?;
    let disordered;
    let lattice = if config.disorder_j > 0.0 || config.disorder_h > 0.0 {
        disordered = lattice.with_static_disorder(config.disorder_j, config.disorder_h, config.seed);
        &disordered
    } else {
        lattice
    };
    let run = |r: usize| run_replica(lattice, waveform, &pause, config, offsets, r as u64);
    #[cfg(feature = "parallel")]
    let per_replica: Vec<Vec<Vec<i8>>> = {
        use rayon::prelude::*;
        (0..config.replicas).into_par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_replica: Vec<Vec<Vec<i8>>> = (0..config.replicas).map(run).collect::<Result<_>>()?;

    let lattice_ref = format!("{:016x}", lattice.fingerprint());
    let directions = waveform.directions();
    let mut samples = Vec::with_capacity(waveform.len());
    let mut steps = Vec::with_capacity(waveform.len());
    for (k, &g) in waveform.h_gain_steps.iter().enumerate() {
        let set = SampleSet::from_shots(per_replica.iter().map(|r| r[k].as_slice()), g, lattice_ref.as_str())?;
        steps.push(TraceStep::from_samples(&set, lattice, directions[k])?);
        samples.push(set);
    }
    Ok(CycleOutput {
        samples,
        trace: HysteresisTrace::new(steps)?,
        pause,
    })
}

/// Plain forward anneal at zero h-gain, used for calibration: `s` ramps
/// linearly from the start of the table to `s_final` over `sweeps` sweeps,
/// then one Trotter slice is measured per replica.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSampler {
    pub lattice: SpinLattice,
    pub table: EnergyTable,
    pub config: SqaConfig,
    pub s_final: f64,
    pub sweeps: usize,
}

impl AnnealSampler {
    /// `shots` replicas annealed under per-site offsets; `key` separates calls.
    pub fn sample(&self, offsets: &[f64], shots: usize, key: u64) -> Result<SampleSet> {
        check_offsets(&self.lattice, Some(offsets))?;
        if shots == 0 || self.sweeps == 0 {
            return Err(Error::SamplerConfig("shots and sweeps must be positive".into()));
        }
        let end = PausePoint::new(&self.table, self.s_final, self.config.beta_j)?;
        let (n, p) = (self.lattice.n_sites(), self.config.n_trotter);
        let seed = rng::mix(&[self.config.seed, key]);
        let mut out = Vec::with_capacity(shots * n);
        for r in 0..shots as u64 {
            let mut state = ReplicaState::random(n, p, &mut rng::stream(seed, rng::domain::INIT, r, 0));
            forward_anneal(
                &mut state,
                &self.lattice,
                &self.table,
                self.s_final,
                0.0,
                Some(offsets),
                end.beta,
                self.sweeps,
                seed,
                r,
            )?;
            let t = measured_slice(seed, r, 0, p);
            out.extend_from_slice(state.slice(t));
        }
        SampleSet::new(n, out, 0.0, format!("{:016x}", self.lattice.fingerprint()))
    }
}
