//! Annealing energy scales and the pause-and-sweep drive waveform.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Total anneal time of the hardware protocol, carried as run metadata only.
pub const PROTOCOL_TIME_US: f64 = 11.2;

/// Device envelope: graph size and the largest programmable h-gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceEnvelope {
    pub name: &'static str,
    pub graph: &'static str,
    pub qubits: usize,
    pub couplers: usize,
    pub max_h_gain: f64,
}

pub const DEVICES: [DeviceEnvelope; 4] = [
    DeviceEnvelope {
        name: "Advantage_system4.1",
        graph: "Pegasus P16",
        qubits: 5627,
        couplers: 40279,
        max_h_gain: 1.75,
    },
    DeviceEnvelope {
        name: "Advantage_system6.4",
        graph: "Pegasus P16",
        qubits: 5612,
        couplers: 40088,
        max_h_gain: 4.0,
    },
    DeviceEnvelope {
        name: "Advantage_system7.1",
        graph: "Pegasus P16",
        qubits: 5554,
        couplers: 39238,
        max_h_gain: 3.5,
    },
    DeviceEnvelope {
        name: "Advantage2_prototype2.6",
        graph: "Zephyr Z(6,4)",
        qubits: 1248,
        couplers: 10827,
        max_h_gain: 3.0,
    },
];

pub fn device(name: &str) -> Option<&'static DeviceEnvelope> {
    DEVICES.iter().find(|d| d.name == name)
}

/// One row of an energy table; energies in GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub s: f64,
    pub a: f64,
    pub b: f64,
}

/// Tabulated transverse (`A`) and longitudinal (`B`) energy scales.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable {
    rows: Vec<EnergyRow>,
}

impl EnergyTable {
    pub fn new(rows: Vec<EnergyRow>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::EnergyTable("need at least two rows".into()));
        }
        for (k, r) in rows.iter().enumerate() {
            if !(r.s.is_finite() && r.a.is_finite() && r.b.is_finite()) {
                return Err(Error::EnergyTable(format!("row {k} is not finite")));
            }
            if r.a < 0.0 || r.b < 0.0 {
                return Err(Error::EnergyTable(format!("row {k} has a negative energy")));
            }
        }
        for (k, w) in rows.windows(2).enumerate() {
            if w[1].s <= w[0].s {
                return Err(Error::EnergyTable(format!("s not increasing at row {}", k + 1)));
            }
            if w[1].a > w[0].a {
                return Err(Error::EnergyTable(format!("A increases at row {}", k + 1)));
            }
            if w[1].b < w[0].b {
                return Err(Error::EnergyTable(format!("B decreases at row {}", k + 1)));
            }
        }
        Ok(EnergyTable { rows })
    }

    /// Smooth stand-in schedule: `A` decays to ~0.01 GHz by `s = 0.8`, `B` grows
    /// quadratically. Tabulated at `s = 0, 0.01, ..., 1`.
    pub fn synthetic() -> Self {
        let rows = (0..=100)
            .map(|k| {
                let s = k as f64 / 100.0;
                EnergyRow {
                    s,
                    a: round6(6.0 * libm::exp(-8.0 * s)),
                    b: round6(0.2 + 11.8 * s * s),
                }
            })
            .collect();
        EnergyTable::new(rows).expect("synthetic table is valid")
    }

    pub fn rows(&self) -> &[EnergyRow] {
        &self.rows
    }

    pub fn range(&self) -> (f64, f64) {
        (self.rows[0].s, self.rows[self.rows.len() - 1].s)
    }

    /// Piecewise-linear `(A(s), B(s))`, exact at knots.
    pub fn interpolate(&self, s: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&s) {
            return Err(Error::OutOfRange { s, lo, hi });
        }
        let k = self.rows.partition_point(|r| r.s <= s);
        if k > 0 && self.rows[k - 1].s == s {
            let r = self.rows[k - 1];
            return Ok((r.a, r.b));
        }
        let (r0, r1) = (self.rows[k - 1], self.rows[k]);
        let t = (s - r0.s) / (r1.s - r0.s);
        Ok((r0.a + t * (r1.a - r0.a), r0.b + t * (r1.b - r0.b)))
    }

    /// `A(s) / (B(s) |J|)`. The factors of 1/2 on both terms of the
    /// hardware Hamiltonian cancel in the ratio.
    pub fn gamma_over_j(&self, s: f64, coupling: f64) -> Result<f64> {
        if coupling == 0.0 {
            return Err(Error::ZeroCoupling);
        }
        let (a, b) = self.interpolate(s)?;
        Ok(a / (b * coupling.abs()))
    }

    /// Pause point `s` at which `gamma_over_j` equals `target`, by bisection.
    pub fn s_for_gamma_over_j(&self, target: f64, coupling: f64) -> Result<f64> {
        let (mut lo, mut hi) = self.range();
        let f = |s: f64| self.gamma_over_j(s, coupling).map(|g| g - target);
        let (flo, fhi) = (f(lo)?, f(hi)?);
        if flo < 0.0 || fhi > 0.0 {
            return Err(Error::EnergyTable(format!(
                "Gamma/J = {target} not reachable on [{lo}, {hi}]"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn round6(x: f64) -> f64 {
    libm::round(x * 1e6) / 1e6
}

/// Order in which the sweep visits the field extremes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepPattern {
    /// `+max -> -max -> +max`.
    #[default]
    UpDownUp,
    /// `-max -> +max -> -max`.
    DownUpDown,
}

impl SweepPattern {
    pub fn name(self) -> &'static str {
        match self {
            SweepPattern::UpDownUp => "up-down-up",
            SweepPattern::DownUpDown => "down-up-down",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "up-down-up" => Some(SweepPattern::UpDownUp),
            "down-up-down" => Some(SweepPattern::DownUpDown),
            _ => None,
        }
    }
}

/// Closed h-gain cycle: `n_slices` uniform values from one extreme to the
/// other and back, sharing the turning point, so `2 n_slices - 1` steps.
pub fn build_sweep(h_max: f64, n_slices: usize, pattern: SweepPattern) -> Result<Vec<f64>> {
    if n_slices < 2 {
        return Err(Error::Waveform(format!("n_slices = {n_slices} is degenerate")));
    }
    if !(h_max > 0.0 && h_max.is_finite()) {
        return Err(Error::Waveform(format!("h_max = {h_max} must be positive")));
    }
    let last = (n_slices - 1) as f64;
    let sign = match pattern {
        SweepPattern::UpDownUp => 1.0,
        SweepPattern::DownUpDown => -1.0,
    };
    let branch: Vec<f64> = (0..n_slices)
        .map(|k| sign * h_max * ((last - 2.0 * k as f64) / last))
        .collect();
    let mut steps = branch.clone();
    steps.extend(branch.iter().rev().skip(1));
    Ok(steps)
}

/// Pause point, h-gain steps and device limit for one hysteresis cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolWaveform {
    pub s_pause: f64,
    pub h_gain_steps: Vec<f64>,
    pub h_gain_max: f64,
    pub total_time_us: f64,
    pub pattern: SweepPattern,
}

impl ProtocolWaveform {
    pub fn new(
        s_pause: f64,
        h_gain_steps: Vec<f64>,
        h_gain_max: f64,
        pattern: SweepPattern,
    ) -> Result<Self> {
        let w = ProtocolWaveform {
            s_pause,
            h_gain_steps,
            h_gain_max,
            total_time_us: PROTOCOL_TIME_US,
            pattern,
        };
        w.validate()?;
        Ok(w)
    }

    /// Sweep of amplitude `h_max` under a device limit `h_gain_max`.
    pub fn sweep(
        s_pause: f64,
        h_max: f64,
        n_slices: usize,
        h_gain_max: f64,
        pattern: SweepPattern,
    ) -> Result<Self> {
        Self::new(s_pause, build_sweep(h_max, n_slices, pattern)?, h_gain_max, pattern)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_pause > 0.0 && self.s_pause < 1.0) {
            return Err(Error::Waveform(format!("s_pause = {} outside (0, 1)", self.s_pause)));
        }
        let steps = &self.h_gain_steps;
        if steps.len() < 3 {
            return Err(Error::Waveform("fewer than three h-gain steps".into()));
        }
        if let Some(&value) = steps.iter().find(|g| !(g.abs() <= self.h_gain_max)) {
            return Err(Error::Envelope {
                value,
                limit: self.h_gain_max,
            });
        }
        if steps[0] != steps[steps.len() - 1] {
            return Err(Error::Waveform("cycle does not close".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.h_gain_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_gain_steps.is_empty()
    }

    /// Direction marker of each step: the sign of the move into it, with the
    /// first step taking the direction of the move out of it.
    pub fn directions(&self) -> Vec<Direction> {
        let g = &self.h_gain_steps;
        (0..g.len())
            .map(|k| {
                let d = if k == 0 { g[1] - g[0] } else { g[k] - g[k - 1] };
                if d < 0.0 {
                    Direction::Down
                } else {
                    Direction::Up
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Down => "down",
            Direction::Up => "up",
        }
    }
}
