//! Kernels for simulating antiferromagnetic hysteresis in transverse-field
//! Ising models: lattices, anneal schedules, an exact-diagonalization oracle,
//! a path-integral (Suzuki-Trotter) Monte Carlo sampler with memory,
//! observables, single-domain-wall theory and flux-bias calibration.
//!
//! The crate is `no_std` with `alloc`. The default `std` feature only adds
//! `std::error::Error` plumbing; `parallel` runs replicas on rayon.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod calibration;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod observables;
pub mod rng;
pub mod sample;
pub mod schedule;
pub mod sqa;
pub mod theory;

pub use error::{Error, Result};
pub use lattice::SpinLattice;
pub use observables::HysteresisTrace;
pub use sample::SampleSet;
pub use schedule::{EnergyTable, ProtocolWaveform};
