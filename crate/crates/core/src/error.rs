use alloc::string::String;

/// Errors raised by the simulation kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("ring size {0} must be odd and at least 3")]
    RingSize(usize),
    #[error("grid dimensions {lx}x{ly} must both be at least 2")]
    GridSize { lx: usize, ly: usize },
    #[error("no {degree}-regular simple graph on {n} sites")]
    InfeasibleRegular { n: usize, degree: usize },
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(usize, usize),
    #[error("edge ({0}, {1}) is duplicated")]
    DuplicateEdge(usize, usize),
    #[error("site index {index} out of range for {n_sites} sites")]
    SiteOutOfRange { index: usize, n_sites: usize },
    #[error("edge ({0}, {1}) joins two sites of the same sublattice")]
    NotBipartite(usize, usize),
    #[error("lattice has no bipartition")]
    MissingBipartition,
    #[error("lattice has no grid geometry")]
    MissingGeometry,
    #[error("lattice is not a ring")]
    NotARing,
    #[error("invalid energy table: {0}")]
    EnergyTable(String),
    #[error("annealing parameter s={s} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { s: f64, lo: f64, hi: f64 },
    #[error("coupling J must be non-zero")]
    ZeroCoupling,
    #[error("invalid waveform: {0}")]
    Waveform(String),
    #[error("h-gain {value} exceeds the device envelope {limit}")]
    Envelope { value: f64, limit: f64 },
    #[error("{n_sites} sites exceed the exact-diagonalization cap of {cap}")]
    SizeCap { n_sites: usize, cap: usize },
    #[error("diagonalization did not converge: {0}")]
    NotConverged(String),
    #[error("invalid sampler configuration: {0}")]
    SamplerConfig(String),
    #[error("sample set is empty")]
    EmptySamples,
    #[error("sample set has {got} sites, lattice has {expected}")]
    SiteMismatch { got: usize, expected: usize },
    #[error("spin value {0} is not +1 or -1")]
    NotASpin(i8),
    #[error("hysteresis trace is not closed: first H={first}, last H={last}")]
    OpenTrace { first: f64, last: f64 },
    #[error("hysteresis trace is degenerate: {0}")]
    DegenerateTrace(String),
    #[error("ring size {0} must be odd")]
    EvenRing(usize),
    #[error("mode index {m} out of range for n={n}")]
    ModeIndex { m: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("field times net spin must be non-zero")]
    ZeroField,
    #[error("invalid calibration parameters: {0}")]
    Calibration(String),
    #[error("magnetization became NaN at iteration {0}")]
    NanMagnetization(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
