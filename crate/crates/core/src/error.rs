use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("speed a_{component} vanishes on cell {cell}")]
    ZeroSpeed { component: usize, cell: usize },

    #[error("{samples} time samples cannot resolve modes up to |s| = {s_max} (need at least {needed})")]
    Aliasing {
        samples: usize,
        s_max: usize,
        needed: usize,
    },

    #[error("field is not Hermitian-symmetric at mode s = {s} (defect {defect:e})")]
    NotHermitian { s: i64, defect: f64 },

    #[error("mode s = {s} is resonant (|det| or sigma_min = {magnitude:e})")]
    ResonantMode { s: i64, magnitude: f64 },

    #[error("Richardson iteration is not contractive (observed ratio {ratio:.6}, {iterations} iterations)")]
    NonContractive { ratio: f64, iterations: usize },

    #[error("CFL number {0} outside (0, 1]")]
    CflViolation(f64),

    #[error("cell {cell} has {have} subcells, at least {need} are required")]
    TooFewSubnodes { cell: usize, have: usize, need: usize },

    #[error("matrix exponential overflow (norm {0:e})")]
    ExpOverflow(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}
