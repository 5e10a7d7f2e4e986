//! Time-periodic solutions of linear first-order hyperbolic systems on `[0, 1]`
//! with reflection boundary conditions.
//!
//! The solver works mode by mode in time: each Fourier mode `s` is a linear
//! two-point boundary value problem in `x`. Resonance of a mode shows up as a
//! vanishing `det(I − R_s)` in the decoupled case, or a singular boundary
//! system in the coupled case; resonant modes are handled by the Fredholm
//! alternative through the adjoint kernel.

pub mod coupled;
pub mod diagonal;
pub mod error;
pub mod fourier;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod scan;
pub mod verify;

pub use coupled::Side;
pub use diagonal::DEFAULT_EPS_RES;
pub use error::{Error, Result};
pub use fourier::{FourierField, Grid, GridOptions, SampledField};
pub use problem::{compute_phases, validate, ConditionReport, Partition, PhaseData, PiecewiseConstantFn, ProblemData};
