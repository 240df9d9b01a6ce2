//! Numerical laboratory for harmonic measures on hyperbolic boundaries.
//!
//! The crate implements three layers:
//!
//! - concrete group models: the free group `F_k` with its word metric
//!   ([`free`]) and exact-integer `SL(2,Z)` subgroups acting on the
//!   hyperbolic plane ([`sl2`]);
//! - a generic Gromov-hyperbolic kernel ([`hyperbolic`]) plus the random-walk
//!   engine ([`walk`]): step distributions, reproducible trajectory sampling
//!   and exact sparse convolution powers;
//! - the exact free-group oracle ([`oracle`]) and model-agnostic Monte Carlo
//!   estimators ([`estimators`]) for drift, entropy, harmonic measure and
//!   local dimension, together with the diagnostic suites that probe the
//!   dimension formula `dim = h / l` at desk scale.
//!
//! Everything downstream of a seed is deterministic: trajectory sampling uses
//! counter-based generators keyed by (seed, stream, step), and all parallel
//! reductions run in fixed index order, so results are bitwise independent of
//! the worker-thread count.

pub mod accel;
mod error;
pub mod estimators;
pub mod free;
pub mod hyperbolic;
pub mod oracle;
pub mod rng;
pub mod sl2;
pub mod walk;

pub use error::{Error, Result};
