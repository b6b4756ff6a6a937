//! Multiscale stochastic reaction networks: short-timescale reduction,
//! stochastic simulation, and master-equation solvers.
//!
//! A network couples low-copy species (a handful of molecules) with abundant
//! ones (counts of order `N^alpha`). On the short timescale `t * N^-theta0`
//! the abundant species barely move, and the low-copy dynamics converge to a
//! scale-free projected system whose rate constants absorb the frozen
//! abundances. This crate builds that projection mechanically, simulates both
//! the original and the projected system, solves the projected master
//! equation, and measures how fast the two laws approach each other as `N`
//! grows.

// Validation guards are written `!(x >= 0.0)` so that NaN fails them; the
// positive form `x < 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bundled;
pub mod cme;
pub mod dist;
mod error;
pub mod network;
pub mod projection;
pub mod scaling;
pub mod ssa;

pub use error::Error;

/// Exact rational used for scaling exponents (`alpha`, `beta`, intensity
/// orders). Small by construction, so 64-bit components suffice.
pub type Rational = num_rational::Ratio<i64>;

/// Exact rational used for decimal literals and projected rate constants.
/// Decimal text always converts exactly; 128-bit components leave room for
/// products of limits and constants.
pub type Exact = num_rational::Ratio<i128>;

pub type Result<T> = std::result::Result<T, Error>;
