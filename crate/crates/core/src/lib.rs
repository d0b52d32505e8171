//! Construction and verification of hierarchical d-dimensional binary
//! configurations with controlled pattern statistics.
//!
//! The library builds finite stages of a concatenation system: stage k holds
//! a set of cubic 0/1 patterns of side `n_k`, and stage k+1 patterns are
//! assembled from stage-k blocks on a grid, filtered so that every block type
//! occurs in every residue class of a diagonal sublattice with near-uniform
//! frequency, then made coprime to the lattice moduli by inserting one layer
//! of cells per axis. On top of the stages sit exact frequency analysis
//! (occurrence counting with rational arithmetic), entropy accounting,
//! sparse-set density estimates, embedding of prescribed values on sparse
//! point sets, and finite demonstrators for average divergence and orbit
//! separation.
//!
//! Modules:
//! - [`lattice`]: boxes, diagonal sublattices `m·Z^d`, modulus schedules.
//! - [`patterns`]: patterns on boxes, occurrence sets, exact frequencies.
//! - [`construction`]: stages, candidate sampling, admissibility, building
//!   and verifying consecutive stages, stage-file serialization.
//! - [`analysis`]: entropy ledger, schedule checks, frequency extrema and
//!   gap series, counting-law fractions.
//! - [`sparse`]: sparse point sets and scanned density estimates.
//! - [`embedding`]: skeleton regions and exact embedding of assignments.
//! - [`demos`]: sparse averages, divergence and escape demonstrations.

pub mod analysis;
pub mod construction;
pub mod demos;
pub mod embedding;
pub mod error;
pub mod lattice;
pub mod patterns;
pub mod sparse;

pub use error::Error;

/// Exact rational used for all frequency and tolerance arithmetic.
pub type Rational = num_rational::BigRational;

/// Convenience constructor for small rationals.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}
