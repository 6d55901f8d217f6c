//! Number of allelic types `K_n` for samples drawn from exchangeable
//! coalescents (Λ- and Ξ-coalescents) with infinitely-many-alleles mutation.
//!
//! The crate is organised along the computation pipeline:
//!
//! * [`measure`] validates characterizing measures and evaluates the integral
//!   functionals built on them (Laplace exponent, proper-frequency conditions).
//! * [`rates`] builds the block-counting jump rates `g_nk`, the total rates
//!   `g_n` and the expected block drops used as mutual oracles.
//! * [`exact`] evaluates the distribution and factorial moments of `K_n`
//!   through the first-event recursion, plus an exact-rational variant.
//! * [`asymptotic`] gives the limit law of `K_n / n` through its moments and,
//!   for measures of finite total intensity, a fixed-point sampler.
//! * [`simulate`] runs the coalescent tree with superimposed mutations.
//! * [`cli`] binds everything into the `typecount` command line tool.

#![allow(clippy::needless_range_loop)]

pub mod asymptotic;
pub mod cli;
pub mod error;
pub mod exact;
pub mod io;
pub mod measure;
pub mod quadrature;
pub mod rates;
pub mod simulate;
pub mod special;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
pub use measure::{Extended, Measure, MeasureSpec};
pub use rates::RateTable;

/// Tool version embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
