//! Numerics for the ranked prime-factor process of a uniform random integer
//! and its Poisson–Dirichlet limit.

pub mod checks;
pub mod convergence;
pub mod dickman;
pub mod error;
pub mod factor_stats;
pub mod montecarlo;
pub mod pd_process;
pub mod powers;
pub mod primes;
pub mod quadrature;
pub mod region;
pub mod smoothcount;

pub use error::{Error, Result};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_260_418;
