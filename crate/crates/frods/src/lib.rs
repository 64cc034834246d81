//! Open quantum system dynamics from first- and second-order discrete Dyson
//! series, resummed iteratively over bold diagrams.
//!
//! The pieces, bottom up:
//!
//! - [`linops`]: dense complex matrices and Hermitian exponentials.
//! - [`bath`]: Ohmic bath discretization and the lattice correlation table.
//! - [`system`]: model Hamiltonians and per-step propagators.
//! - [`wick`]: influence functionals by brute-force pairing.
//! - [`dyson`]: enumerating reference sums.
//! - [`engine`]: the iterative scheme with memory and circle-count truncation.
//! - [`sim`]: observables, convergence orders, sweeps.
//! - [`cli`]: configuration files, CSV output and the subcommand drivers.

pub mod bath;
pub mod cli;
pub mod dyson;
pub mod engine;
pub mod error;
pub mod linops;
pub mod sim;
pub mod system;
pub mod wick;

#[cfg(test)]
mod testutil;

pub use error::{FrodsError, Result};
pub use linops::ComplexMatrix;
