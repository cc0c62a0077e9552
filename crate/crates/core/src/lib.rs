//! Quantum Stirling-cycle thermal machine with a strained Lieb-kagome lattice
//! as working medium.
//!
//! * [`lattice`]: Bloch bands of the strain-interpolated lattice.
//! * [`thermo`]: partition function and state functions of a band spectrum.
//! * [`cycle`]: Stirling-cycle heats, work, operating mode and performance.
//! * [`spa`]: static-path-approximation Monte Carlo for the repulsive
//!   Hubbard model on the same lattice.
//! * [`sweep`]: parameter sweeps and CSV emission.

// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cycle;
pub mod error;
pub mod lattice;
pub mod spa;
pub mod spa_run;
pub mod sweep;
pub mod thermo;

pub use error::{Error, Result};
