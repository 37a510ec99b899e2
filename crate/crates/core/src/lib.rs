//! Verification laboratory for multi-time (Lagrangian 1-form) quantum
//! integrability.
//!
//! * [`hilbert`]: dense operators, matrix exponentials, grid and ladder
//!   operator constructions.
//! * [`hierarchy`]: Hamiltonian hierarchies, zero-curvature residuals and
//!   gauge-generated flat hierarchies.
//! * [`timelattice`]: staircase paths on the time lattice, their
//!   multi-index parameterisation and redundancy analysis.
//! * [`evolution`]: time-ordered evolution along paths, loop residuals and
//!   mixed-partial compatibility.
//! * [`kernelflow`]: exact Gaussian propagators for quadratic 1-forms, van
//!   Vleck prefactors, fluctuation spectra and the grid-operator oracle.
//! * [`closure`]: classical 1-form layer (closure residuals, path actions).
//! * [`cli`]: scenario configuration, orchestration and report emission.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod closure;
pub mod error;
pub mod evolution;
pub mod hierarchy;
pub mod hilbert;
pub mod kernelflow;
pub mod timelattice;

pub use error::{Error, Result};
