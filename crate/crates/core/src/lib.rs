//! One-bit quadratic compressed sensing with Kaczmarz-family solvers.
//!
//! The pipeline: generate a sparse signal and its quadratic measurements
//! ([`qcs`]), quantize them to sign bits against random thresholds
//! ([`onebit`]), assemble the lifted polyhedron, solve it as a linear
//! feasibility problem ([`solvers`]), then read the signal back off the
//! recovered matrix ([`recovery`]). [`experiment`] wires these into
//! config-driven runs.

pub mod experiment;
pub mod io;
pub mod linalg;
pub mod onebit;
pub mod qcs;
pub mod recovery;
pub mod rng;
pub mod solvers;
