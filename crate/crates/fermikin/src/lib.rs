//! Relaxation dynamics of one-particle density matrices for identical
//! fermions.
//!
//! The crate evolves an N-orbital density matrix under a nonlinear
//! master equation whose relaxation term is built from loss and gain
//! anticommutators, alongside the linear Markoff and Lindblad families
//! it limits to. Two independent engines are provided: a direct RK4
//! integrator on the matrix right-hand side, and a constructive
//! fixed-point (Picard) scheme built from a non-hermitian propagator
//! and a Duhamel integral. A diagnostics layer certifies positivity,
//! the Pauli bound, trace conservation, and phase-decay laws on any
//! computed trajectory.

pub mod bcs;
pub mod core;
pub mod diagnostics;
pub mod generators;
pub mod integrators;
pub mod reductions;
pub mod scenario;

#[doc(hidden)]
pub mod testkit;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
