//! Geometric phases of the ground-state OH molecule in rotating fields.
//!
//! The crate models the eight-level X²Π₃/₂ Stark–Zeeman manifold driven by
//! magnetic and electric fields that rotate about the laboratory `z` axis at a
//! common rate `ω_r`. The time-dependent problem is mapped onto a
//! time-independent dressed matrix whose spectrum yields the total, dynamical
//! and geometric phase of every state over one rotation period.
//!
//! Module map:
//!
//! * [`model`] physical constants, field protocols and the 8×8 Hamiltonian.
//! * [`dressing`] the co-rotating transformation that removes the time
//!   dependence.
//! * [`spectrum`] the complex Hermitian Jacobi eigensolver and state tracking
//!   along `ω_r` sweeps.
//! * [`phase`] geometric phases, closed forms, asymptotics and zero-phase
//!   rotation rates.
//! * [`floquet_pt`] small-angle Floquet perturbation theory.
//! * [`oracle`] direct propagation of the Schrödinger equation over one period.
//! * [`config`], [`report`] and [`driver`] back the `ohphase` command-line
//!   tool.

pub mod config;
pub mod dressing;
pub mod driver;
mod error;
pub mod floquet_pt;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod phase;
pub mod report;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{FieldProtocol, HamiltonianMatrix, MoleculeParams};
pub use spectrum::{DressedSpectrum, Parity, StateLabel, TrackedSweep};
