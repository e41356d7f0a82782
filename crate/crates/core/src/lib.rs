//! Classical toolkit for Heisenberg-chain time-evolution circuits and their
//! characterization by process tomography.
//!
//! The crate is organized bottom-up:
//!
//! * [`pauli`] – exact symplectic algebra of multi-qubit Pauli strings.
//! * [`linalg`] – dense complex matrices, Hermitian exponentials, general
//!   eigenvalues and linear solves.
//! * [`circuit`] – gates, Trotter and brickwall builders, CNOT accounting,
//!   dense evaluation and OpenQASM export.
//! * [`compress`] – exact propagators, the infidelity cost, analytic
//!   gradients and the ADAM driver that trains brickwall circuits.
//! * [`channel`] – density-matrix simulation with depolarizing and readout
//!   noise behind the [`channel::Executor`] abstraction.
//! * [`tomo`] – full, selective (MUB based) and twirled process tomography
//!   plus spectral analysis of the reconstructed superoperators.
//! * [`experiment`] – config-driven pipelines used by the `qptkit` binary.

pub mod channel;
pub mod circuit;
pub mod compress;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod pauli;
pub mod tolerances;
pub mod tomo;

pub use error::{Error, Result};
pub use linalg::{c64, ComplexMatrix};
pub use pauli::{Phase, PauliString};

/// Version string embedded in every emitted artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
