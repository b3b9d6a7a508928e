//! Constrained dynamics and Hilbert-space fragmentation in driven Rydberg
//! atom chains: bases, Hamiltonians, Krylov sectors, time evolution,
//! observables, thermal ensembles, scar diagnostics and noise models.

pub mod basis;
pub mod bessel;
pub mod disorder;
pub mod error;
pub mod evolution;
pub mod fragmentation;
pub mod hamiltonian;
pub mod linalg;
pub mod observables;
pub mod operator;
pub mod par;
pub mod scars;
pub mod thermal;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
