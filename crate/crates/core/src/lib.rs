//! Simulation of hyper-parallel two-photon CPF and parity gates on the
//! frequency, spatial and time-bin qubits of two photons, mediated by three
//! NV centers in microcavities.

pub mod analysis;
pub mod cavity;
pub mod circuit;
pub mod elements;
pub mod error;
pub mod hilbert;

pub use error::{Error, Result};
