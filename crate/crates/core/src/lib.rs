//! Closed systems of thermal qubits under excitation-conserving unitaries.
//!
//! The crate is `no_std` with `alloc`. It covers state construction
//! ([`qstate`]), block-diagonal unitaries ([`sectors`]), thermodynamic
//! observables ([`thermo`]), few-qubit work machines ([`machines`]) and
//! eight-qubit landscapes ([`landscape`]).

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod landscape;
pub mod linalg;
pub mod machines;
pub mod math;
pub mod qstate;
pub mod rng;
pub mod sectors;
pub mod thermo;

pub use error::{Error, Result};
