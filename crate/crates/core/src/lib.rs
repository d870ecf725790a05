//! Control-theoretic simulation of trapped-ion qubit⊗oscillator systems.
//!
//! Coupling matrix elements of `exp(iη(a+a†))`, Laguerre-zero truncation of
//! the phonon ladder, coupling-graph connectivity, dynamical Lie algebra
//! controllability tests, resonant pulse propagation, and an evolutionary
//! pulse search for one- and two-ion targets.

pub mod connectivity;
pub mod controllability;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod quantum;
pub mod special;

pub use error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
