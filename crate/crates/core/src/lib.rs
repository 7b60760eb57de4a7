//! Single-photon cavity optomechanics.
//!
//! Exact open dynamics of a photon exchanged between a travelling-wave continuum
//! and a cavity whose end mirror is a quantum harmonic oscillator, the fringe
//! visibility of a Michelson interferometer built from two such cavities, and
//! conditional preparation of mirror states by post-selecting photon arrival
//! times.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod feasibility;
pub mod fock;
pub mod interferometer;
pub mod prep;
pub mod quadrature;
pub mod sweep;
pub mod table;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
