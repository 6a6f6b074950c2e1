//! Exact finite-field Fourier analysis of trace functions, the amplifier
//! family built from them, complete character sums, bilinear Fourier bounds,
//! and symmetric-square Hecke coefficients, at desk scale.

pub mod error;
pub mod modarith;
pub mod periodic;
pub mod amplifier;
pub mod bilinear;
pub mod charsums;
pub mod heckecoef;
pub mod sums;
pub mod tracefn;

pub use error::{Error, Result};
