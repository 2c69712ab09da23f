//! Wave packet decompositions on periodic grids.
//!
//! The crate is organised bottom-up: [`grid`] holds the periodic box and its
//! unitary Fourier transform, [`spectral`] the operators, windows and
//! functional calculus, [`critical`] the critical radius and cube partition,
//! [`packets`] the analysis/synthesis maps, [`norms`] the phase-space norms
//! and [`verify`] the experiment harness.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod critical;
pub mod error;
pub mod grid;
pub mod io;
pub mod norms;
pub mod packets;
mod par;
pub mod quad;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use num_complex::Complex64 as C64;
