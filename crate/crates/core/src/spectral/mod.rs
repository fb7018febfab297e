//! Periodic-box discretisation and fractional calculus by Fourier multipliers.

mod field;
mod grid;
pub mod io;
mod ops;
pub mod probes;
mod transform;

pub use field::{vector_lp_norm, Field};
pub use grid::{Grid, Point, MAX_DIM};
pub(crate) use grid::{norm, norm2};
pub use probes::{inequality_probe, Inequality, ProbeReport};
pub use transform::{KernelSpectrum, Spectral};
