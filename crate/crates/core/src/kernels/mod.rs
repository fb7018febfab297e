//! Regularised objects: Riesz constants, mollifiers and cutoffs, the
//! regularised kernel `K_ζ`, the smoothed nonlinearity `f_σ` and the
//! regularised initial datum.

mod initial;
mod kernel;
mod nonlinearity;
mod params;
mod profiles;
mod riesz;

pub use initial::{outer_mass_fraction, regularize_initial, stencil_convolve, InitialDatum, InitialShape};
pub use kernel::{truncated_kernel, RegularizedKernel};
pub use nonlinearity::{NonlinearityTable, RawNonlinearity, DEFAULT_TABLE_SIZE};
pub use params::ProblemParams;
pub use profiles::{
    bump, bump_1d, bump_1d_cdf, bump_mass, origin_index, plateau, Cutoff, Mollifier,
};
pub use riesz::{riesz_constant, RieszConstants, RieszKind};
