//! The coupled particle systems: microscopic (kernel density drift),
//! intermediate and macroscopic (drifts read off PDE solutions), all moved
//! by one Euler–Maruyama step with shared counter-based noise.

mod drift;
mod ensemble;
mod rng;
mod sampling;

pub use drift::{check_inside, drift_from_density, gather, DensityDrift, DriftMode, MicroDrift};
pub use ensemble::{em_update, read_positions, write_positions, CoupledEnsemble, System};
pub use rng::{fill_gaussians, uniform, RngSpec, StreamTag};
pub use sampling::{sample_initial, CellSampler};
