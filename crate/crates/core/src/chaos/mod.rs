//! Verification harness for the mean-field limit: pathwise error
//! functionals of the coupled systems, the `(β, ζ)` schedule in `N`,
//! distances to the limit density and log-log rate fits.

mod errors;
mod fit;
mod metrics;
mod schedule;

pub use errors::{measure_errors, pathwise_gaps, run_coupled, Coupling, CouplingConfig, CouplingRun, ErrorFunctionals};
pub use fit::{rate_fit, RateFit};
pub use metrics::{chaos_metrics, iid_floor, ChaosMetrics, PairDefects, PAIR_BINS_PER_AXIS, SLICE_DIRECTIONS};
pub use schedule::Schedule;
