//! Finite-volume solvers for the macroscopic, intermediate and inviscid
//! equations, with entropy and moment audits.

mod audit;
mod diagnostics;
mod regularization;
mod solver;

pub use audit::{
    evolve, run_entropy_audit, sigma_continuation, step_count, weak_probe_battery, AuditReport, ContinuationLevel,
    ContinuationReport, ContinuationSetup,
};
pub use diagnostics::{write_diagnostics_csv, DiagnosticsRecord, DIAGNOSTICS_HEADER};
pub use regularization::{regularization_gaps, RegularizationGap};
pub use solver::{Equation, Nonlinearity, PdeSolver, PdeState, TransportScheme};
