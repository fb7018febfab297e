use rayon::prelude::*;

use super::audit::evolve;
use super::solver::{Equation, Nonlinearity, PdeSolver, PdeState, TransportScheme};
use crate::error::{domain, Result};
use crate::kernels::ProblemParams;
use crate::spectral::{Field, Spectral};

/// Sup-in-time distance between the intermediate equation at one `(β, ζ)`
/// and the macro equation from the same datum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularizationGap {
    pub beta: f64,
    pub zeta: f64,
    /// `sup_{t ≤ T} ‖ρ_{β,ζ}(t) − ρ(t)‖_∞`.
    pub sup_linf: f64,
    /// `‖ρ_{β,ζ}(T) − ρ(T)‖_{L¹}`.
    pub final_l1: f64,
}

/// Solves the macro equation once, then the intermediate equation for each
/// `(β, ζ)` in `points`, and measures the gaps on the common time grid.
/// `base` supplies `d`, `s` and `σ`; its `β` and `ζ` are ignored.
#[allow(clippy::too_many_arguments)]
pub fn regularization_gaps(
    spectral: &Spectral,
    rho0: &Field,
    base: ProblemParams,
    nonlinearity: &Nonlinearity,
    points: &[(f64, f64)],
    horizon: f64,
    dt: f64,
    scheme: TransportScheme,
) -> Result<Vec<RegularizationGap>> {
    if points.is_empty() {
        return domain("no (β, ζ) points to measure");
    }
    let macro_params = ProblemParams { beta: 0.0, zeta: 0.0, ..base };
    let solver = PdeSolver::new(Equation::Macro, macro_params, spectral.clone(), nonlinearity.clone())?
        .with_scheme(scheme);
    let mut reference = Vec::new();
    evolve(&solver, PdeState::new(rho0.clone(), macro_params, Equation::Macro)?, horizon, dt, |st| {
        reference.push(st.rho.clone());
        Ok(())
    })?;
    points
        .par_iter()
        .map(|&(beta, zeta)| {
            let params = ProblemParams { beta, zeta, ..base };
            let solver = PdeSolver::new(Equation::Intermediate, params, spectral.clone(), nonlinearity.clone())?
                .with_scheme(scheme);
            let mut k = 0;
            let mut sup_linf: f64 = 0.0;
            let last = evolve(&solver, PdeState::new(rho0.clone(), params, Equation::Intermediate)?, horizon, dt, |st| {
                let gap = st.rho.zip_with(&reference[k], |a, b| a - b)?.max_abs();
                sup_linf = sup_linf.max(gap);
                k += 1;
                Ok(())
            })?;
            let final_l1 = last
                .rho
                .zip_with(reference.last().expect("initial sample"), |a, b| (a - b).abs())?
                .integral();
            Ok(RegularizationGap { beta, zeta, sup_linf, final_l1 })
        })
        .collect()
}
