use std::sync::Arc;

use super::diagnostics::DiagnosticsRecord;
use super::solver::{Equation, Nonlinearity, PdeSolver, PdeState, TransportScheme};
use crate::error::{domain, Result};
use crate::kernels::{regularize_initial, NonlinearityTable, ProblemParams, RawNonlinearity};
use crate::spectral::{Field, Point, Spectral};

/// Advances `state` to `horizon` with steps of at most `dt`, calling
/// `observe` on the initial state and after every step.
pub fn evolve<F>(solver: &PdeSolver, state: PdeState, horizon: f64, dt: f64, mut observe: F) -> Result<PdeState>
where
    F: FnMut(&PdeState) -> Result<()>,
{
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return domain(format!("need dt > 0 and horizon ≥ 0, got dt = {dt}, horizon = {horizon}"));
    }
    let steps = step_count(horizon, dt);
    let mut state = state;
    let start = state.t;
    observe(&state)?;
    for k in 0..steps {
        let target = if k + 1 == steps { start + horizon } else { start + (k + 1) as f64 * dt };
        let mut next = solver.step(&state, target - state.t)?;
        next.t = target;
        state = next;
        observe(&state)?;
    }
    Ok(state)
}

/// Number of steps of size at most `dt` covering `horizon`.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    (horizon / dt - 1e-9).ceil().max(0.0) as usize
}

/// Summary of the entropy, mass, maximum-principle and moment audits.
#[derive(Clone, Debug)]
pub struct AuditReport {
    pub records: Vec<DiagnosticsRecord>,
    pub entropy_initial: f64,
    pub entropy_final: f64,
    /// Trapezoidal `∫_0^T D dt` of the total dissipation.
    pub dissipated: f64,
    /// `H(T) + ∫_0^T D − H(0)`.
    pub entropy_slack: f64,
    /// Largest increase of `H` between consecutive records.
    pub entropy_max_increase: f64,
    pub mass_initial: f64,
    /// `max_t |M(t) − M(0)| / M(0)`.
    pub mass_drift: f64,
    pub min_density: f64,
    pub linf_bound: f64,
    pub linf_max: f64,
    /// Largest increase of `‖ρ‖₂` between consecutive records.
    pub l2_max_increase: f64,
    /// `max_t [M_m(t) − M_m(0) − ∫_0^t B]`, where `B` bounds the moment growth rate.
    pub moment_excess: f64,
}

impl AuditReport {
    pub fn relative_slack(&self) -> f64 {
        self.entropy_slack.abs() / self.entropy_initial.abs().max(f64::MIN_POSITIVE)
    }

    pub fn linf_ok(&self, rel_tol: f64) -> bool {
        self.linf_max <= self.linf_bound * (1.0 + rel_tol)
    }

    pub fn moment_ok(&self, tol: f64) -> bool {
        self.moment_excess <= tol * self.records[0].moment_m.max(1.0)
    }

    pub fn l2_ok(&self, tol: f64) -> bool {
        self.l2_max_increase <= tol * self.records[0].l2
    }
}

/// Evolves `initial` to `horizon`, recording diagnostics after every step.
/// `linf_bound` defaults to the initial maximum.
pub fn run_entropy_audit(
    solver: &PdeSolver,
    initial: PdeState,
    horizon: f64,
    dt: f64,
    linf_bound: Option<f64>,
) -> Result<AuditReport> {
    let mut records = Vec::with_capacity(step_count(horizon, dt) + 1);
    evolve(solver, initial, horizon, dt, |st| {
        records.push(solver.diagnostics(st)?);
        Ok(())
    })?;
    Ok(AuditReport::from_records(records, linf_bound))
}

impl AuditReport {
    /// Summarises per-step records, the first being the initial state.
    pub fn from_records(records: Vec<DiagnosticsRecord>, linf_bound: Option<f64>) -> AuditReport {
        let first = records[0];
        let last = *records.last().expect("at least the initial record");
        let mut dissipated = 0.0;
        let mut moment_budget = 0.0;
        let mut entropy_max_increase = f64::NEG_INFINITY;
        let mut l2_max_increase = f64::NEG_INFINITY;
        let mut moment_excess: f64 = 0.0;
        for w in records.windows(2) {
            let dt = w[1].t - w[0].t;
            dissipated += 0.5 * dt * (w[0].dissipation() + w[1].dissipation());
            moment_budget += 0.5 * dt * (w[0].moment_rate_bound + w[1].moment_rate_bound);
            entropy_max_increase = entropy_max_increase.max(w[1].entropy - w[0].entropy);
            l2_max_increase = l2_max_increase.max(w[1].l2 - w[0].l2);
            moment_excess = moment_excess.max(w[1].moment_m - first.moment_m - moment_budget);
        }
        let mass_drift = records
            .iter()
            .map(|r| (r.mass - first.mass).abs())
            .fold(0.0, f64::max)
            / first.mass.abs().max(f64::MIN_POSITIVE);
        AuditReport {
            entropy_initial: first.entropy,
            entropy_final: last.entropy,
            dissipated,
            entropy_slack: last.entropy + dissipated - first.entropy,
            entropy_max_increase: entropy_max_increase.max(0.0),
            mass_initial: first.mass,
            mass_drift,
            min_density: records.iter().map(|r| r.min).fold(f64::INFINITY, f64::min),
            linf_bound: linf_bound.unwrap_or(first.linf),
            linf_max: records.iter().map(|r| r.linf).fold(0.0, f64::max),
            l2_max_increase: l2_max_increase.max(0.0),
            moment_excess,
            records,
        }
    }
}

/// Bounded test functions used for weak-convergence probes.
pub fn weak_probe_battery() -> Vec<fn(&Point) -> f64> {
    fn gaussian(p: &Point) -> f64 {
        (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])).exp()
    }
    fn wave(p: &Point) -> f64 {
        p[0].cos() * (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / 4.0).exp()
    }
    fn odd(p: &Point) -> f64 {
        p[0] / (1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
    }
    fn step(p: &Point) -> f64 {
        (2.0 * (p[0] + p[1] + p[2])).tanh()
    }
    vec![gaussian, wave, odd, step]
}

/// One level of a vanishing-viscosity continuation.
#[derive(Clone, Debug)]
pub struct ContinuationLevel {
    /// Zero marks the inviscid run with the raw nonlinearity.
    pub sigma: f64,
    pub kappa: f64,
    pub final_density: Field,
    pub final_record: DiagnosticsRecord,
    /// `[step][probe]` values of `∫ρ φ`.
    pub probes: Vec<Vec<f64>>,
}

/// Continuation over decreasing viscosities.
#[derive(Clone, Debug)]
pub struct ContinuationReport {
    pub levels: Vec<ContinuationLevel>,
}

impl ContinuationReport {
    /// `‖ρ_i(T) − ρ_{i+1}(T)‖_{L¹}` for consecutive levels.
    pub fn l1_gaps(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| {
                w[0].final_density
                    .zip_with(&w[1].final_density, |a, b| (a - b).abs())
                    .expect("levels share a grid")
                    .integral()
            })
            .collect()
    }

    /// `sup_t max_φ |∫(ρ_i − ρ_{i+1}) φ|` for consecutive levels.
    pub fn weak_gaps(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| {
                w[0].probes
                    .iter()
                    .zip(&w[1].probes)
                    .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

/// Settings shared by all levels of a continuation.
#[derive(Clone, Debug)]
pub struct ContinuationSetup {
    pub s: f64,
    pub raw: RawNonlinearity,
    pub horizon: f64,
    pub dt: f64,
    pub table_size: usize,
    pub scheme: TransportScheme,
    /// Also run the inviscid equation from the raw datum.
    pub include_limit: bool,
}

/// Solves the macro equation from the regularised datum for each σ in
/// `sigmas`, and optionally the inviscid equation from `rho0` itself.
pub fn sigma_continuation(
    spectral: &Spectral,
    rho0: &Field,
    sigmas: &[f64],
    setup: &ContinuationSetup,
) -> Result<ContinuationReport> {
    let d = spectral.grid().dim();
    let battery = weak_probe_battery();
    let u_max = 4.0 * rho0.max_abs() + 1.0;
    let mut levels = Vec::new();
    let mut run = |solver: PdeSolver, state: PdeState, sigma: f64, kappa: f64| -> Result<()> {
        let mut probes = Vec::new();
        let last = evolve(&solver, state, setup.horizon, setup.dt, |st| {
            probes.push(battery.iter().map(|phi| st.rho.integrate_against(phi)).collect());
            Ok(())
        })?;
        let final_record = solver.diagnostics(&last)?;
        levels.push(ContinuationLevel {
            sigma,
            kappa,
            final_density: last.rho,
            final_record,
            probes,
        });
        Ok(())
    };
    for &sigma in sigmas {
        let params = ProblemParams::new(d, setup.s, sigma, 0.0, 0.0, 2)?;
        let table = NonlinearityTable::build(setup.raw.clone(), sigma, u_max, setup.table_size)?;
        let datum = regularize_initial(rho0, sigma)?;
        let solver = PdeSolver::new(Equation::Macro, params, spectral.clone(), Nonlinearity::Smoothed(Arc::new(table)))?
            .with_scheme(setup.scheme);
        let state = PdeState::new(datum.rho0_sigma, params, Equation::Macro)?;
        run(solver, state, sigma, datum.kappa)?;
    }
    if setup.include_limit {
        let params = ProblemParams::new(d, setup.s, 0.0, 0.0, 0.0, 2)?;
        let solver = PdeSolver::new(Equation::Limit, params, spectral.clone(), Nonlinearity::Raw(setup.raw.clone()))?
            .with_scheme(setup.scheme);
        let state = PdeState::new(rho0.clone(), params, Equation::Limit)?;
        run(solver, state, 0.0, 1.0)?;
    }
    Ok(ContinuationReport { levels })
}
