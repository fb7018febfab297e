//! The computations behind each subcommand and the properties they check.

use std::sync::Arc;

use fracpm::chaos::{chaos_metrics, iid_floor, rate_fit, run_coupled, CouplingConfig, ErrorFunctionals, RateFit};
use fracpm::kernels::{regularize_initial, InitialDatum, NonlinearityTable, ProblemParams, RawNonlinearity};
use fracpm::pde::{
    evolve, regularization_gaps, sigma_continuation, step_count, AuditReport, ContinuationReport,
    ContinuationSetup, Equation, Nonlinearity, PdeSolver, PdeState, RegularizationGap,
};
use fracpm::spectral::{Field, Grid, Spectral};
use fracpm::Result;

use crate::config::{ExperimentConfig, Resolved, SweepSection};
use crate::output::Check;

/// Largest density the smoothed nonlinearity table must cover.
fn table_ceiling(datum: &Field) -> f64 {
    4.0 * datum.max_abs() + 1.0
}

fn smoothed(raw: &RawNonlinearity, sigma: f64, datum: &Field, size: usize) -> Result<Nonlinearity> {
    let table = NonlinearityTable::build(raw.clone(), sigma, table_ceiling(datum), size)?;
    Ok(Nonlinearity::Smoothed(Arc::new(table)))
}

/// Raw and regularised datum of the configuration on `grid`.
pub fn datum_on(cfg: &ExperimentConfig, grid: Grid) -> Result<InitialDatum> {
    regularize_initial(&cfg.shape().sample(&grid)?, cfg.problem.sigma)
}

/// Result of `solve-pde`.
#[derive(Clone, Debug)]
pub struct PdeRun {
    pub audit: AuditReport,
    pub kappa: f64,
    pub snapshots: Vec<Field>,
}

/// Solves the configured equation from `ρ⁰_σ` with diagnostics at every step
/// and evenly spaced snapshots.
pub fn solve_pde(r: &Resolved, grid: Grid, dt: f64) -> Result<PdeRun> {
    let cfg = &r.config;
    let datum = datum_on(cfg, grid)?;
    let which = cfg.equation();
    let params = match which {
        Equation::Macro => ProblemParams { beta: 0.0, zeta: 0.0, ..cfg.params() },
        _ => cfg.params(),
    };
    let nl = smoothed(&r.raw, params.sigma, &datum.rho0_sigma, cfg.pde.table_size)?;
    let solver = PdeSolver::new(which, params, Spectral::new(grid), nl)?.with_scheme(cfg.scheme());
    let steps = step_count(cfg.horizon, dt);
    let every: Vec<usize> = (0..cfg.pde.snapshots)
        .map(|i| (i * steps + (cfg.pde.snapshots - 1) / 2) / (cfg.pde.snapshots - 1))
        .collect();
    let mut snapshots = Vec::new();
    let mut records = Vec::with_capacity(steps + 1);
    evolve(&solver, PdeState::new(datum.rho0_sigma.clone(), params, which)?, cfg.horizon, dt, |st| {
        if every.contains(&records.len()) {
            snapshots.push(st.rho.clone());
        }
        records.push(solver.diagnostics(st)?);
        Ok(())
    })?;
    let audit = AuditReport::from_records(records, Some(datum.kappa * datum.rho0.max()));
    Ok(PdeRun {
        audit,
        kappa: datum.kappa,
        snapshots,
    })
}

/// Conservation, sign, maximum-principle, L² and entropy properties.
pub fn pde_checks(a: &AuditReport) -> Vec<Check> {
    vec![
        Check::at_most("mass drift", a.mass_drift, 1e-11),
        Check::at_least("min density", a.min_density, -1e-13),
        Check::at_most("sup norm over bound", a.linf_max / a.linf_bound - 1.0, 1e-8),
        Check::at_most("L2 increase", a.l2_max_increase / a.records[0].l2, 1e-12),
        Check::at_most("relative entropy slack", a.relative_slack(), 1e-3),
    ]
}

/// One sweep of `regularization_gaps` with its rate fit.
#[derive(Clone, Debug)]
pub struct SweepRun {
    pub gaps: Vec<RegularizationGap>,
    pub fit: RateFit,
    pub window: [f64; 2],
}

fn sweep(r: &Resolved, sec: &SweepSection, beta_axis: bool) -> Result<SweepRun> {
    let cfg = &r.config;
    let grid = sec.grid(cfg.problem.d);
    let datum = datum_on(cfg, grid)?;
    let base = ProblemParams { s: sec.order(cfg), ..cfg.params() };
    let nl = smoothed(&r.raw, base.sigma, &datum.rho0_sigma, cfg.pde.table_size)?;
    let points: Vec<(f64, f64)> = sec
        .values
        .iter()
        .map(|&v| if beta_axis { (v, 0.0) } else { (0.0, v) })
        .collect();
    let gaps = regularization_gaps(
        &Spectral::new(grid),
        &datum.rho0_sigma,
        base,
        &nl,
        &points,
        cfg.horizon,
        cfg.dt,
        cfg.scheme(),
    )?;
    let ys: Vec<f64> = gaps.iter().map(|g| g.sup_linf).collect();
    let fit = rate_fit(&sec.values, &ys)?;
    Ok(SweepRun {
        gaps,
        fit,
        window: sec.slope_window,
    })
}

/// The β sweep (ζ = 0) and the ζ sweep (β = 0).
pub fn beta_zeta(r: &Resolved) -> Result<(SweepRun, SweepRun)> {
    Ok((sweep(r, &r.config.beta_sweep, true)?, sweep(r, &r.config.zeta_sweep, false)?))
}

pub fn sweep_checks(beta: &SweepRun, zeta: &SweepRun) -> Vec<Check> {
    vec![
        Check::within("beta slope", beta.fit.slope, beta.window),
        Check::within("zeta slope", zeta.fit.slope, zeta.window),
    ]
}

/// Chaos metrics averaged over replicas.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanMetrics {
    pub sliced_w1: f64,
    pub ks_max: f64,
    pub factorization: f64,
    pub reference: f64,
}

/// Everything measured at one `N` of the schedule.
#[derive(Clone, Debug)]
pub struct NPoint {
    pub n: usize,
    pub beta: f64,
    pub zeta: f64,
    pub functionals: ErrorFunctionals,
    pub metrics: Option<MeanMetrics>,
    pub floor: Option<MeanMetrics>,
}

fn mean_metrics<F>(replicas: usize, mut one: F) -> Result<MeanMetrics>
where
    F: FnMut(usize) -> Result<fracpm::chaos::ChaosMetrics>,
{
    let mut m = MeanMetrics::default();
    for r in 0..replicas {
        let c = one(r)?;
        let pairs = c.pairs.expect("pair order requested");
        m.sliced_w1 += c.sliced_w1;
        m.ks_max += c.ks.iter().cloned().fold(0.0, f64::max);
        m.factorization += pairs.factorization;
        m.reference += pairs.reference;
    }
    let k = replicas as f64;
    Ok(MeanMetrics {
        sliced_w1: m.sliced_w1 / k,
        ks_max: m.ks_max / k,
        factorization: m.factorization / k,
        reference: m.reference / k,
    })
}

/// Coupled runs along the schedule. The leave-one-out oracle runs at the
/// smallest `N` when configured; chaos metrics against `ρ_σ(T)` and their
/// i.i.d. floors are computed when `metrics` is set.
pub fn n_sweep(r: &Resolved, metrics: bool) -> Result<Vec<NPoint>> {
    let cfg = &r.config;
    let schedule = cfg.schedule();
    let first = *cfg.schedule.n_values.iter().min().expect("validated schedule");
    let seed = cfg.schedule.metric_seed;
    schedule
        .points()
        .into_iter()
        .map(|(n, beta, zeta)| {
            let config = CouplingConfig {
                params: ProblemParams::new(cfg.problem.d, cfg.problem.s, cfg.problem.sigma, beta, zeta, n)?,
                grid: cfg.grid(),
                raw: r.raw.clone(),
                initial: cfg.shape(),
                horizon: cfg.horizon,
                dt: cfg.dt,
                seed: cfg.seed,
                mode: cfg.mode(),
                coupling: cfg.coupling(),
                oracle: cfg.schedule.oracle && n == first,
                table_size: cfg.pde.table_size,
                scheme: cfg.scheme(),
            };
            log::info!("coupled run N = {n}, β = {beta:.4}, ζ = {zeta:.4}");
            let run = run_coupled(&config, cfg.replicas)?;
            let (metrics, floor) = match (metrics, &run.macro_density) {
                (true, Some(rho)) => (
                    Some(mean_metrics(cfg.replicas, |k| chaos_metrics(&run.ensembles[k].x, rho, 2, seed))?),
                    Some(mean_metrics(cfg.replicas, |k| iid_floor(rho, n, 2, seed + k as u64))?),
                ),
                (true, None) => {
                    return Err(fracpm::Error::Domain(
                        "chaos metrics need the macro density; use coupling = \"dynamics\"".into(),
                    ))
                }
                _ => (None, None),
            };
            Ok(NPoint {
                n,
                beta,
                zeta,
                functionals: run.functionals,
                metrics,
                floor,
            })
        })
        .collect()
}

/// Strict decrease of `E_total(T)` beyond two standard errors of each
/// difference, a negative fitted slope, and the oracle bias bound.
pub fn error_checks(points: &[NPoint]) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut worst = f64::INFINITY;
    for w in points.windows(2) {
        let (a, sa) = w[0].functionals.final_total();
        let (b, sb) = w[1].functionals.final_total();
        worst = worst.min((a - b) / (sa * sa + sb * sb).sqrt());
    }
    checks.push(Check::at_least("E_total decrease in standard errors", worst, 2.0));
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.functionals.final_total().0).collect();
    let slope = rate_fit(&xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN);
    checks.push(Check::new("E_total slope", slope, "< 0", slope < 0.0));
    if let Some(p) = points.iter().find(|p| p.functionals.oracle_gap.is_some()) {
        let (gap, _) = p.functionals.oracle_gap.expect("checked");
        checks.push(Check::at_most("shared-field bias over E_total", gap / p.functionals.final_total().0, 0.1));
    }
    checks
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Strict decrease of sliced W1, decrease of the pair defect, and the pair
/// defect within 3× of the i.i.d. floor at the largest `N`.
pub fn chaos_checks(points: &[NPoint]) -> Vec<Check> {
    let m: Vec<MeanMetrics> = points.iter().filter_map(|p| p.metrics).collect();
    let f: Vec<MeanMetrics> = points.iter().filter_map(|p| p.floor).collect();
    if m.len() != points.len() || m.is_empty() {
        return vec![Check::new("chaos metrics present", 0.0, "all N", false)];
    }
    let w1: Vec<f64> = m.iter().map(|x| x.sliced_w1).collect();
    let fac: Vec<f64> = m.iter().map(|x| x.factorization).collect();
    let last = m.len() - 1;
    vec![
        Check::new("sliced W1 decreasing", w1[last], "strictly decreasing", strictly_decreasing(&w1)),
        Check::new("pair defect decreasing", fac[last], "strictly decreasing", strictly_decreasing(&fac)),
        Check::at_most("pair defect over i.i.d. floor", m[last].factorization / f[last].factorization, 3.0),
    ]
}

/// Macro-equation continuation over the configured viscosities.
pub fn sigma_limit(r: &Resolved) -> Result<ContinuationReport> {
    let cfg = &r.config;
    let grid = cfg.grid();
    let rho0 = cfg.shape().sample(&grid)?;
    let setup = ContinuationSetup {
        s: cfg.problem.s,
        raw: r.raw.clone(),
        horizon: cfg.horizon,
        dt: cfg.dt,
        table_size: cfg.pde.table_size,
        scheme: cfg.scheme(),
        include_limit: cfg.continuation.include_limit,
    };
    sigma_continuation(&Spectral::new(grid), &rho0, &cfg.continuation.sigmas, &setup)
}

/// Monotone L¹ and weak gaps, `κ_σ` monotone toward 1, identical masses.
/// Only the viscous levels enter.
pub fn continuation_checks(report: &ContinuationReport) -> Vec<Check> {
    let viscous = ContinuationReport {
        levels: report.levels.iter().filter(|l| l.sigma > 0.0).cloned().collect(),
    };
    let l1 = viscous.l1_gaps();
    let weak = viscous.weak_gaps();
    let kappa: Vec<f64> = viscous.levels.iter().map(|l| (l.kappa - 1.0).abs()).collect();
    let masses: Vec<f64> = viscous.levels.iter().map(|l| l.final_record.mass).collect();
    let m0 = masses[0];
    let mass_spread = masses.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0.abs();
    vec![
        Check::new("L1 gaps decreasing", *l1.last().unwrap_or(&f64::NAN), "strictly decreasing", strictly_decreasing(&l1)),
        Check::new("kappa toward 1", *kappa.last().unwrap_or(&f64::NAN), "|κ − 1| nonincreasing", kappa.windows(2).all(|w| w[1] <= w[0])),
        Check::at_most("mass spread across sigma", mass_spread, 1e-11),
        Check::new("weak gaps decreasing", *weak.last().unwrap_or(&f64::NAN), "strictly decreasing", strictly_decreasing(&weak)),
    ]
}
