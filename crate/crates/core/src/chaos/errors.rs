use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::kernels::{
    regularize_initial, InitialShape, Mollifier, NonlinearityTable, ProblemParams, RawNonlinearity,
};
use crate::particles::{check_inside, em_update, CoupledEnsemble, DensityDrift, DriftMode, MicroDrift, RngSpec};
use crate::pde::{step_count, Equation, Nonlinearity, PdeSolver, PdeState, TransportScheme};
use crate::spectral::{Field, Grid, Spectral};

/// Where the intermediate and macroscopic drifts come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    /// Each system follows its own equation.
    Dynamics,
    /// All three systems are driven by the microscopic drift.
    Identical,
}

/// One coupled experiment: the three particle systems and the two PDEs
/// whose solutions drive the intermediate and macroscopic systems.
#[derive(Clone, Debug)]
pub struct CouplingConfig {
    pub params: ProblemParams,
    pub grid: Grid,
    pub raw: RawNonlinearity,
    pub initial: InitialShape,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub mode: DriftMode,
    pub coupling: Coupling,
    /// Also carry a leave-one-out microscopic system with the same noise and
    /// report its pathwise distance to the shared-field one.
    pub oracle: bool,
    pub table_size: usize,
    pub scheme: TransportScheme,
}

/// Replica means and standard errors of the running suprema
/// `sup_{s ≤ t} max_i |·|` of the pathwise differences.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorFunctionals {
    pub times: Vec<f64>,
    /// `X − X̄`.
    pub e1: Vec<f64>,
    /// `X̄ − X̂`.
    pub e2: Vec<f64>,
    /// `X − X̂`.
    pub e_total: Vec<f64>,
    pub e1_se: Vec<f64>,
    pub e2_se: Vec<f64>,
    pub e_total_se: Vec<f64>,
    pub replicas: usize,
    /// Final `[e1, e2, e_total]` of every replica.
    pub per_replica: Vec<[f64; 3]>,
    pub mode: DriftMode,
    /// Mean and standard error of the shared-field vs leave-one-out gap.
    pub oracle_gap: Option<(f64, f64)>,
}

impl ErrorFunctionals {
    fn last(v: &[f64]) -> f64 {
        *v.last().expect("at least the initial sample")
    }

    pub fn final_e1(&self) -> (f64, f64) {
        (Self::last(&self.e1), Self::last(&self.e1_se))
    }

    pub fn final_e2(&self) -> (f64, f64) {
        (Self::last(&self.e2), Self::last(&self.e2_se))
    }

    pub fn final_total(&self) -> (f64, f64) {
        (Self::last(&self.e_total), Self::last(&self.e_total_se))
    }
}

/// Everything a coupled run produces.
#[derive(Clone, Debug)]
pub struct CouplingRun {
    pub functionals: ErrorFunctionals,
    pub ensembles: Vec<CoupledEnsemble>,
    /// `ρ̄(T)` (absent under [`Coupling::Identical`]).
    pub intermediate: Option<Field>,
    /// `ρ(T)` of the macro equation (absent under [`Coupling::Identical`]).
    pub macro_density: Option<Field>,
    /// `ρ⁰_σ`.
    pub initial: Field,
}

struct Replica {
    ensemble: CoupledEnsemble,
    exact: Option<Vec<f64>>,
    sup: [f64; 3],
    gap: f64,
}

fn max_distance(a: &[f64], b: &[f64], d: usize) -> f64 {
    a.par_chunks(d)
        .zip(b.par_chunks(d))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
        .reduce(|| 0.0, f64::max)
}

/// `max_i |X − X̄|`, `max_i |X̄ − X̂|` and `max_i |X − X̂|` at the current step.
pub fn pathwise_gaps(ens: &CoupledEnsemble) -> [f64; 3] {
    let d = ens.dim();
    [
        max_distance(&ens.x, &ens.xbar, d),
        max_distance(&ens.xbar, &ens.xhat, d),
        max_distance(&ens.x, &ens.xhat, d),
    ]
}

fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `replicas` independent coupled simulations (replica `r` uses the
/// noise keyed by `(seed, r)`), advancing the two PDEs in lockstep.
pub fn run_coupled(config: &CouplingConfig, replicas: usize) -> Result<CouplingRun> {
    if replicas < 1 {
        return domain("need at least one replica");
    }
    let params = config.params;
    params.validate()?;
    if !(config.dt > 0.0 && config.horizon >= 0.0) {
        return domain("need dt > 0 and horizon ≥ 0");
    }
    let grid = config.grid;
    let d = grid.dim();
    let spectral = Spectral::new(grid);
    let rho0 = config.initial.sample(&grid)?;
    let datum = regularize_initial(&rho0, params.sigma)?;
    let kde_peak = Mollifier::new(d, params.beta)?.eval_r2(0.0);
    let u_max = 4.0 * datum.rho0_sigma.max().max(kde_peak) + 1.0;
    let table = Arc::new(NonlinearityTable::build(config.raw.clone(), params.sigma, u_max, config.table_size)?);
    let micro = MicroDrift::new(params, spectral.clone(), table.clone())?;

    let pdes = match config.coupling {
        Coupling::Dynamics => {
            let build = |which: Equation, p: ProblemParams| -> Result<(PdeSolver, PdeState)> {
                let solver = PdeSolver::new(which, p, spectral.clone(), Nonlinearity::Smoothed(table.clone()))?
                    .with_scheme(config.scheme);
                let state = PdeState::new(datum.rho0_sigma.clone(), p, which)?;
                Ok((solver, state))
            };
            let macro_params = ProblemParams { beta: 0.0, zeta: 0.0, ..params };
            Some((build(Equation::Intermediate, params)?, build(Equation::Macro, macro_params)?))
        }
        Coupling::Identical => None,
    };
    let (mut inter, mut macro_pde) = match pdes {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };

    let mut reps: Vec<Replica> = (0..replicas)
        .map(|r| {
            let ensemble = CoupledEnsemble::sample(&datum.rho0_sigma, params.n_particles, RngSpec::new(config.seed, r as u64))?;
            let exact = config.oracle.then(|| ensemble.x.clone());
            Ok(Replica {
                ensemble,
                exact,
                sup: [0.0; 3],
                gap: 0.0,
            })
        })
        .collect::<Result<_>>()?;

    let mut functionals = ErrorFunctionals {
        times: vec![0.0],
        e1: vec![0.0],
        e2: vec![0.0],
        e_total: vec![0.0],
        e1_se: vec![0.0],
        e2_se: vec![0.0],
        e_total_se: vec![0.0],
        replicas,
        per_replica: Vec::new(),
        mode: config.mode,
        oracle_gap: None,
    };

    let steps = step_count(config.horizon, config.dt);
    let tolerance = 0.5 * config.dt;
    let mut t = 0.0;
    for k in 0..steps {
        let target = if k + 1 == steps { config.horizon } else { (k + 1) as f64 * config.dt };
        let dt = target - t;
        let fields = match (&inter, &macro_pde) {
            (Some((si, st_i)), Some((sm, st_m))) => {
                Some((DensityDrift::from_state(si, st_i)?, DensityDrift::from_state(sm, st_m)?))
            }
            _ => None,
        };
        reps.par_iter_mut().try_for_each(|rep| -> Result<()> {
            let ens = &mut rep.ensemble;
            let now = ens.time();
            let v = micro.drift(&ens.x, config.mode, now)?;
            let (vbar, vhat) = match &fields {
                Some((fi, fm)) => (fi.gather(&ens.xbar, now, tolerance)?, fm.gather(&ens.xhat, now, tolerance)?),
                None => (v.clone(), v.clone()),
            };
            if let Some(x) = rep.exact.as_mut() {
                let ve = micro.drift(x, DriftMode::ExactPerParticle, now)?;
                em_update(x, &ve, d, dt, params.sigma, ens.rng(), ens.step_index());
                check_inside(&grid, x, now + dt)?;
            }
            ens.em_step([&v, &vbar, &vhat], dt, params.sigma, &grid)?;
            let current = pathwise_gaps(ens);
            for (s, c) in rep.sup.iter_mut().zip(current) {
                *s = s.max(c);
            }
            if let Some(x) = rep.exact.as_ref() {
                rep.gap = rep.gap.max(max_distance(&ens.x, x, d));
            }
            Ok(())
        })?;
        if let Some((solver, state)) = inter.as_mut() {
            *state = solver.step(state, dt)?;
        }
        if let Some((solver, state)) = macro_pde.as_mut() {
            *state = solver.step(state, dt)?;
        }
        t = target;
        functionals.times.push(t);
        for (idx, (mean, se)) in [
            (&mut functionals.e1, &mut functionals.e1_se),
            (&mut functionals.e2, &mut functionals.e2_se),
            (&mut functionals.e_total, &mut functionals.e_total_se),
        ]
        .into_iter()
        .enumerate()
        {
            let (m, s) = mean_se(reps.iter().map(|r| r.sup[idx]));
            mean.push(m);
            se.push(s);
        }
    }
    functionals.per_replica = reps.iter().map(|r| r.sup).collect();
    if config.oracle {
        functionals.oracle_gap = Some(mean_se(reps.iter().map(|r| r.gap)));
    }
    Ok(CouplingRun {
        functionals,
        ensembles: reps.into_iter().map(|r| r.ensemble).collect(),
        intermediate: inter.map(|(_, s)| s.rho),
        macro_density: macro_pde.map(|(_, s)| s.rho),
        initial: datum.rho0_sigma,
    })
}

/// Error functionals of [`run_coupled`]; at least four replicas.
pub fn measure_errors(config: &CouplingConfig, replicas: usize) -> Result<ErrorFunctionals> {
    if replicas < 4 {
        return domain(format!("need at least 4 replicas, got {replicas}"));
    }
    Ok(run_coupled(config, replicas)?.functionals)
}
