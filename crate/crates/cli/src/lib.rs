//! Experiment runner: binds a configuration file to the library and writes
//! CSV tables, binary field snapshots and a manifest into one directory.

pub mod battery;
pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::Result;
use fracpm::spectral::io::write_binary;
use fracpm::pde::{write_diagnostics_csv, ContinuationReport};

use config::{ExperimentConfig, Resolved};
use experiments::{NPoint, SweepRun};
use output::{all_pass, num, Check, OutDir};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    VerifyOperators,
    SolvePde,
    ConvergeBetaZeta,
    ConvergeN,
    ChaosTest,
    SigmaLimit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyOperators => "verify-operators",
            Command::SolvePde => "solve-pde",
            Command::ConvergeBetaZeta => "converge-beta-zeta",
            Command::ConvergeN => "converge-n",
            Command::ChaosTest => "chaos-test",
            Command::SigmaLimit => "sigma-limit",
        }
    }
}

/// Command-line options after parsing.
#[derive(Clone, Debug)]
pub struct Options {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub strict: bool,
}

/// Loads, overrides and validates the configuration.
pub fn prepare(opts: &Options) -> std::result::Result<Resolved, config::ConfigError> {
    let (mut cfg, base) = match &opts.config {
        Some(path) => (
            ExperimentConfig::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    cfg.kind = Some(opts.command.name().to_string());
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output = out.clone();
    }
    if opts.threads == Some(0) {
        return Err(config::ConfigError("--threads must be ≥ 1".into()));
    }
    cfg.resolve(&base)
}

/// Runs one subcommand and returns the process exit code.
pub fn run(opts: &Options) -> i32 {
    let resolved = match prepare(opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = opts.threads {
        builder = builder.num_threads(k);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start worker pool: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| execute(opts.command, &resolved)) {
        Ok(checks) => {
            for c in &checks {
                println!("{} {}: {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, num(c.value), c.threshold);
            }
            if opts.strict && !all_pass(&checks) {
                EXIT_ACCEPTANCE
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("runtime error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

/// Runs the subcommand, writes its outputs and returns its checks.
pub fn execute(command: Command, r: &Resolved) -> Result<Vec<Check>> {
    let cfg = &r.config;
    let mut out = OutDir::create(&cfg.output)?;
    let checks = match command {
        Command::VerifyOperators => {
            let b = battery::operator_battery()?;
            write_battery(&mut out, &b)?;
            b.checks
        }
        Command::SolvePde => {
            let run = experiments::solve_pde(r, cfg.grid(), cfg.dt)?;
            out.write("diagnostics.csv", |w| Ok(write_diagnostics_csv(&run.audit.records, w)?))?;
            for (i, snap) in run.snapshots.iter().enumerate() {
                out.write(&format!("snapshot_{i:03}.bin"), |w| Ok(write_binary(snap, w)?))?;
            }
            let a = &run.audit;
            let rows = vec![
                vec!["kappa".into(), num(run.kappa)],
                vec!["entropy_initial".into(), num(a.entropy_initial)],
                vec!["entropy_final".into(), num(a.entropy_final)],
                vec!["dissipated".into(), num(a.dissipated)],
                vec!["entropy_slack".into(), num(a.entropy_slack)],
                vec!["moment_excess".into(), num(a.moment_excess)],
            ];
            out.csv("summary.csv", &["quantity", "value"], &rows)?;
            experiments::pde_checks(a)
        }
        Command::ConvergeBetaZeta => {
            let (beta, zeta) = experiments::beta_zeta(r)?;
            write_sweeps(&mut out, &beta, &zeta)?;
            experiments::sweep_checks(&beta, &zeta)
        }
        Command::ConvergeN => {
            let points = experiments::n_sweep(r, false)?;
            write_errors(&mut out, &points)?;
            experiments::error_checks(&points)
        }
        Command::ChaosTest => {
            let points = experiments::n_sweep(r, true)?;
            write_chaos(&mut out, &points)?;
            experiments::chaos_checks(&points)
        }
        Command::SigmaLimit => {
            let report = experiments::sigma_limit(r)?;
            write_continuation(&mut out, &report)?;
            experiments::continuation_checks(&report)
        }
    };
    out.checks(&checks)?;
    out.manifest(command.name(), r)?;
    Ok(checks)
}

fn write_battery(out: &mut OutDir, b: &battery::Battery) -> Result<()> {
    let mut rows = Vec::new();
    for (f, per_p) in b.mollifier.iter().enumerate() {
        for (p, ratios) in [1, 2, 4].iter().zip(per_p) {
            for (beta, r) in battery::MOLLIFIER_WIDTHS.iter().zip(ratios) {
                rows.push(vec![f.to_string(), p.to_string(), num(*beta), num(*r)]);
            }
        }
    }
    out.csv("mollifier.csv", &["field", "p", "beta", "ratio"], &rows)?;
    let mut rows = Vec::new();
    for (name, ratios) in &b.probes {
        for (radius, r) in battery::PROBE_RADII.iter().zip(ratios) {
            rows.push(vec![name.clone(), num(*radius), num(*r)]);
        }
    }
    out.csv("probes.csv", &["inequality", "radius", "ratio"], &rows)
}

fn fit_row(name: &str, fit: &fracpm::chaos::RateFit) -> Vec<String> {
    vec![name.into(), num(fit.slope), num(fit.slope_half_width), num(fit.intercept), num(fit.r2)]
}

const RATE_HEADER: [&str; 5] = ["quantity", "slope", "slope_half_width", "intercept", "r2"];

fn write_sweeps(out: &mut OutDir, beta: &SweepRun, zeta: &SweepRun) -> Result<()> {
    let mut rows = Vec::new();
    for (name, run) in [("beta", beta), ("zeta", zeta)] {
        for g in &run.gaps {
            rows.push(vec![name.into(), num(g.beta), num(g.zeta), num(g.sup_linf), num(g.final_l1)]);
        }
    }
    out.csv("gaps.csv", &["sweep", "beta", "zeta", "sup_linf", "final_l1"], &rows)?;
    let rows = vec![fit_row("beta", &beta.fit), fit_row("zeta", &zeta.fit)];
    out.csv("rates.csv", &RATE_HEADER, &rows)
}

fn write_errors(out: &mut OutDir, points: &[NPoint]) -> Result<()> {
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for p in points {
        let f = &p.functionals;
        let (e1, s1) = f.final_e1();
        let (e2, s2) = f.final_e2();
        let (et, st) = f.final_total();
        let gap = f.oracle_gap.map(|g| num(g.0)).unwrap_or_default();
        let mode = format!("{:?}", f.mode);
        rows.push(vec![
            p.n.to_string(),
            num(p.beta),
            num(p.zeta),
            num(e1),
            num(s1),
            num(e2),
            num(s2),
            num(et),
            num(st),
            gap,
            mode,
        ]);
        for i in 0..f.times.len() {
            series.push(vec![p.n.to_string(), num(f.times[i]), num(f.e1[i]), num(f.e2[i]), num(f.e_total[i])]);
        }
    }
    out.csv(
        "errors.csv",
        &["n", "beta", "zeta", "e1", "e1_se", "e2", "e2_se", "e_total", "e_total_se", "oracle_gap", "mode"],
        &rows,
    )?;
    out.csv("error_series.csv", &["n", "t", "e1", "e2", "e_total"], &series)?;
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let mut rates = Vec::new();
    for (name, pick) in [
        ("e1", ErrorPick::E1),
        ("e2", ErrorPick::E2),
        ("e_total", ErrorPick::Total),
    ] {
        let ys: Vec<f64> = points.iter().map(|p| pick.get(p)).collect();
        if let Ok(fit) = fracpm::chaos::rate_fit(&xs, &ys) {
            rates.push(fit_row(name, &fit));
        }
    }
    out.csv("rates.csv", &RATE_HEADER, &rates)
}

#[derive(Clone, Copy)]
enum ErrorPick {
    E1,
    E2,
    Total,
}

impl ErrorPick {
    fn get(self, p: &NPoint) -> f64 {
        let f = &p.functionals;
        match self {
            ErrorPick::E1 => f.final_e1().0,
            ErrorPick::E2 => f.final_e2().0,
            ErrorPick::Total => f.final_total().0,
        }
    }
}

fn write_chaos(out: &mut OutDir, points: &[NPoint]) -> Result<()> {
    let mut rows = Vec::new();
    for p in points {
        let (m, f) = (p.metrics.unwrap_or_default(), p.floor.unwrap_or_default());
        rows.push(vec![
            p.n.to_string(),
            num(p.beta),
            num(p.zeta),
            num(m.sliced_w1),
            num(m.ks_max),
            num(m.factorization),
            num(m.reference),
            num(f.sliced_w1),
            num(f.factorization),
            num(f.reference),
        ]);
    }
    out.csv(
        "chaos.csv",
        &[
            "n",
            "beta",
            "zeta",
            "sliced_w1",
            "ks_max",
            "pair_factorization",
            "pair_reference",
            "iid_sliced_w1",
            "iid_pair_factorization",
            "iid_pair_reference",
        ],
        &rows,
    )?;
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.metrics.unwrap_or_default().sliced_w1).collect();
    let rates = match fracpm::chaos::rate_fit(&xs, &ys) {
        Ok(fit) => vec![fit_row("sliced_w1", &fit)],
        Err(_) => Vec::new(),
    };
    out.csv("rates.csv", &RATE_HEADER, &rates)
}

fn write_continuation(out: &mut OutDir, report: &ContinuationReport) -> Result<()> {
    let l1 = report.l1_gaps();
    let weak = report.weak_gaps();
    let rows: Vec<Vec<String>> = report
        .levels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            vec![
                num(l.sigma),
                num(l.kappa),
                num(l.final_record.mass),
                num(l.final_record.entropy),
                l1.get(i).map(|v| num(*v)).unwrap_or_default(),
                weak.get(i).map(|v| num(*v)).unwrap_or_default(),
            ]
        })
        .collect();
    out.csv(
        "continuation.csv",
        &["sigma", "kappa", "mass", "entropy", "l1_gap_to_next", "weak_gap_to_next"],
        &rows,
    )?;
    for (i, l) in report.levels.iter().enumerate() {
        out.write(&format!("final_{i:02}.bin"), |w| Ok(write_binary(&l.final_density, w)?))?;
    }
    Ok(())
}
