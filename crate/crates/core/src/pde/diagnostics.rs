use std::io::Write;

use rayon::prelude::*;

use super::solver::{neighbour, Equation, PdeSolver, PdeState};
use crate::error::Result;
use crate::spectral::io::csv_err;
use crate::spectral::norm;

/// Scalar observables of one density snapshot.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub min: f64,
    pub linf: f64,
    pub l2: f64,
    pub entropy: f64,
    /// `σ ∫ f_σ'(ρ) |∇ρ|² / ρ`, discretised on faces as
    /// `σ Σ (ρ_{i+1} − ρ_i)(h'(ρ_{i+1}) − h'(ρ_i)) / h²`, the exact entropy
    /// dissipation of the discrete heat flow.
    pub dissipation_visc: f64,
    /// `∫ f_σ'(ρ) ∇ρ · ∇P`; for the macro equation `‖∇(-Δ)^{-s/2} f_σ(ρ)‖²`.
    pub dissipation_frac: f64,
    /// `∫ ρ |x|^m` with `m = 2d/(d-2s)`.
    pub moment_m: f64,
    /// Upper bound for `d/dt ∫ρ|x|^m` from the equation.
    pub moment_rate_bound: f64,
    /// `d/dt ‖ρ‖₂²` evaluated from the equation at this state.
    pub energy_l2_rate: f64,
}

impl DiagnosticsRecord {
    pub fn dissipation(&self) -> f64 {
        self.dissipation_visc + self.dissipation_frac
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.mass,
            self.min,
            self.linf,
            self.l2,
            self.entropy,
            self.dissipation_visc,
            self.dissipation_frac,
            self.moment_m,
            self.moment_rate_bound,
            self.energy_l2_rate,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

impl PdeSolver {
    pub fn diagnostics(&self, state: &PdeState) -> Result<DiagnosticsRecord> {
        let rho = &state.rho;
        let grid = *rho.grid();
        let d = grid.dim();
        let cell = grid.cell_volume();
        let spectral = self.spectral();
        let law = self.nonlinearity();
        let nu = self.viscosity();
        let m = state.params.m_moment();

        let grad = spectral.gradient(rho)?;
        let velocity = self.node_velocity(rho)?;
        let vals = rho.values();
        let h = grid.spacing();
        let slope: Vec<f64> = vals
            .par_iter()
            .map(|&u| law.entropy_derivative(u.max(f64::MIN_POSITIVE)))
            .collect();

        let (fisher, cross, grad_sq, transport) = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let u = vals[i];
                let g2: f64 = grad.iter().map(|g| g.values()[i].powi(2)).sum();
                let gv: f64 = grad.iter().zip(&velocity).map(|(g, v)| g.values()[i] * v.values()[i]).sum();
                let fp = law.derivative(u);
                let fisher: f64 = (0..d)
                    .map(|a| {
                        let j = neighbour(&grid, i, a, 1);
                        (vals[j] - u) * (slope[j] - slope[i])
                    })
                    .sum::<f64>()
                    / (h * h);
                (fisher, -fp * gv, g2, u * gv)
            })
            .reduce(|| (0.0, 0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3));

        let dissipation_frac = match state.which {
            Equation::Intermediate => cross * cell,
            Equation::Macro | Equation::Limit => {
                spectral.seminorm_sq(&law.apply(rho), 1.0 - state.params.s)?
            }
        };

        let (moment, rate_bound) = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let u = vals[i].max(0.0);
                let p = grid.point(i);
                let r = norm(&p);
                let speed = velocity.iter().map(|v| v.values()[i].powi(2)).sum::<f64>().sqrt();
                let diffusive = nu * m * (m + d as f64 - 2.0) * u * r.powf(m - 2.0);
                (u * r.powf(m), diffusive + m * u * r.powf(m - 1.0) * speed)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));

        let entropy: f64 = vals.par_iter().map(|&u| law.entropy(u)).sum::<f64>() * cell;

        Ok(DiagnosticsRecord {
            t: state.t,
            mass: rho.integral(),
            min: rho.min(),
            linf: rho.max_abs(),
            l2: rho.lp_norm(2.0),
            entropy,
            dissipation_visc: nu * fisher * cell,
            dissipation_frac,
            moment_m: moment * cell,
            moment_rate_bound: rate_bound * cell,
            energy_l2_rate: (-2.0 * nu * grad_sq + 2.0 * transport) * cell,
        })
    }
}

pub const DIAGNOSTICS_HEADER: [&str; 11] = [
    "t",
    "mass",
    "min",
    "linf",
    "l2",
    "entropy",
    "dissipation_visc",
    "dissipation_frac",
    "moment_m",
    "moment_rate_bound",
    "energy_l2_rate",
];

pub fn write_diagnostics_csv<W: Write>(records: &[DiagnosticsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DIAGNOSTICS_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record(
            [
                r.t,
                r.mass,
                r.min,
                r.linf,
                r.l2,
                r.entropy,
                r.dissipation_visc,
                r.dissipation_frac,
                r.moment_m,
                r.moment_rate_bound,
                r.energy_l2_rate,
            ]
            .iter()
            .map(|v| format!("{v:e}")),
        )
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
