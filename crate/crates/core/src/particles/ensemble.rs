use std::io::{Read, Write};

use rayon::prelude::*;

use super::drift::check_inside;
use super::rng::RngSpec;
use super::sampling::sample_initial;
use crate::error::{domain, Error, Result};
use crate::spectral::io::csv_err;
use crate::spectral::{Field, Grid};

/// The three particle systems driven by the same initial positions and the
/// same Brownian increments: microscopic `X`, intermediate `X̄`, macroscopic `X̂`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledEnsemble {
    n: usize,
    d: usize,
    pub x: Vec<f64>,
    pub xbar: Vec<f64>,
    pub xhat: Vec<f64>,
    rng: RngSpec,
    step: u64,
    t: f64,
}

/// Which of the three systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum System {
    Micro,
    Intermediate,
    Macro,
}

impl CoupledEnsemble {
    /// All three systems start at the same `n` i.i.d. draws from `rho0`.
    pub fn sample(rho0: &Field, n: usize, rng: RngSpec) -> Result<Self> {
        if n < 2 {
            return domain(format!("need at least 2 particles, got {n}"));
        }
        let x = sample_initial(rho0, n, &rng)?;
        Self::from_positions(x, rho0.grid().dim(), rng)
    }

    pub fn from_positions(x: Vec<f64>, d: usize, rng: RngSpec) -> Result<Self> {
        if d == 0 || !x.len().is_multiple_of(d) {
            return domain("positions must be a row-major N × d array");
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial positions".into()));
        }
        Ok(Self {
            n: x.len() / d,
            d,
            xbar: x.clone(),
            xhat: x.clone(),
            x,
            rng,
            step: 0,
            t: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn rng(&self) -> &RngSpec {
        &self.rng
    }

    pub fn positions(&self, which: System) -> &[f64] {
        match which {
            System::Micro => &self.x,
            System::Intermediate => &self.xbar,
            System::Macro => &self.xhat,
        }
    }

    /// Euler–Maruyama: each system moves by `drift·dt + √(2σ dt) G_i` with the
    /// same Gaussian vector `G_i` for particle `i` in all three systems.
    /// Drifts are row-major `N × d` in the order micro, intermediate, macro.
    pub fn em_step(&mut self, drifts: [&[f64]; 3], dt: f64, sigma: f64, grid: &Grid) -> Result<()> {
        if !(dt > 0.0) {
            return domain(format!("time step {dt} must be positive"));
        }
        if !(sigma >= 0.0) {
            return domain(format!("viscosity {sigma} must be ≥ 0"));
        }
        if drifts.iter().any(|v| v.len() != self.x.len()) {
            return domain("drift arrays must match the ensemble size");
        }
        let [dx, dbar, dhat] = drifts;
        em_update(&mut self.x, dx, self.d, dt, sigma, &self.rng, self.step);
        em_update(&mut self.xbar, dbar, self.d, dt, sigma, &self.rng, self.step);
        em_update(&mut self.xhat, dhat, self.d, dt, sigma, &self.rng, self.step);
        self.step += 1;
        self.t += dt;
        for which in [System::Micro, System::Intermediate, System::Macro] {
            check_inside(grid, self.positions(which), self.t)?;
        }
        Ok(())
    }

    /// Sets the clock, e.g. after a final partial step.
    pub fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    /// Applies a permutation of particle labels to all three systems.
    pub fn relabel(&mut self, perm: &[usize]) -> Result<()> {
        if perm.len() != self.n {
            return domain("permutation length differs from the ensemble size");
        }
        let d = self.d;
        let apply = |v: &Vec<f64>| -> Vec<f64> { perm.iter().flat_map(|&p| v[p * d..(p + 1) * d].to_vec()).collect() };
        self.x = apply(&self.x);
        self.xbar = apply(&self.xbar);
        self.xhat = apply(&self.xhat);
        Ok(())
    }

    /// CSV rows `particle, system, x0..` for the listed particles.
    pub fn write_trajectory_csv<W: Write>(&self, particles: &[usize], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "particle".into(), "system".into()];
        header.extend((0..self.d).map(|a| format!("x{a}")));
        w.write_record(&header).map_err(csv_err)?;
        for &p in particles {
            if p >= self.n {
                return domain(format!("particle {p} out of range"));
            }
            for (name, which) in [("micro", System::Micro), ("intermediate", System::Intermediate), ("macro", System::Macro)] {
                let mut row = vec![format!("{:e}", self.t), p.to_string(), name.to_string()];
                row.extend(self.positions(which)[p * self.d..(p + 1) * self.d].iter().map(|v| format!("{v:e}")));
                w.write_record(&row).map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One Euler–Maruyama step of a single system with the noise of
/// `(rng, particle, step)`; systems advanced with the same arguments receive
/// identical increments.
pub fn em_update(positions: &mut [f64], drift: &[f64], d: usize, dt: f64, sigma: f64, rng: &RngSpec, step: u64) {
    let amp = (2.0 * sigma * dt).sqrt();
    positions
        .par_chunks_mut(d)
        .zip(drift.par_chunks(d))
        .enumerate()
        .for_each(|(i, (x, v))| {
            let mut g = [0.0; 3];
            if amp > 0.0 {
                rng.gaussians(i as u64, step, &mut g[..d]);
            }
            for a in 0..d {
                x[a] += v[a] * dt + amp * g[a];
            }
        });
}

/// Binary dump: `N`, `d` as little-endian u64, then row-major f64 positions.
pub fn write_positions<W: Write>(positions: &[f64], d: usize, mut out: W) -> Result<()> {
    out.write_all(&((positions.len() / d) as u64).to_le_bytes())?;
    out.write_all(&(d as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * positions.len());
    for v in positions {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_positions<R: Read>(mut input: R) -> Result<(Vec<f64>, usize)> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let d = u64::from_le_bytes(word) as usize;
    let mut bytes = vec![0u8; 8 * n * d];
    input.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((values, d))
}
