use std::f64::consts::PI;

use super::profiles::{origin_index, plateau, Mollifier};
use crate::error::{domain, Error, Result};
use crate::spectral::{norm, norm2, Field, Grid, Point};

/// Closed-form initial densities.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialShape {
    /// Centred Gaussian of unit mass with the given standard deviation.
    Gaussian { std: f64 },
    /// Two unit-half-mass Gaussians centred at `±offset` on the first axis.
    DoubleBump { offset: f64, std: f64 },
    /// Smooth radial plateau of unit height, flat on `|x| ≤ radius`, zero
    /// beyond `2 radius`.
    Plateau { radius: f64 },
    /// Spatially constant density (a stationary state of the periodic problem).
    Constant { value: f64 },
}

impl InitialShape {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialShape::Gaussian { std } => std > 0.0,
            InitialShape::DoubleBump { std, offset } => std > 0.0 && offset.is_finite(),
            InitialShape::Plateau { radius } => radius > 0.0,
            InitialShape::Constant { value } => value >= 0.0,
        };
        if !ok {
            return domain(format!("inadmissible initial shape {self:?}"));
        }
        Ok(())
    }

    pub fn density(&self, x: &Point, d: usize) -> f64 {
        let gauss = |r2: f64, std: f64| (-r2 / (2.0 * std * std)).exp() / (2.0 * PI * std * std).powf(d as f64 / 2.0);
        match *self {
            InitialShape::Gaussian { std } => gauss(norm2(x), std),
            InitialShape::DoubleBump { offset, std } => {
                let mut a = *x;
                let mut b = *x;
                a[0] -= offset;
                b[0] += offset;
                0.5 * (gauss(norm2(&a), std) + gauss(norm2(&b), std))
            }
            InitialShape::Plateau { radius } => plateau(norm(x) / radius),
            InitialShape::Constant { value } => value,
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        self.validate()?;
        let d = grid.dim();
        Ok(Field::from_fn(*grid, |p| self.density(p, d)))
    }
}

/// Raw initial density together with its regularisation
/// `ρ⁰_σ = κ_σ (W_σ * ρ⁰) Ξ(σ·)`.
#[derive(Clone, Debug)]
pub struct InitialDatum {
    pub rho0: Field,
    pub kappa: f64,
    pub rho0_sigma: Field,
    pub sigma: f64,
}

impl InitialDatum {
    /// Fraction of the mass of `ρ⁰` outside `[-L/2, L/2]^d`.
    pub fn margin_mass_fraction(&self) -> f64 {
        outer_mass_fraction(&self.rho0)
    }
}

/// Fraction of the mass of a density outside the central half box.
pub fn outer_mass_fraction(rho: &Field) -> f64 {
    let g = *rho.grid();
    let inner = 0.5 * g.half_length();
    let total = rho.integral();
    if total == 0.0 {
        return 0.0;
    }
    let outer: f64 = rho
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| g.point(*i)[..g.dim()].iter().any(|c| c.abs() > inner))
        .map(|(_, v)| v.abs())
        .sum::<f64>()
        * g.cell_volume();
    outer / total
}

/// Builds `ρ⁰_σ`. The mollification is a direct sum over the compact stencil
/// of `W_σ`, so a nonnegative `ρ⁰` gives a nonnegative result.
pub fn regularize_initial(rho0: &Field, sigma: f64) -> Result<InitialDatum> {
    let grid = *rho0.grid();
    if !(sigma > 0.0) {
        return domain(format!("regularisation needs σ > 0, got {sigma}"));
    }
    if rho0.values().iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return domain("initial density must be finite and nonnegative");
    }
    let kernel = Mollifier::new(grid.dim(), sigma)?.grid_field(&grid)?;
    let smoothed = stencil_convolve(rho0, &kernel)?;
    let mut cut = smoothed;
    for (i, v) in cut.values_mut().iter_mut().enumerate() {
        let p = grid.point(i);
        *v *= plateau(sigma * norm(&p));
    }
    let denom = cut.integral();
    if !(denom > 0.0) {
        return Err(Error::Degenerate("mollified and cut-off datum has zero mass".into()));
    }
    let kappa = rho0.integral() / denom;
    cut.scale(kappa);
    Ok(InitialDatum {
        rho0: rho0.clone(),
        kappa,
        rho0_sigma: cut,
        sigma,
    })
}

/// Periodic convolution with a compactly supported position-layout kernel,
/// summed directly over the kernel's nonzero nodes.
pub fn stencil_convolve(u: &Field, kernel: &Field) -> Result<Field> {
    let grid = *u.grid();
    grid.ensure_same(kernel.grid())?;
    let n = grid.n() as isize;
    let d = grid.dim();
    let centre = grid.multi_index(origin_index(&grid));
    let stencil: Vec<([isize; 3], f64)> = kernel
        .values()
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(i, &w)| {
            let idx = grid.multi_index(i);
            let mut off = [0isize; 3];
            for a in 0..d {
                off[a] = idx[a] as isize - centre[a] as isize;
            }
            (off, w * grid.cell_volume())
        })
        .collect();
    let vals = u.values();
    let out: Vec<f64> = (0..grid.len())
        .map(|i| {
            let idx = grid.multi_index(i);
            stencil
                .iter()
                .map(|(off, w)| {
                    let mut j = [0usize; 3];
                    for a in 0..d {
                        j[a] = (idx[a] as isize - off[a]).rem_euclid(n) as usize;
                    }
                    w * vals[grid.flat_index(&j)]
                })
                .sum()
        })
        .collect();
    Field::from_values(grid, out)
}
