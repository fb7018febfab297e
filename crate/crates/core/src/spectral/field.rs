use super::grid::{Grid, Point};
use crate::error::{Error, Result};

/// A real scalar sampled at every node of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn<F: Fn(&Point) -> f64>(grid: Grid, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Grid quadrature of the field, `sum(u) h^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &Field, f: F) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// `L^p` norm by grid quadrature; `p = f64::INFINITY` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, self.grid.cell_volume(), p)
    }

    /// Integral of `u(x) * phi(x)`.
    pub fn integrate_against<F: Fn(&Point) -> f64>(&self, phi: F) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| v * phi(&self.grid.point(i)))
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// Multilinear interpolation at an arbitrary point (periodic wrap).
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let n = g.n();
        let d = g.dim();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..d {
            let t = (g.wrap(x[a]) + g.half_length()) / h;
            let f = t.floor();
            base[a] = (f as isize).rem_euclid(n as isize) as usize;
            frac[a] = t - f;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                let i = (base[a] + bit) % n;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * n + i;
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }
}

pub(crate) fn lp_norm(values: &[f64], cell: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        values.iter().map(|v| v.abs()).sum::<f64>() * cell
    } else if p == 2.0 {
        (values.iter().map(|v| v * v).sum::<f64>() * cell).sqrt()
    } else {
        (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
    }
}

/// `L^p` norm of the Euclidean magnitude of a vector field.
pub fn vector_lp_norm(components: &[Field], p: f64) -> f64 {
    let grid = components[0].grid();
    let mags: Vec<f64> = (0..grid.len())
        .map(|i| {
            components
                .iter()
                .map(|c| c.values()[i] * c.values()[i])
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    lp_norm(&mags, grid.cell_volume(), p)
}
