//! Radial profiles: the bump mollifier, the kernel cutoff ramp and the
//! smooth plateau.

use std::sync::OnceLock;

use crate::error::{domain, Result};
use crate::quadrature::{unit_sphere_area, GaussLegendre};
use crate::spectral::{norm2, Field, Grid, MAX_DIM};

/// Unnormalised bump `exp(-1/(1-r²))` on the unit ball, as a function of `r²`.
#[inline]
pub fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// `∫_{B_1} bump` in dimension `d`.
pub fn bump_mass(d: usize) -> f64 {
    static MASS: OnceLock<[f64; MAX_DIM]> = OnceLock::new();
    MASS.get_or_init(|| {
        let gl = GaussLegendre::new(32);
        let mut out = [0.0; MAX_DIM];
        for (k, m) in out.iter_mut().enumerate() {
            let dim = k + 1;
            let radial = gl.integrate_composite(0.0, 1.0, 64, |r| r.powi(dim as i32 - 1) * bump(r * r));
            *m = unit_sphere_area(dim) * radial;
        }
        out
    })[d - 1]
}

/// Normalised one-dimensional bump on `[-1, 1]`.
#[inline]
pub fn bump_1d(t: f64) -> f64 {
    bump(t * t) / bump_mass(1)
}

/// Derivative of [`bump_1d`].
#[inline]
pub fn bump_1d_derivative(t: f64) -> f64 {
    let q = 1.0 - t * t;
    if q <= 0.0 {
        0.0
    } else {
        -2.0 * t / (q * q) * bump_1d(t)
    }
}

const CDF_INTERVALS: usize = 4096;

/// Cumulative distribution of [`bump_1d`], by cubic Hermite interpolation of
/// a precomputed table (the density itself supplies the slopes).
pub fn bump_1d_cdf(t: f64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let table = TABLE.get_or_init(|| {
        let gl = GaussLegendre::new(16);
        let h = 2.0 / CDF_INTERVALS as f64;
        let mut cdf = Vec::with_capacity(CDF_INTERVALS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in 0..CDF_INTERVALS {
            let a = -1.0 + k as f64 * h;
            acc += gl.integrate(a, a + h, bump_1d);
            cdf.push(acc);
        }
        cdf.iter_mut().for_each(|v| *v /= acc);
        cdf
    });
    let h = 2.0 / CDF_INTERVALS as f64;
    let x = (t + 1.0) / h;
    let k = (x as usize).min(CDF_INTERVALS - 1);
    let u = x - k as f64;
    let a = -1.0 + k as f64 * h;
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * table[k]
        + (u3 - 2.0 * u2 + u) * h * bump_1d(a)
        + (-2.0 * u3 + 3.0 * u2) * table[k + 1]
        + (u3 - u2) * h * bump_1d(a + h)
}

/// Smooth radial plateau: 1 on `r ≤ 1`, 0 on `r ≥ 2`, monotone in between.
pub fn plateau(r: f64) -> f64 {
    1.0 - bump_1d_cdf(2.0 * r - 3.0)
}

/// Derivative of [`plateau`] in `r`.
pub fn plateau_derivative(r: f64) -> f64 {
    -2.0 * bump_1d(2.0 * r - 3.0)
}

/// Scaled bump `W_h(x) = h^{-d} W_1(x/h)` with `∫ W_1 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mollifier {
    d: usize,
    width: f64,
}

impl Mollifier {
    pub fn new(d: usize, width: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return domain(format!("mollifier dimension {d} not in 1..=3"));
        }
        if !(width > 0.0 && width.is_finite()) {
            return domain(format!("mollifier width {width} must be positive"));
        }
        Ok(Self { d, width })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `W_1(0)` of the normalised profile.
    pub fn profile_at_origin(&self) -> f64 {
        bump(0.0) / bump_mass(self.d)
    }

    /// `h^{-d} W_1(x/h)` at a point given by its squared norm.
    #[inline]
    pub fn eval_r2(&self, r2: f64) -> f64 {
        let w2 = self.width * self.width;
        if r2 >= w2 {
            return 0.0;
        }
        bump(r2 / w2) / (bump_mass(self.d) * self.width.powi(self.d as i32))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x[..self.d].iter().map(|v| v * v).sum();
        self.eval_r2(r2)
    }

    /// Samples on the grid in position layout (origin at node `n/2`),
    /// rescaled so the grid quadrature is exactly 1. A width that does not
    /// reach any neighbour of the origin degenerates to the discrete delta.
    pub fn grid_field(&self, grid: &Grid) -> Result<Field> {
        if grid.dim() != self.d {
            return domain(format!("mollifier in d = {} on a grid with d = {}", self.d, grid.dim()));
        }
        if self.width > grid.half_length() {
            return domain(format!(
                "mollifier width {} exceeds the half box {}",
                self.width,
                grid.half_length()
            ));
        }
        let mut f = Field::from_fn(*grid, |p| self.eval_r2(norm2(p)));
        let mass = f.integral();
        let origin = origin_index(grid);
        let centre = f.values()[origin];
        if self.width <= grid.spacing() || mass <= centre * grid.cell_volume() * (1.0 + 1e-15) {
            let mut delta = Field::zeros(*grid);
            delta.values_mut()[origin] = 1.0 / grid.cell_volume();
            return Ok(delta);
        }
        f.scale(1.0 / mass);
        Ok(f)
    }

    /// Grid quadrature of the raw samples, without renormalisation.
    pub fn raw_grid_mass(&self, grid: &Grid) -> f64 {
        Field::from_fn(*grid, |p| self.eval_r2(norm2(p))).integral()
    }
}

/// Flat index of the node at the origin.
pub fn origin_index(grid: &Grid) -> usize {
    let idx = [grid.n() / 2; MAX_DIM];
    grid.flat_index(&idx)
}

/// Piecewise-linear radial ramp: 1 on `r ≤ 1/ζ`, 0 on `r ≥ 2/ζ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    zeta: f64,
}

impl Cutoff {
    /// `zeta == 0` gives the identity cutoff.
    pub fn new(zeta: f64) -> Result<Self> {
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return domain(format!("cutoff parameter {zeta} must be finite and ≥ 0"));
        }
        Ok(Self { zeta })
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Radius beyond which the cutoff vanishes (infinite for `zeta == 0`).
    pub fn outer_radius(&self) -> f64 {
        2.0 / self.zeta
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        (2.0 - self.zeta * r).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_bump_is_a_density() {
        assert!((bump_1d_cdf(0.0) - 0.5).abs() < 1e-14);
        assert!((bump_1d_cdf(0.999_999) - 1.0).abs() < 1e-14);
        let gl = GaussLegendre::new(32);
        let m = gl.integrate_composite(-1.0, 1.0, 32, bump_1d);
        assert!((m - 1.0).abs() < 1e-13);
    }

    #[test]
    fn plateau_shape() {
        assert_eq!(plateau(0.0), 1.0);
        assert_eq!(plateau(1.0), 1.0);
        assert!((plateau(1.5) - 0.5).abs() < 1e-14);
        assert_eq!(plateau(2.0), 0.0);
        let mut prev = 1.0;
        for i in 0..200 {
            let v = plateau(1.0 + i as f64 / 200.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn plateau_derivative_matches_difference() {
        let eps = 1e-6;
        for r in [1.2, 1.5, 1.77] {
            let fd = (plateau(r + eps) - plateau(r - eps)) / (2.0 * eps);
            assert!((fd - plateau_derivative(r)).abs() < 1e-7);
        }
    }

    #[test]
    fn cutoff_ramp() {
        let c = Cutoff::new(0.5).unwrap();
        assert_eq!(c.eval(1.9), 1.0);
        assert_eq!(c.eval(2.0), 1.0);
        assert!((c.eval(3.0) - 0.5).abs() < 1e-15);
        assert_eq!(c.eval(4.0), 0.0);
        assert_eq!(Cutoff::new(0.0).unwrap().eval(1e30), 1.0);
    }

    #[test]
    fn delta_for_narrow_width() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let w = Mollifier::new(2, 0.05).unwrap().grid_field(&grid).unwrap();
        assert_eq!(w.values().iter().filter(|v| **v != 0.0).count(), 1);
        assert!((w.integral() - 1.0).abs() < 1e-14);
    }
}
