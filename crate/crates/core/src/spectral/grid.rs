use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A point (or wavevector) with up to [`MAX_DIM`] components; unused slots are zero.
pub type Point = [f64; MAX_DIM];

/// Uniform periodic grid on the box `[-L, L)^d` with `n` nodes per axis.
///
/// Node `i` along an axis sits at `-L + i h` with `h = 2L / n`. Flat indices
/// are row-major with axis 0 slowest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    d: usize,
    n: usize,
    half_length: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, half_length: f64) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return domain(format!("dimension {d} outside 1..={MAX_DIM}"));
        }
        if n < 4 || !n.is_power_of_two() {
            return domain(format!("points per axis must be a power of two >= 4, got {n}"));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return domain(format!("half length must be positive, got {half_length}"));
        }
        Ok(Self { d, n, half_length })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    /// Total number of nodes, `n^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    #[inline]
    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_length).powi(self.d as i32)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    /// Stride of axis `axis` in the flat layout.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for a in (0..self.d).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Physical coordinates of node `flat`.
    pub fn point(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.d {
            p[a] = self.coord(idx[a]);
        }
        p
    }

    /// Signed wavenumber of discrete mode `m` along one axis.
    #[inline]
    pub fn wavenumber(&self, m: usize) -> f64 {
        let signed = if m < self.n / 2 {
            m as f64
        } else {
            m as f64 - self.n as f64
        };
        PI * signed / self.half_length
    }

    /// Wavevector of the flat mode index.
    pub fn wavevector(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let mut k = [0.0; MAX_DIM];
        for a in 0..self.d {
            k[a] = self.wavenumber(idx[a]);
        }
        k
    }

    /// Nyquist index along an axis.
    #[inline]
    pub fn nyquist(&self) -> usize {
        self.n / 2
    }

    /// Minimum-image representative of a displacement component.
    #[inline]
    pub fn min_image(&self, dx: f64) -> f64 {
        let box_len = 2.0 * self.half_length;
        dx - box_len * (dx / box_len).round()
    }

    /// Wraps a coordinate into `[-L, L)`.
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        let box_len = 2.0 * self.half_length;
        (x + self.half_length).rem_euclid(box_len) - self.half_length
    }

    /// True when the point lies in `[-L, L)^d`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x[..self.d]
            .iter()
            .all(|&c| c >= -self.half_length && c < self.half_length)
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

pub(crate) fn norm(p: &Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

pub(crate) fn norm2(p: &Point) -> f64 {
    p[0] * p[0] + p[1] * p[1] + p[2] * p[2]
}
