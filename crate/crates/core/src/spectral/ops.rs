//! Fractional calculus on the periodic box as Fourier multipliers.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::field::Field;
use super::grid::{norm2, Point};
use super::transform::Spectral;
use crate::error::{domain, Result};

fn check_order(s: f64, d: usize) -> Result<()> {
    if !(s > 0.0 && s < d as f64 / 2.0) {
        return domain(format!("fractional order {s} outside (0, d/2) for d = {d}"));
    }
    Ok(())
}

impl Spectral {
    /// `(-Δ)^{-s} u`, with the zero mode gauged to 0.
    pub fn inv_frac_laplacian(&self, u: &Field, s: f64) -> Result<Field> {
        check_order(s, self.grid().dim())?;
        self.grid().ensure_same(u.grid())?;
        Ok(self.apply_multiplier(u, |k| {
            let k2 = norm2(k);
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(k2.powf(-s), 0.0)
            }
        }))
    }

    /// `(-Δ)^s u`.
    pub fn frac_laplacian(&self, u: &Field, s: f64) -> Result<Field> {
        if !(s > 0.0) {
            return domain(format!("fractional order {s} must be positive"));
        }
        self.grid().ensure_same(u.grid())?;
        Ok(self.apply_multiplier(u, |k| Complex64::new(norm2(k).powf(s), 0.0)))
    }

    /// Gradient of `(-Δ)^{-s} g`, i.e. the pressure gradient when `g = f(ρ)`.
    pub fn pressure_gradient(&self, g: &Field, s: f64) -> Result<Vec<Field>> {
        check_order(s, self.grid().dim())?;
        self.grid().ensure_same(g.grid())?;
        Ok(self.gradient_with(g, |k2| if k2 == 0.0 { 0.0 } else { k2.powf(-s) }, false))
    }

    /// Spectral gradient.
    pub fn gradient(&self, u: &Field) -> Result<Vec<Field>> {
        self.grid().ensure_same(u.grid())?;
        Ok(self.gradient_with(u, |_| 1.0, false))
    }

    /// Components of `∇ R u` where `R` has the radial symbol `radial(|k|²)`.
    ///
    /// With `face_shift`, component `j` is sampled at the face midpoints
    /// `x + (h/2) e_j` instead of the nodes. Nyquist modes along the
    /// differentiated axis are dropped so the result stays real.
    pub fn gradient_with<R>(&self, u: &Field, radial: R, face_shift: bool) -> Vec<Field>
    where
        R: Fn(f64) -> f64 + Sync,
    {
        let coeffs = self.forward(u.values());
        self.gradient_from_coeffs(&coeffs, radial, face_shift)
    }

    pub(crate) fn gradient_from_coeffs<R>(
        &self,
        coeffs: &[Complex64],
        radial: R,
        face_shift: bool,
    ) -> Vec<Field>
    where
        R: Fn(f64) -> f64 + Sync,
    {
        let grid = *self.grid();
        let h = grid.spacing();
        let nyq = grid.nyquist();
        (0..grid.dim())
            .map(|axis| {
                let mut c = coeffs.to_vec();
                c.par_iter_mut().enumerate().for_each(|(m, v)| {
                    let idx = grid.multi_index(m);
                    if idx[axis] == nyq {
                        *v = Complex64::new(0.0, 0.0);
                        return;
                    }
                    let k = grid.wavevector(m);
                    let mut sym = Complex64::new(0.0, k[axis] * radial(norm2(&k)));
                    if face_shift {
                        sym *= Complex64::from_polar(1.0, 0.5 * k[axis] * h);
                    }
                    *v *= sym;
                });
                Field::from_values(grid, self.inverse(c)).expect("grid length")
            })
            .collect()
    }

    /// Periodic convolution of two position-layout fields, scaled by the cell
    /// volume so that it approximates the continuum convolution.
    pub fn convolve(&self, u: &Field, v: &Field) -> Result<Field> {
        let kernel = self.kernel_spectrum(v)?;
        self.convolve_with(u, &kernel)
    }

    /// Squared homogeneous `H^r` seminorm, `(2L)^d Σ |k|^{2r} |û_k|²` with
    /// `û_k` the Fourier-series coefficients.
    pub fn seminorm_sq(&self, u: &Field, r: f64) -> Result<f64> {
        self.grid().ensure_same(u.grid())?;
        let coeffs = self.forward(u.values());
        Ok(self.seminorm_sq_from_coeffs(&coeffs, r))
    }

    pub(crate) fn seminorm_sq_from_coeffs(&self, coeffs: &[Complex64], r: f64) -> f64 {
        let grid = *self.grid();
        let m = grid.len() as f64;
        let sum: f64 = coeffs
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let k2 = norm2(&grid.wavevector(i));
                if k2 == 0.0 {
                    0.0
                } else {
                    k2.powf(r) * c.norm_sqr()
                }
            })
            .sum();
        grid.box_volume() * sum / (m * m)
    }

    /// `H^r` seminorm.
    pub fn seminorm(&self, u: &Field, r: f64) -> Result<f64> {
        Ok(self.seminorm_sq(u, r)?.sqrt())
    }

    /// Dirichlet form `‖∇(-Δ)^{-s/2} g‖₂²`, equal to the squared `H^{1-s}` seminorm.
    pub fn dirichlet_form(&self, g: &Field, s: f64) -> Result<f64> {
        self.seminorm_sq(g, 1.0 - s)
    }

    /// Frobenius `L^p` norm of the Hessian, computed spectrally.
    pub fn hessian_lp_norm(&self, u: &Field, p: f64) -> Result<f64> {
        self.grid().ensure_same(u.grid())?;
        let grid = *self.grid();
        let d = grid.dim();
        let coeffs = self.forward(u.values());
        let mut mag2 = vec![0.0; grid.len()];
        for a in 0..d {
            for b in a..d {
                let c = self.multiply(coeffs.clone(), |k: &Point| Complex64::new(-k[a] * k[b], 0.0));
                let vals = self.inverse(c);
                let w = if a == b { 1.0 } else { 2.0 };
                mag2.iter_mut().zip(&vals).for_each(|(m, v)| *m += w * v * v);
            }
        }
        let mags: Vec<f64> = mag2.into_iter().map(f64::sqrt).collect();
        Ok(super::field::lp_norm(&mags, grid.cell_volume(), p))
    }

    /// Two-thirds rule filter: zeroes modes with any `|k_j|` above 2/3 of Nyquist.
    pub fn dealias(&self, u: &Field) -> Field {
        let cutoff = 2.0 / 3.0 * std::f64::consts::PI / self.grid().spacing();
        self.apply_multiplier(u, |k| {
            if k.iter().any(|kj| kj.abs() > cutoff) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    }
}
