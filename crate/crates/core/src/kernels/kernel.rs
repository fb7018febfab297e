use rustfft::num_complex::Complex64;

use super::params::ProblemParams;
use super::profiles::{origin_index, Cutoff, Mollifier};
use super::riesz::{riesz_constant, RieszKind};
use crate::error::{domain, Result};
use crate::quadrature::cube_power_integral;
use crate::spectral::{norm, norm2, Field, KernelSpectrum, Spectral};

/// The regularised Riesz kernel `K_ζ = (K ω_ζ) * W_ζ` on the grid.
///
/// With `zeta == 0` this is the exact periodic Riesz potential, realised by
/// its Fourier symbol `|k|^{-2s}`.
#[derive(Clone, Debug)]
pub struct RegularizedKernel {
    s: f64,
    zeta: f64,
    values: Option<Field>,
    spectrum: KernelSpectrum,
    wraps: bool,
}

impl RegularizedKernel {
    pub fn build(params: &ProblemParams, spectral: &Spectral) -> Result<Self> {
        let grid = *spectral.grid();
        if grid.dim() != params.d {
            return domain(format!("kernel for d = {} on a grid with d = {}", params.d, grid.dim()));
        }
        let s = params.s;
        if params.zeta == 0.0 {
            let spectrum = spectral.symbol_spectrum(|k| {
                let k2 = norm2(k);
                Complex64::new(if k2 == 0.0 { 0.0 } else { k2.powf(-s) }, 0.0)
            });
            return Ok(Self {
                s,
                zeta: 0.0,
                values: None,
                spectrum,
                wraps: false,
            });
        }
        let zeta = params.zeta;
        let reach = 2.0 / zeta + zeta;
        let wraps = reach > grid.half_length();
        if wraps {
            log::warn!(
                "kernel support radius {reach:.3} exceeds the half box {}; the cutoff is truncated by the torus",
                grid.half_length()
            );
        }
        let truncated = truncated_kernel(params, spectral)?;
        let mollifier = Mollifier::new(params.d, zeta)?.grid_field(&grid)?;
        let values = spectral.convolve(&truncated, &mollifier)?;
        let spectrum = spectral.kernel_spectrum(&values)?;
        Ok(Self {
            s,
            zeta,
            values: Some(values),
            spectrum,
            wraps,
        })
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Grid samples of `K_ζ` in position layout; `None` for the exact kernel.
    pub fn values(&self) -> Option<&Field> {
        self.values.as_ref()
    }

    pub fn spectrum(&self) -> &KernelSpectrum {
        &self.spectrum
    }

    /// True when the kernel support does not fit in the half box.
    pub fn wraps(&self) -> bool {
        self.wraps
    }

    /// Grid samples of `∇K_ζ` by spectral differentiation (position layout).
    pub fn gradient(&self, spectral: &Spectral) -> Result<Vec<Field>> {
        match &self.values {
            Some(v) => spectral.gradient(v),
            None => domain("the exact kernel has no grid samples"),
        }
    }

    /// `∇K_ζ * g`, optionally sampled at face midpoints.
    pub fn gradient_convolution(&self, spectral: &Spectral, g: &Field, face_shift: bool) -> Result<Vec<Field>> {
        spectral.grid().ensure_same(g.grid())?;
        spectral.grid().ensure_same(self.spectrum.grid())?;
        let mut coeffs = spectral.forward(g.values());
        coeffs
            .iter_mut()
            .zip(self.spectrum.coeffs())
            .for_each(|(c, k)| *c *= k);
        Ok(spectral.gradient_from_coeffs(&coeffs, |_| 1.0, face_shift))
    }

    /// `K_ζ * g`.
    pub fn convolve(&self, spectral: &Spectral, g: &Field) -> Result<Field> {
        spectral.convolve_with(g, &self.spectrum)
    }
}

/// Samples of `K ω_ζ` in position layout; the origin node carries the cell
/// average of `c |x|^{2s-d}`.
pub fn truncated_kernel(params: &ProblemParams, spectral: &Spectral) -> Result<Field> {
    let grid = *spectral.grid();
    let d = params.d;
    let c = riesz_constant(d, params.s, RieszKind::Minus)?;
    let cutoff = Cutoff::new(params.zeta)?;
    let power = 2.0 * params.s - d as f64;
    let mut f = Field::from_fn(grid, |p| {
        let r = norm(p);
        if r == 0.0 {
            0.0
        } else {
            c * r.powf(power) * cutoff.eval(r)
        }
    });
    let h = grid.spacing();
    let cell_avg = c * cube_power_integral(d, 0.5 * h, power) / grid.cell_volume();
    f.values_mut()[origin_index(&grid)] = cell_avg;
    Ok(f)
}
