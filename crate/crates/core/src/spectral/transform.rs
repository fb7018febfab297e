use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::Field;
use super::grid::{Grid, Point};
use crate::error::Result;

const LINES_PER_TASK: usize = 32;

/// Discrete Fourier transforms and Fourier multipliers on a [`Grid`].
///
/// Transforms are applied axis by axis; each 1-D line is independent, so the
/// result does not depend on how rayon schedules the lines.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

/// Spectrum of a convolution kernel, pre-scaled by the cell volume and
/// re-centred so that the node at the origin acts as zero displacement.
#[derive(Clone, Debug)]
pub struct KernelSpectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl KernelSpectrum {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n());
        let inv = planner.plan_fft_inverse(grid.n());
        Self { grid, fwd, inv }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Unnormalised forward DFT of real nodal values.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        data
    }

    /// Inverse DFT normalised by `1/n^d`, returning the real part.
    pub fn inverse(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut coeffs, true);
        let scale = 1.0 / self.grid.len() as f64;
        coeffs.into_iter().map(|c| c.re * scale).collect()
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let fft = if inverse { &self.inv } else { &self.fwd };
        let n = self.grid.n();
        let d = self.grid.dim();
        for axis in 0..d {
            let stride = self.grid.stride(axis);
            if stride == 1 {
                data.par_chunks_mut(n * LINES_PER_TASK)
                    .for_each(|chunk| fft.process(chunk));
                continue;
            }
            let lines = data.len() / n;
            let mut buf = vec![Complex64::new(0.0, 0.0); data.len()];
            {
                let src: &[Complex64] = data;
                buf.par_chunks_mut(n * LINES_PER_TASK)
                    .enumerate()
                    .for_each(|(task, chunk)| {
                        for (l, line) in chunk.chunks_mut(n).enumerate() {
                            let line_id = task * LINES_PER_TASK + l;
                            let base = (line_id / stride) * n * stride + line_id % stride;
                            for (j, v) in line.iter_mut().enumerate() {
                                *v = src[base + j * stride];
                            }
                        }
                        fft.process(chunk);
                    });
            }
            for line_id in 0..lines {
                let base = (line_id / stride) * n * stride + line_id % stride;
                let line = &buf[line_id * n..(line_id + 1) * n];
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }

    /// Applies the Fourier multiplier `symbol(k)` to a real field.
    pub fn apply_multiplier<F>(&self, u: &Field, symbol: F) -> Field
    where
        F: Fn(&Point) -> Complex64 + Sync,
    {
        let coeffs = self.forward(u.values());
        let coeffs = self.multiply(coeffs, symbol);
        Field::from_values(self.grid, self.inverse(coeffs)).expect("grid length")
    }

    /// Multiplies spectral coefficients in place by `symbol(k)`.
    pub fn multiply<F>(&self, mut coeffs: Vec<Complex64>, symbol: F) -> Vec<Complex64>
    where
        F: Fn(&Point) -> Complex64 + Sync,
    {
        let grid = self.grid;
        coeffs
            .par_iter_mut()
            .enumerate()
            .for_each(|(m, c)| *c *= symbol(&grid.wavevector(m)));
        coeffs
    }

    /// True when mode `m` sits on the Nyquist plane of `axis`.
    #[inline]
    pub fn is_nyquist(&self, m: usize, axis: usize) -> bool {
        self.grid.multi_index(m)[axis] == self.grid.nyquist()
    }

    /// Spectrum of a kernel sampled in position layout (origin at node `n/2`).
    pub fn kernel_spectrum(&self, kernel: &Field) -> Result<KernelSpectrum> {
        self.grid.ensure_same(kernel.grid())?;
        let mut coeffs = self.forward(kernel.values());
        let cell = self.grid.cell_volume();
        let grid = self.grid;
        coeffs.par_iter_mut().enumerate().for_each(|(m, c)| {
            let idx = grid.multi_index(m);
            let parity: usize = idx[..grid.dim()].iter().sum();
            let sign = if parity.is_multiple_of(2) { cell } else { -cell };
            *c *= sign;
        });
        Ok(KernelSpectrum { grid, coeffs })
    }

    /// Builds a kernel spectrum directly from its symbol (already continuous-normalised).
    pub fn symbol_spectrum<F>(&self, symbol: F) -> KernelSpectrum
    where
        F: Fn(&Point) -> Complex64 + Sync,
    {
        let grid = self.grid;
        let coeffs = (0..grid.len())
            .into_par_iter()
            .map(|m| symbol(&grid.wavevector(m)))
            .collect();
        KernelSpectrum { grid, coeffs }
    }

    /// Periodic convolution `u * kernel` scaled by the cell volume.
    pub fn convolve_with(&self, u: &Field, kernel: &KernelSpectrum) -> Result<Field> {
        self.grid.ensure_same(u.grid())?;
        self.grid.ensure_same(kernel.grid())?;
        let mut coeffs = self.forward(u.values());
        coeffs
            .par_iter_mut()
            .zip(kernel.coeffs.par_iter())
            .for_each(|(c, k)| *c *= k);
        Field::from_values(self.grid, self.inverse(coeffs))
    }
}
