use rayon::prelude::*;

use super::rng::{uniform, RngSpec, StreamTag};
use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};

/// Interleaves the bits of a multi-index (Z-order).
fn morton_key(idx: &[usize]) -> u64 {
    let d = idx.len();
    let mut key = 0u64;
    for bit in 0..(64 / d.max(1)) {
        for (a, &i) in idx.iter().enumerate() {
            key |= (((i >> bit) & 1) as u64) << (bit * d + a);
        }
    }
    key
}

/// Cells of the grid in Z-order, with the cumulative mass along that order.
pub struct CellSampler {
    grid: Grid,
    order: Vec<usize>,
    cumulative: Vec<f64>,
}

impl CellSampler {
    /// Negative values carry no mass. Errors on a datum with zero mass.
    pub fn new(rho: &Field) -> Result<Self> {
        let grid = *rho.grid();
        let d = grid.dim();
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by_cached_key(|&i| morton_key(&grid.multi_index(i)[..d]));
        let mut acc = 0.0;
        let cumulative: Vec<f64> = order
            .iter()
            .map(|&i| {
                acc += rho.values()[i].max(0.0);
                acc
            })
            .collect();
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::Degenerate("cannot sample from a density without mass".into()));
        }
        Ok(Self {
            grid,
            order,
            cumulative,
        })
    }

    /// One draw: pick a cell by inverse CDF, then a uniform point in it.
    pub fn draw(&self, spec: &RngSpec, index: u64, out: &mut [f64]) {
        let mut rng = spec.stream(StreamTag::Initial, index, 0);
        let total = *self.cumulative.last().expect("non-empty grid");
        let u = uniform(&mut rng) * total;
        let k = self.cumulative.partition_point(|&c| c <= u).min(self.order.len() - 1);
        let centre = self.grid.point(self.order[k]);
        let h = self.grid.spacing();
        for (a, x) in out.iter_mut().enumerate() {
            *x = self.grid.wrap(centre[a] + (uniform(&mut rng) - 0.5) * h);
        }
    }
}

/// `n` i.i.d. positions (row-major `n × d`) distributed as the piecewise
/// constant density with cell values `rho`, normalised to unit mass.
pub fn sample_initial(rho: &Field, n: usize, spec: &RngSpec) -> Result<Vec<f64>> {
    let sampler = CellSampler::new(rho)?;
    let d = rho.grid().dim();
    let mut out = vec![0.0; n * d];
    out.par_chunks_mut(d)
        .enumerate()
        .for_each(|(i, x)| sampler.draw(spec, i as u64, x));
    Ok(out)
}
