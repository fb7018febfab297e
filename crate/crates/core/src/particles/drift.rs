use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{Mollifier, NonlinearityTable, ProblemParams, RegularizedKernel};
use crate::pde::{PdeSolver, PdeState};
use crate::spectral::{Field, Grid, Spectral};

/// How the microscopic drift treats the self-interaction term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftMode {
    /// One density estimate from all particles, shared by everyone. Includes
    /// the `j = i` term, a bias of order `1/(N β^d)`.
    SharedField,
    /// Particle `i` sees the estimate built from the other `N − 1`.
    ExactPerParticle,
}

/// Particles per deposit chunk never drop below this.
const MIN_CHUNK: usize = 256;
/// Upper bound on the number of partial grids in a deposit.
const MAX_CHUNKS: usize = 64;

/// Multilinear interpolation weights of the `2^d` grid nodes around `x`.
pub(crate) fn corners(grid: &Grid, x: &[f64]) -> ([(usize, f64); 8], usize) {
    let h = grid.spacing();
    let n = grid.n();
    let d = grid.dim();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..d {
        let t = (grid.wrap(x[a]) + grid.half_length()) / h;
        let f = t.floor();
        base[a] = (f as isize).rem_euclid(n as isize) as usize;
        frac[a] = t - f;
    }
    let mut out = [(0usize, 0.0); 8];
    let count = 1usize << d;
    for (corner, slot) in out.iter_mut().enumerate().take(count) {
        let mut w = 1.0;
        let mut flat = 0;
        for a in 0..d {
            let bit = (corner >> a) & 1;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            flat = flat * n + (base[a] + bit) % n;
        }
        *slot = (flat, w);
    }
    (out, count)
}

/// Interpolates a vector field at row-major positions.
pub fn gather(fields: &[Field], positions: &[f64]) -> Vec<f64> {
    let d = fields.len();
    let grid = *fields[0].grid();
    let mut out = vec![0.0; positions.len()];
    out.par_chunks_mut(d)
        .zip(positions.par_chunks(d))
        .for_each(|(v, x)| {
            let (cs, count) = corners(&grid, x);
            for (a, va) in v.iter_mut().enumerate() {
                *va = cs[..count].iter().map(|&(i, w)| w * fields[a].values()[i]).sum();
            }
        });
    out
}

/// Errors with the first particle outside `[-L, L)^d`.
pub fn check_inside(grid: &Grid, positions: &[f64], time: f64) -> Result<()> {
    let d = grid.dim();
    match positions.par_chunks(d).position_first(|x| !grid.contains(x)) {
        Some(index) => Err(Error::Escape {
            index,
            time,
            position: positions[index * d..(index + 1) * d].to_vec(),
        }),
        None => Ok(()),
    }
}

/// Drift of the microscopic system,
/// `−∇K_ζ * f_σ((1/N) Σ_j W_β(X_j − ·))` evaluated at each particle.
#[derive(Clone, Debug)]
pub struct MicroDrift {
    spectral: Spectral,
    params: ProblemParams,
    table: Arc<NonlinearityTable>,
    kernel: RegularizedKernel,
    mollifier: Mollifier,
    kernel_gradient: OnceLock<Vec<Field>>,
}

impl MicroDrift {
    /// Requires `β ≥ 2h` so the density estimate is resolved by the grid.
    pub fn new(params: ProblemParams, spectral: Spectral, table: Arc<NonlinearityTable>) -> Result<Self> {
        params.validate()?;
        let grid = *spectral.grid();
        if grid.dim() != params.d {
            return Err(Error::GridMismatch("deposit grid dimension differs from the problem".into()));
        }
        if params.beta < 2.0 * grid.spacing() {
            return Err(Error::UnderResolved(format!(
                "β = {} is below two grid spacings ({})",
                params.beta,
                2.0 * grid.spacing()
            )));
        }
        let kernel = RegularizedKernel::build(&params, &spectral)?;
        let mollifier = Mollifier::new(params.d, params.beta)?;
        Ok(Self {
            spectral,
            params,
            table,
            kernel,
            mollifier,
            kernel_gradient: OnceLock::new(),
        })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    /// Nodes within the mollifier support of `x` and the weights `W_β(node − x)/N`.
    fn stencil(&self, x: &[f64], scale: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let grid = self.spectral.grid();
        let d = grid.dim();
        let h = grid.spacing();
        let half = grid.half_length();
        let n = grid.n() as isize;
        let beta = self.params.beta;
        let mut lo = [0isize; 3];
        let mut hi = [0isize; 3];
        for a in 0..d {
            lo[a] = ((x[a] - beta + half) / h).ceil() as isize;
            hi[a] = ((x[a] + beta + half) / h).floor() as isize;
        }
        let mut idx = lo;
        loop {
            let mut r2 = 0.0;
            let mut flat = 0usize;
            for a in 0..d {
                let offset = -half + idx[a] as f64 * h - x[a];
                r2 += offset * offset;
                flat = flat * grid.n() + idx[a].rem_euclid(n) as usize;
            }
            let w = self.mollifier.eval_r2(r2);
            if w > 0.0 {
                out.push((flat, w * scale));
            }
            // odometer over the box of candidate nodes
            let mut a = d;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= hi[a] {
                    break;
                }
                idx[a] = lo[a];
            }
        }
    }

    /// `(1/N) Σ_j W_β(x − X_j)` at the grid nodes. Partial sums over fixed
    /// particle chunks are added in chunk order, so the result does not
    /// depend on the thread count.
    pub fn deposit(&self, positions: &[f64]) -> Result<Field> {
        let grid = *self.spectral.grid();
        let d = grid.dim();
        let count = positions.len() / d;
        if count < 1 {
            return Err(Error::Degenerate("no particles to deposit".into()));
        }
        let scale = 1.0 / count as f64;
        let chunk = MIN_CHUNK.max(count.div_ceil(MAX_CHUNKS));
        let partials: Vec<Vec<f64>> = positions
            .par_chunks(chunk * d)
            .map(|block| {
                let mut local = vec![0.0; grid.len()];
                let mut st = Vec::new();
                for x in block.chunks(d) {
                    self.stencil(x, scale, &mut st);
                    for &(i, w) in &st {
                        local[i] += w;
                    }
                }
                local
            })
            .collect();
        let mut total = vec![0.0; grid.len()];
        for p in &partials {
            total.iter_mut().zip(p).for_each(|(t, v)| *t += v);
        }
        Field::from_values(grid, total)
    }

    fn apply_table(&self, u: &Field) -> Field {
        let vals = u.values().par_iter().map(|&v| self.table.value(v)).collect();
        Field::from_values(*u.grid(), vals).expect("same grid")
    }

    /// Grid samples of `∇K_ζ` in position layout, as the kernel gradient
    /// convolved with the discrete delta at the origin.
    fn kernel_gradient(&self) -> Result<&Vec<Field>> {
        if let Some(g) = self.kernel_gradient.get() {
            return Ok(g);
        }
        let grid = *self.spectral.grid();
        let mut delta = Field::zeros(grid);
        delta.values_mut()[crate::kernels::origin_index(&grid)] = 1.0 / grid.cell_volume();
        let g = self.kernel.gradient_convolution(&self.spectral, &delta, false)?;
        Ok(self.kernel_gradient.get_or_init(|| g))
    }

    /// Grid field `−∇K_ζ * f_σ(KDE)`.
    pub fn drift_field(&self, positions: &[f64]) -> Result<Vec<Field>> {
        let kde = self.deposit(positions)?;
        let source = self.apply_table(&kde);
        let mut grad = self.kernel.gradient_convolution(&self.spectral, &source, false)?;
        grad.iter_mut().for_each(|g| g.scale(-1.0));
        Ok(grad)
    }

    /// Drift vectors (row-major `N × d`) at the particle positions.
    pub fn drift(&self, positions: &[f64], mode: DriftMode, time: f64) -> Result<Vec<f64>> {
        let grid = *self.spectral.grid();
        check_inside(&grid, positions, time)?;
        match mode {
            DriftMode::SharedField => Ok(gather(&self.drift_field(positions)?, positions)),
            DriftMode::ExactPerParticle => self.exact_drift(positions),
        }
    }

    /// Removing particle `i` changes `f_σ(KDE)` only on its stencil, so its
    /// leave-one-out field is the shared field plus `∇K_ζ` times that local
    /// change, summed on the grid exactly as the full convolution would.
    fn exact_drift(&self, positions: &[f64]) -> Result<Vec<f64>> {
        let grid = *self.spectral.grid();
        let d = grid.dim();
        let n = grid.n();
        let count = positions.len() / d;
        let kde = self.deposit(positions)?;
        let source = self.apply_table(&kde);
        let shared = self.kernel.gradient_convolution(&self.spectral, &source, false)?;
        let kgrad = self.kernel_gradient()?;
        let scale = 1.0 / count as f64;
        let cell = grid.cell_volume();
        let half = n / 2;
        let mut out = vec![0.0; positions.len()];
        out.par_chunks_mut(d)
            .zip(positions.par_chunks(d))
            .for_each_init(Vec::new, |st, (v, x)| {
                self.stencil(x, scale, st);
                let change: Vec<f64> = st
                    .iter()
                    .map(|&(i, w)| self.table.value(kde.values()[i] - w) - source.values()[i])
                    .collect();
                let (cs, ncorners) = corners(&grid, x);
                for (a, va) in v.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for &(c, lambda) in &cs[..ncorners] {
                        let ci = grid.multi_index(c);
                        let mut local = 0.0;
                        for (&(y, _), delta) in st.iter().zip(&change) {
                            let yi = grid.multi_index(y);
                            let mut flat = 0;
                            for b in 0..d {
                                flat = flat * n + (ci[b] + half + n - yi[b]) % n;
                            }
                            local += kgrad[a].values()[flat] * delta;
                        }
                        acc += lambda * (shared[a].values()[c] + cell * local);
                    }
                    *va = -acc;
                }
            });
        Ok(out)
    }
}

/// Drift field of a density-driven system: `−∇K_ζ * f_σ(W_β * ρ̄)` for the
/// intermediate equation, `−∇(−Δ)^{-s} f_σ(ρ)` for the macro one.
#[derive(Clone, Debug)]
pub struct DensityDrift {
    fields: Vec<Field>,
    time: f64,
}

impl DensityDrift {
    pub fn from_state(solver: &PdeSolver, state: &PdeState) -> Result<Self> {
        Ok(Self {
            fields: solver.node_velocity(&state.rho)?,
            time: state.t,
        })
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Interpolated drifts; the density must be within `tolerance` of `time`.
    pub fn gather(&self, positions: &[f64], time: f64, tolerance: f64) -> Result<Vec<f64>> {
        if (self.time - time).abs() > tolerance {
            return Err(Error::StaleDensity {
                field_time: self.time,
                ensemble_time: time,
            });
        }
        check_inside(self.fields[0].grid(), positions, time)?;
        Ok(gather(&self.fields, positions))
    }
}

/// One-shot form of [`DensityDrift`].
pub fn drift_from_density(
    solver: &PdeSolver,
    state: &PdeState,
    positions: &[f64],
    time: f64,
    tolerance: f64,
) -> Result<Vec<f64>> {
    DensityDrift::from_state(solver, state)?.gather(positions, time, tolerance)
}
