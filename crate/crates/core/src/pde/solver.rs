use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::kernels::{Mollifier, NonlinearityTable, ProblemParams, RawNonlinearity, RegularizedKernel};
use crate::spectral::{norm2, Field, KernelSpectrum, Spectral};

/// Which equation of the hierarchy a state evolves under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Equation {
    /// `∂ρ = σΔρ + div(ρ ∇(-Δ)^{-s} f_σ(ρ))`.
    Macro,
    /// `∂ρ = σΔρ + div(ρ ∇K_ζ * f_σ(W_β * ρ))`.
    Intermediate,
    /// `∂ρ = div(ρ ∇(-Δ)^{-s} f(ρ))` with the raw nonlinearity and no diffusion.
    Limit,
}

/// Discretisation of the transport term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportScheme {
    /// First-order donor-cell fluxes, forward Euler, Lie splitting with diffusion.
    Upwind,
    /// Minmod-limited MUSCL fluxes, two-stage SSP Runge–Kutta, Strang splitting.
    Muscl,
}

/// The nonlinearity entering the pressure.
#[derive(Clone, Debug)]
pub enum Nonlinearity {
    Smoothed(Arc<NonlinearityTable>),
    Raw(RawNonlinearity),
}

impl Nonlinearity {
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Smoothed(t) => t.value(u),
            Nonlinearity::Raw(f) => f.value(u),
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Smoothed(t) => t.derivative(u),
            Nonlinearity::Raw(f) => f.derivative(u),
        }
    }

    /// `h'(u)`, `-∞` at `u ≤ 0`.
    pub fn entropy_derivative(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Smoothed(t) => t.entropy_derivative(u),
            Nonlinearity::Raw(f) => f.entropy_derivative(u),
        }
    }

    /// Entropy density `∫_0^u ∫_1^v f'(w)/w dw dv`.
    pub fn entropy(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Smoothed(t) => t.entropy(u),
            Nonlinearity::Raw(f) => f.entropy(u),
        }
    }

    pub fn apply(&self, rho: &Field) -> Field {
        let vals = rho.values().par_iter().map(|&u| self.value(u)).collect();
        Field::from_values(*rho.grid(), vals).expect("same grid")
    }
}

/// Density at a time under one equation.
#[derive(Clone, Debug)]
pub struct PdeState {
    pub rho: Field,
    pub t: f64,
    pub params: ProblemParams,
    pub which: Equation,
}

impl PdeState {
    pub fn new(rho: Field, params: ProblemParams, which: Equation) -> Result<Self> {
        params.validate()?;
        if rho.grid().dim() != params.d {
            return domain("density grid dimension differs from the problem dimension");
        }
        if !rho.is_finite() {
            return Err(Error::NonFinite("initial density".into()));
        }
        Ok(Self {
            rho,
            t: 0.0,
            params,
            which,
        })
    }
}

/// Immutable solver context: transforms, kernels and the nonlinearity.
#[derive(Clone, Debug)]
pub struct PdeSolver {
    which: Equation,
    params: ProblemParams,
    spectral: Spectral,
    nonlinearity: Nonlinearity,
    kernel: Option<RegularizedKernel>,
    interaction: Option<KernelSpectrum>,
    scheme: TransportScheme,
    laplacian_symbol: Vec<f64>,
}

impl PdeSolver {
    /// Builds the solver. `Macro` and `Intermediate` need a smoothed table;
    /// `Limit` uses the raw nonlinearity and ignores σ.
    pub fn new(which: Equation, params: ProblemParams, spectral: Spectral, nonlinearity: Nonlinearity) -> Result<Self> {
        params.validate()?;
        let grid = *spectral.grid();
        if grid.dim() != params.d {
            return domain("grid dimension differs from the problem dimension");
        }
        match (&which, &nonlinearity) {
            (Equation::Limit, Nonlinearity::Smoothed(_)) => {
                return domain("the limit equation uses the raw nonlinearity");
            }
            (Equation::Macro | Equation::Intermediate, Nonlinearity::Raw(_)) => {
                return domain("regularised equations need the smoothed nonlinearity table");
            }
            _ => {}
        }
        let (kernel, interaction) = if which == Equation::Intermediate {
            let kernel = RegularizedKernel::build(&params, &spectral)?;
            let interaction = if params.beta > 0.0 {
                let w = Mollifier::new(params.d, params.beta)?.grid_field(&grid)?;
                Some(spectral.kernel_spectrum(&w)?)
            } else {
                None
            };
            (Some(kernel), interaction)
        } else {
            (None, None)
        };
        let h = grid.spacing();
        let laplacian_symbol = (0..grid.len())
            .map(|m| {
                let k = grid.wavevector(m);
                k[..grid.dim()]
                    .iter()
                    .map(|kj| 4.0 * (0.5 * kj * h).sin().powi(2) / (h * h))
                    .sum()
            })
            .collect();
        Ok(Self {
            which,
            params,
            spectral,
            nonlinearity,
            kernel,
            interaction,
            scheme: TransportScheme::Muscl,
            laplacian_symbol,
        })
    }

    pub fn with_scheme(mut self, scheme: TransportScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn scheme(&self) -> TransportScheme {
        self.scheme
    }

    pub fn which(&self) -> Equation {
        self.which
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn kernel(&self) -> Option<&RegularizedKernel> {
        self.kernel.as_ref()
    }

    /// Viscosity actually applied (zero for the limit equation).
    pub fn viscosity(&self) -> f64 {
        match self.which {
            Equation::Limit => 0.0,
            _ => self.params.sigma,
        }
    }

    /// The field whose gradient drives the flow: `f_σ(ρ)` for the macro and
    /// limit equations, `f_σ(W_β * ρ)` for the intermediate one.
    pub fn pressure_source(&self, rho: &Field) -> Result<Field> {
        match (self.which, &self.interaction) {
            (Equation::Intermediate, Some(w)) => {
                let smoothed = self.spectral.convolve_with(rho, w)?;
                Ok(self.nonlinearity.apply(&smoothed))
            }
            _ => Ok(self.nonlinearity.apply(rho)),
        }
    }

    fn velocity(&self, rho: &Field, face_shift: bool) -> Result<Vec<Field>> {
        self.spectral.grid().ensure_same(rho.grid())?;
        let source = self.pressure_source(rho)?;
        let mut grad = match (&self.kernel, self.which) {
            (Some(k), Equation::Intermediate) => k.gradient_convolution(&self.spectral, &source, face_shift)?,
            _ if !face_shift => self.spectral.pressure_gradient(&source, self.params.s)?,
            _ => {
                let s = self.params.s;
                self.spectral
                    .gradient_with(&source, |k2| if k2 == 0.0 { 0.0 } else { k2.powf(-s) }, true)
            }
        };
        grad.iter_mut().for_each(|g| g.scale(-1.0));
        Ok(grad)
    }

    /// Transport velocity `v` (so that `∂ρ + div(ρ v) = σΔρ`) at the nodes.
    pub fn node_velocity(&self, rho: &Field) -> Result<Vec<Field>> {
        self.velocity(rho, false)
    }

    /// Transport velocity at the face midpoints `x + (h/2) e_j`, one field per axis.
    pub fn face_velocity(&self, rho: &Field) -> Result<Vec<Field>> {
        self.velocity(rho, true)
    }

    /// Largest step keeping the forward-Euler transport stage positivity preserving.
    pub fn admissible_dt(&self, faces: &[Field]) -> f64 {
        let grid = self.spectral.grid();
        let h = grid.spacing();
        let outflow = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                faces
                    .iter()
                    .enumerate()
                    .map(|(a, v)| v.values()[i].max(0.0) - v.values()[neighbour(grid, i, a, -1)].min(0.0))
                    .sum::<f64>()
            })
            .reduce(|| 0.0, f64::max);
        let factor = match self.scheme {
            TransportScheme::Upwind => 1.0,
            TransportScheme::Muscl => 0.5,
        };
        if outflow == 0.0 {
            f64::INFINITY
        } else {
            factor * h / outflow
        }
    }

    /// One time step of the configured equation.
    pub fn step(&self, state: &PdeState, dt: f64) -> Result<PdeState> {
        if state.which != self.which {
            return domain(format!("state evolves under {:?}, solver under {:?}", state.which, self.which));
        }
        if !(dt > 0.0) {
            return domain(format!("time step {dt} must be positive"));
        }
        let advanced = match self.scheme {
            TransportScheme::Upwind => self
                .transport_stage(&state.rho, dt)
                .map(|moved| self.diffuse(&moved, dt)),
            TransportScheme::Muscl => {
                let half = self.diffuse(&state.rho, 0.5 * dt);
                self.transport_stage(&half, dt)
                    .and_then(|stage1| self.transport_stage(&stage1, dt))
                    .and_then(|stage2| half.zip_with(&stage2, |a, b| 0.5 * (a + b)))
                    .map(|averaged| self.diffuse(&averaged, 0.5 * dt))
            }
        };
        // A failing intermediate stage reports the tighter of its own bound
        // and the one of the incoming density.
        let rho = advanced.map_err(|e| match e {
            Error::Cfl { dt, admissible } => {
                let here = self
                    .face_velocity(&state.rho)
                    .map(|f| self.admissible_dt(&f))
                    .unwrap_or(admissible);
                Error::Cfl {
                    dt,
                    admissible: admissible.min(here),
                }
            }
            other => other,
        })?;
        if !rho.is_finite() {
            return Err(Error::NonFinite(format!("density after step at t = {}", state.t)));
        }
        Ok(PdeState {
            rho,
            t: state.t + dt,
            params: state.params,
            which: state.which,
        })
    }

    /// Step of the macroscopic equation.
    pub fn step_macro(&self, state: &PdeState, dt: f64) -> Result<PdeState> {
        if self.which != Equation::Macro {
            return domain("step_macro on a solver for another equation");
        }
        self.step(state, dt)
    }

    /// Step of the intermediate equation.
    pub fn step_intermediate(&self, state: &PdeState, dt: f64) -> Result<PdeState> {
        if self.which != Equation::Intermediate {
            return domain("step_intermediate on a solver for another equation");
        }
        self.step(state, dt)
    }

    fn transport_stage(&self, rho: &Field, dt: f64) -> Result<Field> {
        let faces = self.face_velocity(rho)?;
        let admissible = self.admissible_dt(&faces);
        if dt > admissible {
            return Err(Error::Cfl { dt, admissible });
        }
        let grid = *self.spectral.grid();
        let h = grid.spacing();
        let d = grid.dim();
        let vals = rho.values();
        let fluxes: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                let v = faces[a].values();
                (0..grid.len())
                    .into_par_iter()
                    .map(|i| {
                        let right = neighbour(&grid, i, a, 1);
                        let (left_state, right_state) = match self.scheme {
                            TransportScheme::Upwind => (vals[i], vals[right]),
                            TransportScheme::Muscl => {
                                let left = neighbour(&grid, i, a, -1);
                                let far = neighbour(&grid, right, a, 1);
                                let sl = minmod(vals[i] - vals[left], vals[right] - vals[i]);
                                let sr = minmod(vals[right] - vals[i], vals[far] - vals[right]);
                                (vals[i] + 0.5 * sl, vals[right] - 0.5 * sr)
                            }
                        };
                        v[i].max(0.0) * left_state + v[i].min(0.0) * right_state
                    })
                    .collect()
            })
            .collect();
        let ratio = dt / h;
        let out = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let div: f64 = fluxes
                    .iter()
                    .enumerate()
                    .map(|(a, f)| f[i] - f[neighbour(&grid, i, a, -1)])
                    .sum();
                vals[i] - ratio * div
            })
            .collect();
        Field::from_values(grid, out)
    }

    /// Exact solution operator of the discrete heat equation `∂ρ = σ Δ_h ρ`
    /// (the standard `2d+1`-point Laplacian), applied spectrally. It is a
    /// Markov semigroup, so positivity and the maximum principle carry over.
    pub fn diffuse(&self, rho: &Field, dt: f64) -> Field {
        let nu = self.viscosity();
        if nu == 0.0 {
            return rho.clone();
        }
        let coeffs = self.spectral.forward(rho.values());
        let coeffs: Vec<Complex64> = coeffs
            .into_par_iter()
            .zip(self.laplacian_symbol.par_iter())
            .map(|(c, lam)| c * (-nu * dt * lam).exp())
            .collect();
        Field::from_values(*rho.grid(), self.spectral.inverse(coeffs)).expect("same grid")
    }

    /// Wavenumber-space decay rate of a single mode for the linearisation of
    /// the macro equation about a constant `c` (used by tests and reports).
    pub fn linear_decay_rate(&self, k: &[f64; 3], c: f64) -> f64 {
        let k2 = norm2(k);
        self.viscosity() * k2 + c * k2.powf(1.0 - self.params.s) * self.nonlinearity.derivative(c)
    }
}

#[inline]
pub fn neighbour(grid: &crate::spectral::Grid, i: usize, axis: usize, offset: isize) -> usize {
    let n = grid.n();
    let stride = grid.stride(axis);
    let pos = (i / stride) % n;
    let new = (pos as isize + offset).rem_euclid(n as isize) as usize;
    i + new * stride - pos * stride
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}
