use crate::error::{domain, Result};

/// Model and regularisation parameters shared by every level of the hierarchy.
///
/// `beta == 0` or `zeta == 0` select the unregularised limit of the
/// corresponding mollification; they exist for convergence references only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemParams {
    pub d: usize,
    pub s: f64,
    pub sigma: f64,
    pub beta: f64,
    pub zeta: f64,
    pub n_particles: usize,
}

impl ProblemParams {
    pub fn new(d: usize, s: f64, sigma: f64, beta: f64, zeta: f64, n_particles: usize) -> Result<Self> {
        let p = Self {
            d,
            s,
            sigma,
            beta,
            zeta,
            n_particles,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return domain(format!("dimension {} not in 1..=3", self.d));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return domain(format!("order s = {} must lie in (0, 1)", self.s));
        }
        if self.d == 1 && self.s >= 0.5 {
            return domain(format!("d = 1 requires s < 1/2, got {}", self.s));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return domain(format!("viscosity {} must be finite and ≥ 0", self.sigma));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return domain(format!("β = {} must be finite and ≥ 0", self.beta));
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return domain(format!("ζ = {} must be finite and ≥ 0", self.zeta));
        }
        if self.n_particles < 2 {
            return domain(format!("need at least 2 particles, got {}", self.n_particles));
        }
        Ok(())
    }

    /// Rate exponent `min{1, d - 2s}`.
    pub fn a(&self) -> f64 {
        (self.d as f64 - 2.0 * self.s).min(1.0)
    }

    /// Moment exponent `2d / (d - 2s)`.
    pub fn m_moment(&self) -> f64 {
        2.0 * self.d as f64 / (self.d as f64 - 2.0 * self.s)
    }
}
