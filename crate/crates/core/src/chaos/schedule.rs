use crate::error::{domain, Result};

/// Relative slack allowed when checking a (β, ζ) pair against the schedule.
const SCHEDULE_TOL: f64 = 1e-12;

/// Parameter schedule of the mean-field error estimate:
/// `β(N) = (ε log N)^{-1/(3d+7)}` and `ζ(N) = (C₁ N^{1/4})^{-1/(2s+1)}`,
/// so that `β^{-(3d+7)} = ε log N` and `ζ^{-(2s+1)} = C₁ N^{1/4}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub d: usize,
    pub s: f64,
    pub eps: f64,
    pub c1: f64,
    pub n_values: Vec<usize>,
}

impl Schedule {
    pub fn new(d: usize, s: f64, eps: f64, c1: f64, n_values: Vec<usize>) -> Result<Self> {
        if d == 0 || !(s > 0.0 && s < 1.0) {
            return domain(format!("schedule needs d ≥ 1 and 0 < s < 1, got d = {d}, s = {s}"));
        }
        if !(eps > 0.0 && eps.is_finite() && c1 > 0.0 && c1.is_finite()) {
            return domain(format!("schedule constants must be positive, got ε = {eps}, C₁ = {c1}"));
        }
        if n_values.is_empty() || n_values.iter().any(|&n| n < 2) {
            return domain("schedule particle counts must all be ≥ 2");
        }
        Ok(Self {
            d,
            s,
            eps,
            c1,
            n_values,
        })
    }

    fn beta_exponent(&self) -> f64 {
        3.0 * self.d as f64 + 7.0
    }

    fn zeta_exponent(&self) -> f64 {
        2.0 * self.s + 1.0
    }

    pub fn beta(&self, n: usize) -> f64 {
        (self.eps * (n as f64).ln()).powf(-1.0 / self.beta_exponent())
    }

    pub fn zeta(&self, n: usize) -> f64 {
        (self.c1 * (n as f64).powf(0.25)).powf(-1.0 / self.zeta_exponent())
    }

    /// `(N, β(N), ζ(N))` for every scheduled `N`.
    pub fn points(&self) -> Vec<(usize, f64, f64)> {
        self.n_values.iter().map(|&n| (n, self.beta(n), self.zeta(n))).collect()
    }

    /// Errors unless `β^{-(3d+7)} ≤ ε log N` and `ζ^{-(2s+1)} ≤ C₁ N^{1/4}`.
    pub fn check(&self, n: usize, beta: f64, zeta: f64) -> Result<()> {
        let lhs_beta = beta.powf(-self.beta_exponent());
        let rhs_beta = self.eps * (n as f64).ln();
        if !(lhs_beta <= rhs_beta * (1.0 + SCHEDULE_TOL)) {
            return domain(format!("β = {beta} violates β^-(3d+7) ≤ ε log N ({lhs_beta} > {rhs_beta})"));
        }
        let lhs_zeta = zeta.powf(-self.zeta_exponent());
        let rhs_zeta = self.c1 * (n as f64).powf(0.25);
        if !(lhs_zeta <= rhs_zeta * (1.0 + SCHEDULE_TOL)) {
            return domain(format!("ζ = {zeta} violates ζ^-(2s+1) ≤ C₁ N^(1/4) ({lhs_zeta} > {rhs_zeta})"));
        }
        Ok(())
    }
}
