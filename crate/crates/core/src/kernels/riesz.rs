use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{domain, Result};

/// Which normalising constant of the fractional calculus to return.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RieszKind {
    /// Riesz potential `(-Δ)^{-s} u = c ∫ |x-y|^{2s-d} u(y) dy`.
    Minus,
    /// Singular integral `(-Δ)^s u = c PV∫ (u(x)-u(y)) |x-y|^{-d-2s} dy`.
    Plus,
    /// `Plus` at order `1 - s`, the weight of the Dirichlet form.
    OneMinus,
}

/// Normalising constants of the fractional Laplacian and its inverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RieszConstants {
    pub c_minus: f64,
    pub c_plus: f64,
    pub c_oneminus: f64,
}

impl RieszConstants {
    pub fn new(d: usize, s: f64) -> Result<Self> {
        Ok(Self {
            c_minus: riesz_constant(d, s, RieszKind::Minus)?,
            c_plus: riesz_constant(d, s, RieszKind::Plus)?,
            c_oneminus: riesz_constant(d, s, RieszKind::OneMinus)?,
        })
    }
}

pub fn riesz_constant(d: usize, s: f64, kind: RieszKind) -> Result<f64> {
    if d == 0 {
        return domain("dimension must be positive");
    }
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("order s = {s} must lie strictly between the poles 0 and 1"));
    }
    let half_d = d as f64 / 2.0;
    match kind {
        RieszKind::Minus => {
            if half_d - s <= 0.0 {
                return domain(format!("Riesz potential needs d/2 - s > 0 (d = {d}, s = {s})"));
            }
            Ok(gamma(half_d - s) / (4f64.powf(s) * PI.powf(half_d) * gamma(s)))
        }
        RieszKind::Plus => Ok(4f64.powf(s) * gamma(half_d + s) / (PI.powf(half_d) * gamma(-s).abs())),
        RieszKind::OneMinus => riesz_constant(d, 1.0 - s, RieszKind::Plus),
    }
}
