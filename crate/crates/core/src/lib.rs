//! Numerical laboratory for the fractional porous-medium equation and its
//! moderately interacting particle approximation.
//!
//! The hierarchy has three levels: an `N`-particle system whose drift is a
//! kernel density estimate pushed through a regularised Riesz potential, the
//! McKean–Vlasov equation it approximates, and the viscous fractional
//! porous-medium equation `∂ρ = σΔρ + div(ρ ∇(-Δ)^{-s} f_σ(ρ))`. All fields
//! live on a periodic box `[-L, L)^d` standing in for `R^d`.

// Negated comparisons are how validation rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod error;
pub mod kernels;
pub mod particles;
pub mod pde;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
