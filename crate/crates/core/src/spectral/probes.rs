//! Numerical checkers: inequality ratios, the singular-integral form of the
//! fractional Laplacian, and the double-sum form of the Dirichlet form.

use std::f64::consts::PI;

use super::field::{lp_norm, vector_lp_norm, Field};
use super::grid::{norm2, Grid, Point};
use super::transform::Spectral;
use crate::error::{domain, Result};
use crate::kernels::{riesz_constant, RieszKind};
use crate::quadrature::{cube_power_integral, unit_sphere_area, GaussLegendre};

const EXPONENT_TOL: f64 = 1e-12;

/// Which functional inequality to probe, with its exponents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Inequality {
    /// `‖(-Δ)^s u‖_p ≤ C ‖u‖_p^{1-2s} ‖∇u‖_p^{2s}` for `s ≤ 1/2`, and the
    /// Hessian form `‖u‖_p^{1-s} ‖D²u‖_p^s` for `1/2 < s ≤ 1`.
    Gn1 { s: f64, p: f64 },
    /// `‖(-Δ)^{-s} ∇u‖_q ≤ C ‖u‖_p^{1-θ} ‖∇u‖_p^θ`.
    Gn2 { s: f64, p: f64, q: f64 },
    /// `‖(-Δ)^{-s} u‖_q ≤ C ‖u‖_p` with `1/p = 1/q + 2s/d`.
    Hls { s: f64, p: f64, q: f64 },
    /// `‖u ∇(-Δ)^{-s} v‖_p ≤ C ‖u‖_q ‖v‖_r` with `1/q + 1/r = 1/p + (2s-1)/d`.
    Hls2 { s: f64, p: f64, q: f64, r: f64 },
}

/// Left side, constant-free right side, and their ratio.
#[derive(Clone, Copy, Debug)]
pub struct ProbeReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Interpolation exponent `θ = 1 + d/p - d/q - 2s`.
pub fn gn2_theta(d: usize, s: f64, p: f64, q: f64) -> f64 {
    let d = d as f64;
    1.0 + d / p - d / q - 2.0 * s
}

/// Checks the exponent relations of an inequality in dimension `d`.
pub fn validate(d: usize, which: Inequality) -> Result<()> {
    let finite_p = |p: f64| p > 1.0 && p.is_finite();
    match which {
        Inequality::Gn1 { s, p } => {
            if d < 2 || !(s > 0.0 && s <= 1.0) || !finite_p(p) {
                return domain(format!("GN1 needs d ≥ 2, 0 < s ≤ 1, 1 < p < ∞ (d={d}, s={s}, p={p})"));
            }
        }
        Inequality::Gn2 { s, p, q } => {
            if d < 2 || !(s > 0.0 && s <= 0.5) || !finite_p(p) || !(q >= p && q.is_finite()) {
                return domain(format!("GN2 needs d ≥ 2, 0 < s ≤ 1/2, 1 < p ≤ q < ∞ (s={s}, p={p}, q={q})"));
            }
            let df = d as f64;
            if p < df / (2.0 * s) && q > df * p / (df - 2.0 * s * p) + EXPONENT_TOL {
                return domain(format!("GN2 needs q ≤ dp/(d-2sp) when p < d/(2s) (p={p}, q={q})"));
            }
            let theta = gn2_theta(d, s, p, q);
            if !(-EXPONENT_TOL..=1.0 + EXPONENT_TOL).contains(&theta) {
                return domain(format!("GN2 exponent θ = {theta} outside [0, 1]"));
            }
        }
        Inequality::Hls { s, p, q } => {
            if !(s > 0.0 && s < 1.0) || !finite_p(p) || !q.is_finite() {
                return domain(format!("HLS needs 0 < s < 1, 1 < p, q < ∞ (s={s}, p={p}, q={q})"));
            }
            let gap = 1.0 / p - 1.0 / q - 2.0 * s / d as f64;
            if gap.abs() > EXPONENT_TOL {
                return domain(format!("HLS needs 1/p = 1/q + 2s/d (off by {gap:e})"));
            }
        }
        Inequality::Hls2 { s, p, q, r } => {
            if !(s > 0.5 && s < 1.0) || !(p >= 1.0 && p < q && q.is_finite()) || !(r >= 1.0) {
                return domain(format!("HLS2 needs 1/2 < s < 1, 1 ≤ p < q < ∞, r ≥ 1 (s={s}, p={p}, q={q}, r={r})"));
            }
            let gap = 1.0 / q + 1.0 / r - 1.0 / p - (2.0 * s - 1.0) / d as f64;
            if gap.abs() > EXPONENT_TOL {
                return domain(format!("HLS2 needs 1/q + 1/r = 1/p + (2s-1)/d (off by {gap:e})"));
            }
        }
    }
    Ok(())
}

/// Evaluates both sides of the inequality. `v` is the second argument of HLS2.
pub fn inequality_probe(
    spectral: &Spectral,
    u: &Field,
    v: Option<&Field>,
    which: Inequality,
) -> Result<ProbeReport> {
    let grid = *spectral.grid();
    validate(grid.dim(), which)?;
    grid.ensure_same(u.grid())?;
    let (lhs, rhs) = match which {
        Inequality::Gn1 { s, p } => {
            let lhs = spectral.frac_laplacian(u, s)?.lp_norm(p);
            let up = u.lp_norm(p);
            let rhs = if s <= 0.5 {
                let grad = vector_lp_norm(&spectral.gradient(u)?, p);
                up.powf(1.0 - 2.0 * s) * grad.powf(2.0 * s)
            } else {
                up.powf(1.0 - s) * spectral.hessian_lp_norm(u, p)?.powf(s)
            };
            (lhs, rhs)
        }
        Inequality::Gn2 { s, p, q } => {
            let comps = spectral.pressure_gradient(u, s)?;
            let lhs = vector_lp_norm(&comps, q);
            let theta = gn2_theta(grid.dim(), s, p, q);
            let grad = vector_lp_norm(&spectral.gradient(u)?, p);
            (lhs, u.lp_norm(p).powf(1.0 - theta) * grad.powf(theta))
        }
        Inequality::Hls { s, p, q } => {
            let lhs = spectral.inv_frac_laplacian(u, s)?.lp_norm(q);
            (lhs, u.lp_norm(p))
        }
        Inequality::Hls2 { s, p, q, r } => {
            let v = match v {
                Some(v) => v,
                None => return domain("HLS2 probe needs a second field"),
            };
            grid.ensure_same(v.grid())?;
            let comps = spectral.pressure_gradient(v, s)?;
            let mags: Vec<f64> = (0..grid.len())
                .map(|i| u.values()[i].abs() * comps.iter().map(|c| c.values()[i].powi(2)).sum::<f64>().sqrt())
                .collect();
            let lhs = lp_norm(&mags, grid.cell_volume(), p);
            (lhs, u.lp_norm(q) * v.lp_norm(r))
        }
    };
    Ok(ProbeReport {
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

/// Pointwise `(-Δ)^s u(x)` from the singular-integral representation
/// `c_{d,s}/2 ∫ (2u(x) - u(x+y) - u(x-y)) |y|^{-d-2s} dy`.
///
/// `u` must vanish outside the ball of radius `support` around the origin.
/// The radial integral up to the point where `u(x±y)` vanishes uses the
/// substitution `r = R t^{1/(1-s)}`, which removes the endpoint singularity of
/// the second-difference integrand; the remaining tail is analytic.
pub fn singular_frac_laplacian<U>(u: &U, x: &Point, d: usize, s: f64, support: f64) -> Result<f64>
where
    U: Fn(&Point) -> f64,
{
    let c = riesz_constant(d, s, RieszKind::Plus)?;
    let ux = u(x);
    let radius = (norm2(x).sqrt() + support).max(1e-3);
    let dirs = half_sphere_rule(d);
    let second_diff = |r: f64| -> f64 {
        dirs.iter()
            .map(|(theta, w)| {
                let mut plus = *x;
                let mut minus = *x;
                for a in 0..d {
                    plus[a] += r * theta[a];
                    minus[a] -= r * theta[a];
                }
                w * (2.0 * ux - u(&plus) - u(&minus))
            })
            .sum()
    };
    // below r0 the second difference is rounding noise; its quadratic Taylor
    // model A r² is used instead
    let r0 = 1e-3 * radius;
    let curvature = second_diff(r0) / (r0 * r0);
    let q = 1.0 / (1.0 - s);
    let gl = GaussLegendre::new(32);
    let near = gl.integrate_composite(0.0, 1.0, 64, |t| {
        if t == 0.0 {
            return 0.0;
        }
        let r = radius * t.powf(q);
        let dr_dt = radius * q * t.powf(q - 1.0);
        let diff = if r < r0 { curvature * r * r } else { second_diff(r) };
        diff * r.powf(-1.0 - 2.0 * s) * dr_dt
    });
    // beyond the radius only 2u(x) survives
    let tail = 2.0 * ux * unit_sphere_area(d) / 2.0 * radius.powf(-2.0 * s) / (2.0 * s);
    // both sums cover half the sphere; the ± symmetry doubles them
    Ok(c * (near + tail))
}

/// Quadrature over a half sphere (one representative per ± pair), with weights
/// summing to half the sphere area.
fn half_sphere_rule(d: usize) -> Vec<(Point, f64)> {
    match d {
        1 => vec![([1.0, 0.0, 0.0], 1.0)],
        2 => {
            let m = 256;
            (0..m)
                .map(|j| {
                    let phi = PI * (j as f64 + 0.5) / m as f64;
                    ([phi.cos(), phi.sin(), 0.0], PI / m as f64)
                })
                .collect()
        }
        _ => {
            let gl = GaussLegendre::new(48);
            let m = 96;
            let mut out = Vec::with_capacity(48 * m);
            for (&z, &wz) in gl.nodes.iter().zip(&gl.weights) {
                let rho = (1.0 - z * z).sqrt();
                for j in 0..m {
                    let phi = PI * (j as f64 + 0.5) / m as f64;
                    out.push(([rho * phi.cos(), rho * phi.sin(), z], wz * PI / m as f64));
                }
            }
            out
        }
    }
}

/// Dirichlet form `‖∇(-Δ)^{-s/2} g‖₂²` from the symmetrised double sum
/// `(c_{d,1-s}/2) Σ_x Σ_{y≠x} (g(x)-g(y))² w(x-y) h^{2d}` on the torus.
///
/// `w` is the periodised kernel `|z|^{-d-2(1-s)}`; the excluded diagonal cell
/// is restored from a first-order Taylor model, `|∇g|²/d ∫_cell |z|^{2s-d}`.
pub fn dirichlet_form_double_sum(spectral: &Spectral, g: &Field, s: f64) -> Result<f64> {
    let grid = *spectral.grid();
    grid.ensure_same(g.grid())?;
    let d = grid.dim();
    let c = riesz_constant(d, 1.0 - s, RieszKind::Plus)?;
    let weights = periodised_weights(&grid, d as f64 + 2.0 * (1.0 - s));
    let h_d = grid.cell_volume();
    let n = grid.n();
    let vals = g.values();
    let mut off_diag = 0.0;
    for i in 0..grid.len() {
        let ii = grid.multi_index(i);
        for j in 0..grid.len() {
            if i == j {
                continue;
            }
            let jj = grid.multi_index(j);
            let mut shift = [0usize; 3];
            for a in 0..d {
                shift[a] = (ii[a] + n - jj[a]) % n;
            }
            let diff = vals[i] - vals[j];
            off_diag += diff * diff * weights[grid.flat_index(&shift)];
        }
    }
    off_diag *= h_d * h_d;
    let grad = spectral.gradient(g)?;
    let grad_sq: f64 = (0..grid.len())
        .map(|i| grad.iter().map(|c| c.values()[i].powi(2)).sum::<f64>())
        .sum::<f64>()
        * h_d;
    let cell = cube_power_integral(d, 0.5 * grid.spacing(), 2.0 * s - d as f64);
    let diagonal = grad_sq / d as f64 * cell;
    Ok(0.5 * c * (off_diag + diagonal))
}

/// `Σ_m |z + 2Lm|^{-power}` indexed by the node offset of `z`, with a
/// continuum estimate of the images beyond the summed shell.
fn periodised_weights(grid: &Grid, power: f64) -> Vec<f64> {
    let d = grid.dim();
    let n = grid.n();
    let h = grid.spacing();
    let box_len = 2.0 * grid.half_length();
    let images: i64 = 6;
    let reach = (images as f64 + 0.5) * box_len;
    let tail = unit_sphere_area(d) * reach.powf(d as f64 - power) / ((power - d as f64) * grid.box_volume());
    let span = 2 * images + 1;
    let count = (span as usize).pow(d as u32);
    (0..grid.len())
        .map(|flat| {
            let idx = grid.multi_index(flat);
            if idx[..d].iter().all(|&v| v == 0) {
                return 0.0;
            }
            let mut z = [0.0; 3];
            for a in 0..d {
                let k = if idx[a] < n / 2 { idx[a] as f64 } else { idx[a] as f64 - n as f64 };
                z[a] = k * h;
            }
            let mut sum = 0.0;
            for c in 0..count {
                let mut rem = c;
                let mut r2 = 0.0;
                for za in z.iter().take(d) {
                    let m = (rem % span as usize) as i64 - images;
                    rem /= span as usize;
                    let y = za + m as f64 * box_len;
                    r2 += y * y;
                }
                sum += r2.powf(-power / 2.0);
            }
            sum + tail
        })
        .collect()
}
