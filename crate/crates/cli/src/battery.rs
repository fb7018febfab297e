//! Operator battery: exactness of the Fourier multipliers, cross-checks
//! against independent quadratures, the mollifier estimate and the
//! functional-inequality probes.

use std::f64::consts::PI;

use fracpm::kernels::{bump, Mollifier};
use fracpm::spectral::probes::{dirichlet_form_double_sum, singular_frac_laplacian};
use fracpm::spectral::{inequality_probe, vector_lp_norm, Field, Grid, Inequality, Point, Spectral};
use fracpm::Result;

use crate::output::Check;

fn rel_max_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn dot(k: &Point, p: &Point) -> f64 {
    k[0] * p[0] + k[1] * p[1] + k[2] * p[2]
}

/// Largest relative error of `(-Δ)^{±s}` and `∇(-Δ)^{-s}` on plane waves,
/// whose images are known in closed form.
pub fn plane_wave_error() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (d, modes) in [(1usize, [3, 0, 0]), (2, [2, -5, 0]), (3, [1, 2, -3])] {
        let grid = Grid::new(d, 32, 2.5)?;
        let sp = Spectral::new(grid);
        let kf = PI / grid.half_length();
        let k = [modes[0] as f64 * kf, modes[1] as f64 * kf, modes[2] as f64 * kf];
        let k2 = dot(&k, &k);
        let phase = 0.3;
        let u = Field::from_fn(grid, |p| (dot(&k, p) + phase).cos());
        for s in [0.25, 0.5, 0.75] {
            if d == 1 && s >= 0.5 {
                continue;
            }
            for (image, factor) in [(sp.frac_laplacian(&u, s)?, k2.powf(s)), (sp.inv_frac_laplacian(&u, s)?, k2.powf(-s))] {
                let expect: Vec<f64> = u.values().iter().map(|v| v * factor).collect();
                worst = worst.max(rel_max_diff(image.values(), &expect));
            }
            let grad = sp.pressure_gradient(&u, s)?;
            let sines = Field::from_fn(grid, |p| (dot(&k, p) + phase).sin());
            let mut got = Vec::new();
            let mut expect = Vec::new();
            for (a, g) in grad.iter().enumerate() {
                got.extend_from_slice(g.values());
                expect.extend(sines.values().iter().map(|v| -k[a] * k2.powf(-s) * v));
            }
            worst = worst.max(rel_max_diff(&got, &expect));
        }
    }
    Ok(worst)
}

/// Mean-zero trigonometric test field with energy spread over many modes.
fn multi_mode_field(grid: Grid) -> Field {
    let kf = PI / grid.half_length();
    Field::from_fn(grid, |p| {
        (1..=12)
            .map(|j| {
                let j = j as f64;
                let (a, b) = (j % 4.0 + 1.0, (7.0 * j) % 9.0 - 4.0);
                (kf * (a * p[0] + b * p[1]) + 0.37 * j).cos() / j
            })
            .sum::<f64>()
    })
}

/// Largest relative error of `(-Δ)^{-s}(-Δ)^{s} u = u` on a mean-zero field.
pub fn composition_error() -> Result<f64> {
    let grid = Grid::new(2, 64, 3.0)?;
    let sp = Spectral::new(grid);
    let u = multi_mode_field(grid);
    let mut worst: f64 = 0.0;
    for s in [0.25, 0.5, 0.75] {
        let back = sp.inv_frac_laplacian(&sp.frac_laplacian(&u, s)?, s)?;
        worst = worst.max(rel_max_diff(back.values(), u.values()));
        let back = sp.frac_laplacian(&sp.inv_frac_laplacian(&u, s)?, s)?;
        worst = worst.max(rel_max_diff(back.values(), u.values()));
    }
    Ok(worst)
}

/// Relative L∞ distance, over a set of sample nodes, between the spectral
/// `(-Δ)^s` of a compact bump and the singular-integral formula. The box is
/// wide enough that the periodic images of the bump, which shift the torus
/// operator by a near-constant, stay below the tolerance.
pub fn singular_integral_error(s: f64) -> Result<f64> {
    let grid = Grid::new(2, 256, 16.0)?;
    let sp = Spectral::new(grid);
    let radius = 3.0;
    let u_fn = move |p: &Point| bump((p[0] * p[0] + p[1] * p[1]) / (radius * radius));
    let lap = sp.frac_laplacian(&Field::from_fn(grid, u_fn), s)?;
    let points = [
        (0.0, 0.0),
        (0.5, 0.0),
        (1.0, 0.75),
        (1.5, 0.0),
        (0.0, 2.625),
        (-1.75, -1.125),
        (2.375, 1.375),
        (0.0, 3.0),
        (3.5, 0.0),
        (-2.375, -2.375),
    ];
    let h = grid.spacing();
    let index = |c: f64| ((c + grid.half_length()) / h).round() as usize;
    let mut spectral = Vec::new();
    let mut oracle = Vec::new();
    for (x, y) in points {
        let flat = grid.flat_index(&[index(x), index(y)]);
        spectral.push(lap.values()[flat]);
        oracle.push(singular_frac_laplacian(&u_fn, &grid.point(flat), 2, s, radius)?);
    }
    Ok(rel_max_diff(&spectral, &oracle))
}

/// Largest relative gap between the spectral Dirichlet form and its
/// real-space double sum.
pub fn dirichlet_form_error() -> Result<f64> {
    let grid = Grid::new(2, 16, 4.0)?;
    let sp = Spectral::new(grid);
    let g = Field::from_fn(grid, |p| (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp());
    let mut worst: f64 = 0.0;
    for s in [0.3, 0.5, 0.7] {
        let spectral = sp.dirichlet_form(&g, s)?;
        let double = dirichlet_form_double_sum(&sp, &g, s)?;
        worst = worst.max((double / spectral - 1.0).abs());
    }
    Ok(worst)
}

/// Dyadic widths of the mollifier estimate.
pub const MOLLIFIER_WIDTHS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

/// Three smooth fields on `[-π, π)²` with lacunary spectra (amplitude `2^{-j}`
/// at frequency `2^j`), which make the first-order mollifier estimate sharp
/// at every width between the box and grid scales.
pub fn lacunary_fields(grid: Grid) -> Vec<Field> {
    let terms = 8;
    let a = |j: i32| 0.5f64.powi(j);
    let k = |j: i32| 2f64.powi(j);
    vec![
        Field::from_fn(grid, move |p| (0..terms).map(|j| a(j) * (k(j) * p[0]).cos()).sum()),
        Field::from_fn(grid, move |p| (0..terms).map(|j| a(j) * (k(j) * (p[0] + p[1])).sin()).sum()),
        Field::from_fn(grid, move |p| {
            (0..terms)
                .map(|j| a(j) * (k(j) * p[0] + 0.7 * j as f64).cos() * (k(j) * p[1]).cos())
                .sum()
        }),
    ]
}

/// `‖W_β * u − u‖_p / (β ‖∇u‖_p)` for every field, `p ∈ {1, 2, 4}` and width,
/// as `[field][p][width]`.
pub fn mollifier_ratios() -> Result<Vec<Vec<Vec<f64>>>> {
    let grid = Grid::new(2, 1024, PI)?;
    let sp = Spectral::new(grid);
    let kernels = MOLLIFIER_WIDTHS
        .iter()
        .map(|&b| Mollifier::new(2, b)?.grid_field(&grid))
        .collect::<Result<Vec<_>>>()?;
    lacunary_fields(grid)
        .iter()
        .map(|u| {
            let grad = sp.gradient(u)?;
            let smoothed = kernels.iter().map(|w| sp.convolve(u, w)).collect::<Result<Vec<_>>>()?;
            [1.0, 2.0, 4.0]
                .iter()
                .map(|&p| {
                    let gn = vector_lp_norm(&grad, p);
                    smoothed
                        .iter()
                        .zip(MOLLIFIER_WIDTHS)
                        .map(|(v, b)| Ok(v.zip_with(u, |x, y| x - y)?.lp_norm(p) / (b * gn)))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `max / min − 1` of a list of positive ratios.
pub fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    hi / lo - 1.0
}

/// Radii of the dilated bumps fed to the inequality probes.
pub const PROBE_RADII: [f64; 3] = [0.75, 1.5, 3.0];

/// Each probed inequality with its ratios over dilated bumps.
pub fn inequality_ratios() -> Result<Vec<(String, Vec<f64>)>> {
    let grid = Grid::new(2, 256, 8.0)?;
    let sp = Spectral::new(grid);
    let bump_field = |radius: f64| Field::from_fn(grid, |p| bump((p[0] * p[0] + p[1] * p[1]) / (radius * radius)));
    let cases = [
        ("gn1 s=0.25 p=2", Inequality::Gn1 { s: 0.25, p: 2.0 }),
        ("gn1 s=0.75 p=2", Inequality::Gn1 { s: 0.75, p: 2.0 }),
        ("gn2 s=0.25 p=2 q=3", Inequality::Gn2 { s: 0.25, p: 2.0, q: 3.0 }),
        ("hls s=0.25 p=2 q=4", Inequality::Hls { s: 0.25, p: 2.0, q: 4.0 }),
        ("hls2 s=0.75 p=2 q=4 r=2", Inequality::Hls2 { s: 0.75, p: 2.0, q: 4.0, r: 2.0 }),
    ];
    cases
        .iter()
        .map(|&(name, which)| {
            let ratios = PROBE_RADII
                .iter()
                .map(|&r| {
                    let u = bump_field(r);
                    let v = bump_field(0.5 * r);
                    Ok(inequality_probe(&sp, &u, Some(&v), which)?.ratio)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((name.to_string(), ratios))
        })
        .collect()
}

/// Largest tolerated spread of a probe ratio under dilation.
pub const PROBE_SPREAD: f64 = 0.25;

/// Battery outcome: the checks and the raw ratios behind them.
#[derive(Clone, Debug)]
pub struct Battery {
    pub checks: Vec<Check>,
    /// `[field][p][width]` mollifier ratios.
    pub mollifier: Vec<Vec<Vec<f64>>>,
    /// Probe name with its ratios over [`PROBE_RADII`].
    pub probes: Vec<(String, Vec<f64>)>,
}

/// Runs the full battery.
pub fn operator_battery() -> Result<Battery> {
    let mut checks = vec![
        Check::at_most("plane-wave eigenvalues", plane_wave_error()?, 1e-12),
        Check::at_most("multiplier composition", composition_error()?, 1e-12),
    ];
    for s in [0.25, 0.5, 0.75] {
        checks.push(Check::at_most(format!("singular integral s={s}"), singular_integral_error(s)?, 1e-2));
    }
    let mollifier = mollifier_ratios()?;
    let worst = mollifier.iter().flatten().map(|r| spread(r)).fold(0.0, f64::max);
    checks.push(Check::at_most("mollifier ratio spread", worst, 0.25));
    checks.push(Check::at_most("dirichlet form double sum", dirichlet_form_error()?, 0.05));
    let probes = inequality_ratios()?;
    for (name, ratios) in &probes {
        let finite = ratios.iter().all(|r| r.is_finite() && *r > 0.0);
        let value = if finite { spread(ratios) } else { f64::INFINITY };
        checks.push(Check::at_most(format!("{name} dilation spread"), value, PROBE_SPREAD));
    }
    Ok(Battery {
        checks,
        mollifier,
        probes,
    })
}
