use std::f64::consts::PI;

use fracpm::kernels::{
    bump, regularize_initial, riesz_constant, truncated_kernel, Cutoff, InitialShape, Mollifier,
    NonlinearityTable, ProblemParams, RawNonlinearity, RegularizedKernel, RieszKind,
};
use fracpm::quadrature::GaussLegendre;
use fracpm::spectral::{Field, Grid, Spectral};
use proptest::prelude::*;

/// Gamma by upward recurrence and the Stirling series.
fn gamma_oracle(x: f64) -> f64 {
    if x < 0.0 {
        // reflection: Γ(x) Γ(1-x) = π / sin(πx)
        return PI / ((PI * x).sin() * gamma_oracle(1.0 - x));
    }
    let mut shift = 1.0;
    let mut z = x;
    while z < 12.0 {
        shift *= z;
        z += 1.0;
    }
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z.powi(3)) + 1.0 / (1260.0 * z.powi(5))
        - 1.0 / (1680.0 * z.powi(7));
    ((z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series).exp() / shift
}

#[test]
fn riesz_constants_closed_forms() {
    let c = riesz_constant(2, 0.5, RieszKind::Minus).unwrap();
    assert!((c - 1.0 / (2.0 * PI)).abs() < 1e-14);
    let c = riesz_constant(3, 0.5, RieszKind::Minus).unwrap();
    assert!((c - 1.0 / (2.0 * PI * PI)).abs() < 1e-14);
    // 4^{1/2} Γ(3/2) / (π |Γ(-1/2)|) = 2 (√π/2) / (π 2√π) = 1/(2π)
    let c = riesz_constant(2, 0.5, RieszKind::Plus).unwrap();
    assert!((c - 1.0 / (2.0 * PI)).abs() < 1e-14);
}

proptest! {
    #[test]
    fn riesz_constants_match_gamma_oracle(d in 2usize..=3, s in 0.05f64..0.95) {
        let hd = d as f64 / 2.0;
        let minus = gamma_oracle(hd - s) / (4f64.powf(s) * PI.powf(hd) * gamma_oracle(s));
        let plus = 4f64.powf(s) * gamma_oracle(hd + s) / (PI.powf(hd) * gamma_oracle(-s).abs());
        let got_minus = riesz_constant(d, s, RieszKind::Minus).unwrap();
        let got_plus = riesz_constant(d, s, RieszKind::Plus).unwrap();
        prop_assert!((got_minus / minus - 1.0).abs() < 1e-10);
        prop_assert!((got_plus / plus - 1.0).abs() < 1e-10);
        prop_assert!(got_minus > 0.0 && got_plus > 0.0);
    }

    #[test]
    fn cutoff_is_bounded_and_lipschitz(zeta in 0.05f64..2.0, r in 0.0f64..100.0, dr in 1e-6f64..1.0) {
        let c = Cutoff::new(zeta).unwrap();
        let a = c.eval(r);
        let b = c.eval(r + dr);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() <= 2.0 * zeta * dr * (1.0 + 1e-12));
        if r <= 1.0 / zeta { prop_assert_eq!(a, 1.0); }
        if r >= 2.0 / zeta { prop_assert_eq!(a, 0.0); }
    }
}

#[test]
fn cutoff_discrete_lipschitz_on_grid() {
    let grid = Grid::new(2, 64, 8.0).unwrap();
    for zeta in [0.3, 0.5, 1.0] {
        let c = Cutoff::new(zeta).unwrap();
        let f = Field::from_fn(grid, |p| c.eval((p[0] * p[0] + p[1] * p[1]).sqrt()));
        let h = grid.spacing();
        let mut worst: f64 = 0.0;
        for i in 0..grid.n() - 1 {
            for j in 0..grid.n() - 1 {
                let v = f.values()[grid.flat_index(&[i, j])];
                let right = f.values()[grid.flat_index(&[i + 1, j])];
                let up = f.values()[grid.flat_index(&[i, j + 1])];
                worst = worst.max((v - right).abs() / h).max((v - up).abs() / h);
            }
        }
        assert!(worst <= 2.0 * zeta * (1.0 + 1e-12), "ζ={zeta}: {worst}");
    }
}

#[test]
fn mollifier_values_and_support() {
    let beta = 0.4;
    for d in 1..=3 {
        let w = Mollifier::new(d, beta).unwrap();
        // W_1(0) = e^{-1} / ∫ bump, with the mass from an independent radial rule
        let gl = GaussLegendre::new(64);
        let radial = gl.integrate_composite(0.0, 1.0, 64, |r| r.powi(d as i32 - 1) * (-1.0 / (1.0 - r * r)).exp());
        let area = [2.0, 2.0 * PI, 4.0 * PI][d - 1];
        let w1_0 = (-1.0f64).exp() / (area * radial);
        assert!((w.eval(&[0.0; 3]) - w1_0 / beta.powi(d as i32)).abs() < 1e-12 * w1_0 / beta.powi(d as i32));
        assert_eq!(w.eval(&[beta, 0.0, 0.0]), 0.0);
        if d > 1 {
            assert_eq!(w.eval(&[0.3, 0.3, 0.0]), 0.0);
        }
    }
}

#[test]
fn mollifier_grid_mass() {
    let grid = Grid::new(2, 128, 4.0).unwrap();
    let h = grid.spacing();
    // raw nodal samples of the bump converge slowly (its transform decays
    // like exp(-c sqrt(k))); the grid field is renormalised to unit mass
    for (widths, raw_tol) in [(4.0, 5e-3), (8.0, 1e-3), (16.0, 1e-5), (32.0, 1e-7)] {
        let w = Mollifier::new(2, widths * h).unwrap();
        let raw = w.raw_grid_mass(&grid);
        assert!((raw - 1.0).abs() < raw_tol, "width {widths} h: {raw}");
        let field = w.grid_field(&grid).unwrap();
        assert!((field.integral() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn linear_nonlinearity_against_direct_quadrature() {
    let sigma = 0.01;
    let table = NonlinearityTable::build(RawNonlinearity::Power(1.0), sigma, 2.0 / sigma, 4096).unwrap();
    let u = 0.5;
    let oracle = direct_f_sigma(|_| 1.0, sigma, u);
    assert!((table.value(u) - oracle).abs() < 1e-8, "{} vs {oracle}", table.value(u));
    assert!((table.value(u) - u).abs() <= sigma);
    assert_eq!(table.value(0.0), 0.0);
}

#[test]
fn quadratic_nonlinearity_derivative() {
    let sigma = 0.01;
    let table = NonlinearityTable::build(RawNonlinearity::Power(2.0), sigma, 2.0 / sigma, 4096).unwrap();
    for i in 0..=20 {
        let u = 0.1 + 0.9 * i as f64 / 20.0;
        // Γ_σ is symmetric, so away from 0 the smoothing of a linear f' is exact
        assert!((table.derivative(u) - 2.0 * u).abs() < 1e-9, "u = {u}");
    }
    let oracle = direct_f_sigma(|v| 2.0 * v, sigma, 0.7);
    assert!((table.value(0.7) - oracle).abs() < 1e-8);
}

#[test]
fn nonlinearity_table_invariants() {
    for (m, sigma) in [(1.0, 0.1), (1.5, 0.05), (3.0, 0.2)] {
        let table = NonlinearityTable::build(RawNonlinearity::Power(m), sigma, 2.0 / sigma, 2048).unwrap();
        for &u in table.nodes() {
            assert!(table.derivative(u) >= -1e-14);
        }
        for k in 0..100 {
            let u = 2.0 / sigma + 0.01 + k as f64;
            assert_eq!(table.derivative(u), 0.0);
        }
    }
}

#[test]
fn entropy_density_for_linear_case() {
    // for f(u) = u the entropy density tends to u log u - u
    let sigma = 0.01;
    let table = NonlinearityTable::build(RawNonlinearity::Power(1.0), sigma, 2.0 / sigma, 4096).unwrap();
    for u in [0.3f64, 1.0, 2.5] {
        let expect = u * u.ln() - u;
        assert!((table.entropy(u) - expect).abs() < 5.0 * sigma, "u = {u}");
    }
    // h'' = f_σ'/u is checked by second differences
    let eps = 1e-4;
    for u in [0.05, 0.5, 4.0] {
        let second = (table.entropy(u + eps) - 2.0 * table.entropy(u) + table.entropy(u - eps)) / (eps * eps);
        let expect = table.derivative(u) / u;
        assert!((second - expect).abs() < 1e-4 * expect.abs().max(1.0), "u = {u}: {second} vs {expect}");
    }
    assert_eq!(table.entropy(0.0), 0.0);
    assert!(table.entropy(1e-12).abs() < 1e-10);
}

/// `∫_0^u ∫ Γ_σ(w - v) f'(v) 1_{v ≥ 0} dv dw` for `u ≤ 1/σ` (cutoff inactive),
/// by nested composite Simpson rules with the test's own bump normalisation.
fn direct_f_sigma<F: Fn(f64) -> f64>(fprime: F, sigma: f64, u: f64) -> f64 {
    let simpson = |a: f64, b: f64, n: usize, g: &dyn Fn(f64) -> f64| {
        let h = (b - a) / n as f64;
        let mut acc = g(a) + g(b);
        for k in 1..n {
            acc += g(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    let raw_bump = |t: f64| bump(t * t);
    let mass = simpson(-1.0, 1.0, 4000, &raw_bump);
    let inner = |w: f64| {
        let lo = -1.0f64;
        let hi = (w / sigma).min(1.0);
        if hi <= lo {
            return 0.0;
        }
        simpson(lo, hi, 400, &|t: f64| raw_bump(t) * fprime(w - sigma * t)) / mass
    };
    simpson(0.0, u, 4000, &inner)
}

#[test]
fn regularized_initial_conserves_mass() {
    let grid = Grid::new(2, 128, 8.0).unwrap();
    let rho0 = InitialShape::Gaussian { std: 0.5 }.sample(&grid).unwrap();
    let mut prev = f64::INFINITY;
    for sigma in [0.4, 0.2, 0.1, 0.05] {
        let datum = regularize_initial(&rho0, sigma).unwrap();
        let m0 = rho0.integral();
        assert!((datum.rho0_sigma.integral() - m0).abs() < 1e-12 * m0);
        assert!(datum.kappa >= 1.0 - 1e-12);
        assert!(datum.kappa <= prev + 1e-12);
        prev = datum.kappa;
        assert!(datum.rho0_sigma.min() >= 0.0);
    }
    assert!(datum_margin_ok(&grid));
}

fn datum_margin_ok(grid: &Grid) -> bool {
    let rho0 = InitialShape::Gaussian { std: 0.5 }.sample(grid).unwrap();
    regularize_initial(&rho0, 0.1).unwrap().margin_mass_fraction() < 1e-8
}

#[test]
fn cutoff_inactive_for_interior_bump() {
    let grid = Grid::new(2, 64, 4.0).unwrap();
    let sp = Spectral::new(grid);
    let rho0 = InitialShape::Plateau { radius: 0.5 }.sample(&grid).unwrap();
    let sigma = 0.25;
    let datum = regularize_initial(&rho0, sigma).unwrap();
    // support of W_σ * ρ⁰ is inside |x| ≤ 1.25 < 1/σ
    let w = Mollifier::new(2, sigma).unwrap().grid_field(&grid).unwrap();
    let mut smoothed = sp.convolve(&rho0, &w).unwrap();
    smoothed.scale(datum.kappa);
    for (a, b) in datum.rho0_sigma.values().iter().zip(smoothed.values()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((datum.kappa - 1.0).abs() < 1e-12);
}

#[test]
fn degenerate_datum_is_rejected() {
    let grid = Grid::new(2, 16, 1.0).unwrap();
    assert!(regularize_initial(&Field::zeros(grid), 0.1).is_err());
}

fn params(s: f64, zeta: f64) -> ProblemParams {
    ProblemParams::new(2, s, 0.1, 0.5, zeta, 100).unwrap()
}

#[test]
fn truncated_kernel_is_below_riesz_kernel() {
    let grid = Grid::new(2, 128, 8.0).unwrap();
    let sp = Spectral::new(grid);
    let p = params(0.5, 0.5);
    let kt = truncated_kernel(&p, &sp).unwrap();
    let c = riesz_constant(2, 0.5, RieszKind::Minus).unwrap();
    for (i, v) in kt.values().iter().enumerate() {
        let x = grid.point(i);
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r >= grid.spacing() {
            assert!(*v <= c / r * (1.0 + 1e-12));
        }
        if r >= 2.0 / p.zeta {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn mollified_kernel_support_and_sign() {
    let grid = Grid::new(2, 128, 8.0).unwrap();
    let sp = Spectral::new(grid);
    let p = params(0.5, 0.5);
    let k = RegularizedKernel::build(&p, &sp).unwrap();
    assert!(!k.wraps());
    let vals = k.values().unwrap();
    for (i, v) in vals.values().iter().enumerate() {
        let x = grid.point(i);
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        assert!(v.is_finite());
        assert!(*v >= -1e-12);
        if r > 2.0 / p.zeta + p.zeta + grid.spacing() {
            assert!(v.abs() < 1e-12, "r = {r}: {v}");
        }
    }
}

#[test]
fn mollified_kernel_exceeds_riesz_kernel_inside_the_plateau() {
    // |x|^{2s-d} is subharmonic away from the origin, so averaging raises it
    let grid = Grid::new(2, 256, 8.0).unwrap();
    let sp = Spectral::new(grid);
    let p = params(0.5, 0.5);
    let k = RegularizedKernel::build(&p, &sp).unwrap();
    let c = riesz_constant(2, 0.5, RieszKind::Minus).unwrap();
    let i = grid.flat_index(&[128 + 16, 128]);
    assert!(k.values().unwrap().values()[i] > c / 1.0);
}

#[test]
fn mollified_kernel_against_brute_force_quadrature() {
    let grid = Grid::new(2, 256, 8.0).unwrap();
    let sp = Spectral::new(grid);
    let zeta = 0.5;
    let s = 0.5;
    let p = params(s, zeta);
    let k = RegularizedKernel::build(&p, &sp).unwrap();
    let c = riesz_constant(2, s, RieszKind::Minus).unwrap();
    let w = Mollifier::new(2, zeta).unwrap();
    let cut = Cutoff::new(zeta).unwrap();
    let gl = GaussLegendre::new(32);
    // ∫ K(y) ω(y) W_ζ(x₀ - y) dy in polar coordinates around x₀
    let probe = |x0: [f64; 2]| {
        let m = 256;
        (0..m)
            .map(|j| {
                let th = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                gl.integrate_composite(0.0, zeta, 32, |r| {
                    let y = [x0[0] + r * th.cos(), x0[1] + r * th.sin()];
                    let ry = (y[0] * y[0] + y[1] * y[1]).sqrt();
                    r * c * ry.powf(2.0 * s - 2.0) * cut.eval(ry) * w.eval_r2(r * r)
                }) * 2.0 * PI
                    / m as f64
            })
            .sum::<f64>()
    };
    for (i, j) in [(128 + 24, 128), (128 + 16, 128 + 16), (128 + 40, 128 - 8), (128 + 60, 128 + 20)] {
        let flat = grid.flat_index(&[i, j]);
        let x = grid.point(flat);
        let oracle = probe([x[0], x[1]]);
        let got = k.values().unwrap().values()[flat];
        assert!((got - oracle).abs() < 2e-3 * oracle, "({i},{j}): {got} vs {oracle}");
    }
}

#[test]
fn mollified_kernel_approaches_riesz_kernel() {
    let grid = Grid::new(2, 256, 10.0).unwrap();
    let sp = Spectral::new(grid);
    let c = riesz_constant(2, 0.5, RieszKind::Minus).unwrap();
    let flat = grid.flat_index(&[128 + 26, 128]);
    let r = grid.point(flat)[0];
    let exact = c / r;
    let errs: Vec<f64> = [1.0, 0.5, 0.25]
        .iter()
        .map(|&zeta| {
            let k = RegularizedKernel::build(&params(0.5, zeta), &sp).unwrap();
            (k.values().unwrap().values()[flat] - exact).abs() / exact
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    assert!(errs[2] < 2e-2);
}

#[test]
fn exact_kernel_reproduces_riesz_potential() {
    let grid = Grid::new(2, 64, 4.0).unwrap();
    let sp = Spectral::new(grid);
    let k = RegularizedKernel::build(&params(0.5, 0.0), &sp).unwrap();
    assert!(k.values().is_none());
    let u = Field::from_fn(grid, |p| (-(p[0] * p[0] + p[1] * p[1])).exp());
    let a = k.convolve(&sp, &u).unwrap();
    let b = sp.inv_frac_laplacian(&u, 0.5).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - y).abs() < 1e-13);
    }
    let ga = k.gradient_convolution(&sp, &u, false).unwrap();
    let gb = sp.pressure_gradient(&u, 0.5).unwrap();
    for (fa, fb) in ga.iter().zip(&gb) {
        for (x, y) in fa.values().iter().zip(fb.values()) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}

#[test]
fn wrap_around_is_flagged() {
    let grid = Grid::new(2, 64, 4.0).unwrap();
    let sp = Spectral::new(grid);
    let k = RegularizedKernel::build(&params(0.5, 0.4), &sp).unwrap();
    assert!(k.wraps());
}

proptest! {
    #[test]
    fn raw_entropy_second_derivative_is_f_prime_over_u(u in 0.05f64..5.0, m in 1.0f64..3.0) {
        let laws = [
            RawNonlinearity::Power(m),
            RawNonlinearity::Tabulated { u: vec![0.0, 0.5, 2.0, 3.0], f: vec![0.0, 0.4, 2.0, 2.5] },
        ];
        for law in laws {
            let e = 1e-4 * u;
            // stay inside one linear piece of the tabulated law
            let kinks = [0.5, 2.0, 3.0];
            prop_assume!(kinks.iter().all(|k| (u - k).abs() > 2.0 * e));
            let second = (law.entropy(u + e) - 2.0 * law.entropy(u) + law.entropy(u - e)) / (e * e);
            let expected = law.derivative(u) / u;
            prop_assert!((second - expected).abs() < 1e-4 * expected.max(1.0), "{law:?} at {u}: {second} vs {expected}");
            prop_assert!(law.entropy(1.0).abs() <= law.value(1.0) + 1e-12);
        }
    }
}
