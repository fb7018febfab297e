use std::f64::consts::PI;

use fracpm::kernels::{bump, Mollifier};
use fracpm::quadrature::GaussLegendre;
use fracpm::spectral::probes::{dirichlet_form_double_sum, gn2_theta, singular_frac_laplacian};
use fracpm::spectral::{inequality_probe, Field, Grid, Inequality, Point, Spectral};
use proptest::prelude::*;

fn rel_max_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn plane_wave(grid: Grid, modes: [i32; 3], phase: f64) -> (Field, Point) {
    let kf = PI / grid.half_length();
    let k = [modes[0] as f64 * kf, modes[1] as f64 * kf, modes[2] as f64 * kf];
    let f = Field::from_fn(grid, |p| (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + phase).cos());
    (f, k)
}

fn pseudo_random_field(grid: Grid, seed: u64) -> Field {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let vals = (0..grid.len())
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    Field::from_values(grid, vals).unwrap()
}

#[test]
fn plane_waves_are_eigenfunctions() {
    for (d, modes) in [(1, [3, 0, 0]), (2, [2, -5, 0]), (3, [1, 2, -3])] {
        let grid = Grid::new(d, 32, 2.5).unwrap();
        let sp = Spectral::new(grid);
        let (u, k) = plane_wave(grid, modes, 0.3);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        for s in [0.25, 0.5, 0.75] {
            if d == 1 && s >= 0.5 {
                continue;
            }
            let inv = sp.inv_frac_laplacian(&u, s).unwrap();
            let expect: Vec<f64> = u.values().iter().map(|v| v * k2.powf(-s)).collect();
            assert!(rel_max_diff(inv.values(), &expect) < 1e-12);
            let fwd = sp.frac_laplacian(&u, s).unwrap();
            let expect: Vec<f64> = u.values().iter().map(|v| v * k2.powf(s)).collect();
            assert!(rel_max_diff(fwd.values(), &expect) < 1e-12);
            // ∇ of k^{-2s} cos(k·x + φ) is -k k^{-2s} sin(k·x + φ)
            let grad = sp.pressure_gradient(&u, s).unwrap();
            for a in 0..d {
                if k[a] == 0.0 {
                    assert!(grad[a].max_abs() < 1e-12);
                    continue;
                }
                let expect = Field::from_fn(grid, |p| {
                    -k[a] * k2.powf(-s) * (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + 0.3).sin()
                });
                assert!(rel_max_diff(grad[a].values(), expect.values()) < 1e-12, "d={d} s={s} a={a}");
            }
        }
    }
}

#[test]
fn constants_are_annihilated() {
    let grid = Grid::new(2, 16, 1.0).unwrap();
    let sp = Spectral::new(grid);
    let c = Field::constant(grid, 3.7);
    assert!(sp.inv_frac_laplacian(&c, 0.4).unwrap().max_abs() < 1e-14);
    assert!(sp.frac_laplacian(&c, 0.4).unwrap().max_abs() < 1e-14);
    for g in sp.pressure_gradient(&c, 0.4).unwrap() {
        assert!(g.max_abs() < 1e-14);
    }
}

#[test]
fn multipliers_invert_and_compose() {
    let grid = Grid::new(2, 64, 3.0).unwrap();
    let sp = Spectral::new(grid);
    let mut u = pseudo_random_field(grid, 7);
    let mean = u.integral() / grid.box_volume();
    u = u.map(|v| v - mean);
    for s in [0.2, 0.5, 0.9] {
        let back = sp.inv_frac_laplacian(&sp.frac_laplacian(&u, s).unwrap(), s).unwrap();
        assert!(rel_max_diff(back.values(), u.values()) < 1e-12, "s = {s}");
    }
    let (s, t) = (0.3, 0.45);
    let two = sp
        .inv_frac_laplacian(&sp.inv_frac_laplacian(&u, s).unwrap(), t)
        .unwrap();
    let one = sp.inv_frac_laplacian(&u, s + t).unwrap();
    assert!(rel_max_diff(two.values(), one.values()) < 1e-12);
}

#[test]
fn transform_round_trip() {
    for d in 1..=3 {
        let grid = Grid::new(d, 16, 1.0).unwrap();
        let sp = Spectral::new(grid);
        let u = pseudo_random_field(grid, d as u64);
        let back = sp.inverse(sp.forward(u.values()));
        assert!(rel_max_diff(&back, u.values()) < 1e-12);
    }
}

#[test]
fn norms_of_simple_fields() {
    let grid = Grid::new(2, 32, 2.0).unwrap();
    let sp = Spectral::new(grid);
    let one = Field::constant(grid, 1.0);
    assert!((one.lp_norm(1.0) - 16.0).abs() < 1e-12);
    let (wave, k) = plane_wave(grid, [3, 1, 0], -PI / 2.0);
    assert!((wave.lp_norm(2.0).powi(2) - 8.0).abs() < 1e-12);
    let s = 0.3;
    let kn = (k[0] * k[0] + k[1] * k[1]).sqrt();
    let semi = sp.seminorm(&wave, 1.0 - s).unwrap();
    assert!((semi - kn.powf(1.0 - s) * wave.lp_norm(2.0)).abs() < 1e-12 * semi);
    let df = sp.dirichlet_form(&wave, s).unwrap();
    assert!((df - semi * semi).abs() < 1e-12 * df);
}

#[test]
fn convolution_with_a_discrete_delta_is_the_identity() {
    let grid = Grid::new(2, 32, 1.0).unwrap();
    let sp = Spectral::new(grid);
    let u = pseudo_random_field(grid, 3);
    let mut delta = Field::zeros(grid);
    delta.values_mut()[grid.flat_index(&[16, 16])] = 1.0 / grid.cell_volume();
    let out = sp.convolve(&u, &delta).unwrap();
    assert!(rel_max_diff(out.values(), u.values()) < 1e-13);
    // one node off the origin shifts by one node
    let mut shifted = Field::zeros(grid);
    shifted.values_mut()[grid.flat_index(&[17, 16])] = 1.0 / grid.cell_volume();
    let out = sp.convolve(&u, &shifted).unwrap();
    let i = grid.flat_index(&[5, 9]);
    let j = grid.flat_index(&[4, 9]);
    assert!((out.values()[i] - u.values()[j]).abs() < 1e-13);
}

#[test]
fn mollifier_preserves_constants() {
    let grid = Grid::new(2, 64, 2.0).unwrap();
    let sp = Spectral::new(grid);
    let w = Mollifier::new(2, 0.3).unwrap().grid_field(&grid).unwrap();
    let out = sp.convolve(&Field::constant(grid, 1.0), &w).unwrap();
    for v in out.values() {
        assert!((v - 1.0).abs() < 1e-13);
    }
}

#[test]
fn gaussians_convolve_to_a_gaussian() {
    let grid = Grid::new(2, 128, 6.0).unwrap();
    let sp = Spectral::new(grid);
    let gauss = |var: f64| {
        move |p: &Point| (-(p[0] * p[0] + p[1] * p[1]) / (2.0 * var)).exp() / (2.0 * PI * var)
    };
    let a = Field::from_fn(grid, gauss(0.3));
    let b = Field::from_fn(grid, gauss(0.5));
    let out = sp.convolve(&a, &b).unwrap();
    let exact = Field::from_fn(grid, gauss(0.8));
    let err = out
        .values()
        .iter()
        .zip(exact.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(err < 1e-8, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn young_inequality(seed_a in 0u64..1000, seed_b in 0u64..1000, case in 0usize..3) {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let sp = Spectral::new(grid);
        let a = pseudo_random_field(grid, seed_a).map(|v| v + 0.5);
        let b = pseudo_random_field(grid, seed_b + 5000).map(|v| (v + 0.5).powi(3));
        let (p, q, r) = [(1.0, 1.0, 1.0), (1.0, 2.0, 2.0), (2.0, 2.0, f64::INFINITY)][case];
        let lhs = sp.convolve(&a, &b).unwrap().lp_norm(r);
        let rhs = a.lp_norm(p) * b.lp_norm(q);
        prop_assert!(lhs <= rhs * (1.0 + 1e-10));
    }
}

/// Smooth test field with compact support.
fn bump_field(grid: Grid, radius: f64) -> Field {
    Field::from_fn(grid, |p| bump((p[0] * p[0] + p[1] * p[1]) / (radius * radius)))
}

#[test]
fn gn1_ratio_is_dilation_invariant() {
    let grid = Grid::new(2, 256, 8.0).unwrap();
    let sp = Spectral::new(grid);
    for (s, p) in [(0.25, 2.0), (0.4, 4.0), (0.75, 2.0)] {
        let ratios: Vec<f64> = [0.75, 1.5, 3.0]
            .iter()
            .map(|&radius| {
                let u = bump_field(grid, radius);
                inequality_probe(&sp, &u, None, Inequality::Gn1 { s, p }).unwrap().ratio
            })
            .collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo < 1.05, "s={s} p={p}: {ratios:?}");
    }
}

#[test]
fn hls_on_a_single_mode() {
    let grid = Grid::new(2, 32, PI).unwrap();
    let sp = Spectral::new(grid);
    let (u, k) = plane_wave(grid, [2, 1, 0], 0.0);
    let s = 0.25;
    let q = 4.0;
    let p = 1.0 / (1.0 / q + 2.0 * s / 2.0);
    let rep = inequality_probe(&sp, &u, None, Inequality::Hls { s, p, q }).unwrap();
    let k2 = k[0] * k[0] + k[1] * k[1];
    let expect = k2.powf(-s) * u.lp_norm(q) / u.lp_norm(p);
    assert!((rep.ratio - expect).abs() < 1e-12 * expect);
    assert!(inequality_probe(&sp, &u, None, Inequality::Hls { s, p: 3.0, q }).is_err());
}

#[test]
fn gn2_exponent_and_validation() {
    assert!((gn2_theta(2, 0.25, 2.0, 2.0) - 0.5).abs() < 1e-15);
    let grid = Grid::new(2, 64, 4.0).unwrap();
    let sp = Spectral::new(grid);
    let u = bump_field(grid, 1.5);
    let rep = inequality_probe(&sp, &u, None, Inequality::Gn2 { s: 0.25, p: 2.0, q: 3.0 }).unwrap();
    assert!(rep.ratio.is_finite() && rep.ratio > 0.0);
    assert!(inequality_probe(&sp, &u, None, Inequality::Gn2 { s: 0.75, p: 2.0, q: 3.0 }).is_err());
    assert!(inequality_probe(&sp, &u, None, Inequality::Gn2 { s: 0.25, p: 2.0, q: 1.5 }).is_err());
}

#[test]
fn hls2_needs_second_field_and_relation() {
    let grid = Grid::new(2, 64, 4.0).unwrap();
    let sp = Spectral::new(grid);
    let u = bump_field(grid, 1.5);
    let v = bump_field(grid, 1.0);
    let s = 0.75;
    // 1/q + 1/r = 1/p + (2s-1)/d with p = 2, q = 4 gives 1/r = 0.5
    let which = Inequality::Hls2 { s, p: 2.0, q: 4.0, r: 2.0 };
    assert!(inequality_probe(&sp, &u, None, which).is_err());
    let rep = inequality_probe(&sp, &u, Some(&v), which).unwrap();
    assert!(rep.ratio.is_finite() && rep.ratio > 0.0);
    let bad = Inequality::Hls2 { s, p: 2.0, q: 4.0, r: 3.0 };
    assert!(inequality_probe(&sp, &u, Some(&v), bad).is_err());
}

#[test]
fn dirichlet_form_matches_double_sum() {
    for s in [0.3, 0.5, 0.7] {
        let grid = Grid::new(2, 16, 4.0).unwrap();
        let sp = Spectral::new(grid);
        let g = Field::from_fn(grid, |p| (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp());
        let spectral = sp.dirichlet_form(&g, s).unwrap();
        let double = dirichlet_form_double_sum(&sp, &g, s).unwrap();
        assert!((double / spectral - 1.0).abs() < 0.05, "s={s}: {double} vs {spectral}");
    }
}

/// `c ∫ |y|^{2s-d} u(x - y) dy` in the plane by polar quadrature around `x`.
/// The substitution `r = t^{1/(2s)}` absorbs the singular weight.
fn riesz_potential_oracle<U: Fn(f64, f64) -> f64>(u: &U, x: (f64, f64), s: f64, reach: f64) -> f64 {
    // c_{2,-s} = Γ(1-s)/(4^s π Γ(s))
    let c = gamma_oracle(1.0 - s) / (4f64.powf(s) * PI * gamma_oracle(s));
    let gl = GaussLegendre::new(32);
    let m = 128;
    let tmax = reach.powf(2.0 * s);
    let mut total = 0.0;
    for j in 0..m {
        let th = 2.0 * PI * (j as f64 + 0.5) / m as f64;
        let (ct, st) = (th.cos(), th.sin());
        total += gl.integrate_composite(0.0, tmax, 48, |t| {
            let r = t.powf(1.0 / (2.0 * s));
            // r^{2s-2} r dr = r^{2s-1} dr = dt / (2s)
            u(x.0 + r * ct, x.1 + r * st) / (2.0 * s)
        }) * 2.0 * PI
            / m as f64;
    }
    c * total
}

/// Lanczos-free gamma: Stirling series after shifting the argument upward.
fn gamma_oracle(x: f64) -> f64 {
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
fn riesz_potential_differences_match_quadrature() {
    let grid = Grid::new(2, 256, 16.0).unwrap();
    let sp = Spectral::new(grid);
    let var = 0.25;
    let gauss = move |x: f64, y: f64| (-(x * x + y * y) / (2.0 * var)).exp() / (2.0 * PI * var);
    let u = Field::from_fn(grid, |p| gauss(p[0], p[1]));
    let s = 0.5;
    let pot = sp.inv_frac_laplacian(&u, s).unwrap();
    let probes = [(0.0, 0.0), (0.5, 0.0), (1.0, 0.5), (2.0, -1.0), (0.0, 3.0)];
    let oracle: Vec<f64> = probes.iter().map(|&x| riesz_potential_oracle(&gauss, x, s, 6.0)).collect();
    let spectral: Vec<f64> = probes.iter().map(|&(x, y)| pot.interpolate(&[x, y])).collect();
    // the zero mode is a gauge, so compare differences from the first probe
    let scale = (oracle[0] - oracle[4]).abs();
    for k in 1..probes.len() {
        let a = spectral[k] - spectral[0];
        let b = oracle[k] - oracle[0];
        assert!((a - b).abs() <= 1e-2 * scale, "probe {k}: {a} vs {b}");
    }
}

#[test]
fn pressure_gradient_matches_differentiated_quadrature() {
    let grid = Grid::new(2, 256, 16.0).unwrap();
    let sp = Spectral::new(grid);
    let var = 0.25;
    let gauss = move |x: f64, y: f64| (-(x * x + y * y) / (2.0 * var)).exp() / (2.0 * PI * var);
    let u = Field::from_fn(grid, |p| gauss(p[0], p[1]));
    let s = 0.5;
    let grad = sp.pressure_gradient(&u, s).unwrap();
    let eps = 1e-3;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &(x, y) in &[(0.5, 0.0), (1.0, 1.0), (0.0, 2.0)] {
        let gx = (riesz_potential_oracle(&gauss, (x + eps, y), s, 6.0)
            - riesz_potential_oracle(&gauss, (x - eps, y), s, 6.0))
            / (2.0 * eps);
        let gy = (riesz_potential_oracle(&gauss, (x, y + eps), s, 6.0)
            - riesz_potential_oracle(&gauss, (x, y - eps), s, 6.0))
            / (2.0 * eps);
        let ax = grad[0].interpolate(&[x, y]);
        let ay = grad[1].interpolate(&[x, y]);
        worst = worst.max((ax - gx).abs()).max((ay - gy).abs());
        scale = scale.max(gx.abs()).max(gy.abs());
    }
    assert!(worst <= 1e-2 * scale, "{worst} vs {scale}");
}

#[test]
fn fractional_laplacian_matches_singular_integral_on_compact_bump() {
    let grid = Grid::new(2, 256, 8.0).unwrap();
    let sp = Spectral::new(grid);
    let radius = 3.0;
    let u_fn = move |p: &Point| bump((p[0] * p[0] + p[1] * p[1]) / (radius * radius));
    let u = Field::from_fn(grid, u_fn);
    let s = 0.5;
    let lap = sp.frac_laplacian(&u, s).unwrap();
    let mut spectral = Vec::new();
    let mut oracle = Vec::new();
    for &(i, j) in &[(128, 128), (136, 128), (144, 140), (152, 128), (128, 170), (100, 110)] {
        let flat = grid.flat_index(&[i, j]);
        let x = grid.point(flat);
        spectral.push(lap.values()[flat]);
        oracle.push(singular_frac_laplacian(&u_fn, &x, 2, s, radius).unwrap());
    }
    let err = rel_max_diff(&spectral, &oracle);
    assert!(err < 1e-2, "{err}: {spectral:?} vs {oracle:?}");
}

#[test]
fn binary_dump_round_trips() {
    let grid = Grid::new(3, 8, 0.5).unwrap();
    let u = pseudo_random_field(grid, 11);
    let mut buf = Vec::new();
    fracpm::spectral::io::write_binary(&u, &mut buf).unwrap();
    let back = fracpm::spectral::io::read_binary(buf.as_slice()).unwrap();
    assert_eq!(back.values(), u.values());
}
