use fracpm::chaos::*;
use fracpm::kernels::{InitialShape, ProblemParams, RawNonlinearity};
use fracpm::particles::{CoupledEnsemble, DriftMode, RngSpec};
use fracpm::pde::TransportScheme;
use fracpm::spectral::{Field, Grid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn small_config(coupling: Coupling) -> CouplingConfig {
    CouplingConfig {
        params: ProblemParams::new(2, 0.5, 0.1, 0.5, 0.5, 128).unwrap(),
        grid: Grid::new(2, 64, 6.0).unwrap(),
        raw: RawNonlinearity::Power(1.0),
        initial: InitialShape::Gaussian { std: 0.6 },
        horizon: 0.1,
        dt: 5e-3,
        seed: 11,
        mode: DriftMode::SharedField,
        coupling,
        oracle: false,
        table_size: 2048,
        scheme: TransportScheme::Muscl,
    }
}

#[test]
fn schedule_meets_both_constraints_with_equality() {
    let sched = Schedule::new(2, 0.5, 3.0, 2.0, vec![256, 512, 1024, 2048]).unwrap();
    for (n, beta, zeta) in sched.points() {
        let lhs = beta.powf(-13.0);
        let rhs = 3.0 * (n as f64).ln();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs, "β constraint at N = {n}");
        let lhs = zeta.powf(-2.0);
        let rhs = 2.0 * (n as f64).powf(0.25);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs, "ζ constraint at N = {n}");
        sched.check(n, beta, zeta).unwrap();
        assert!(sched.check(n, 0.99 * beta, zeta).is_err());
        assert!(sched.check(n, beta, 0.99 * zeta).is_err());
        // larger widths satisfy the inequalities strictly
        sched.check(n, 1.01 * beta, 1.01 * zeta).unwrap();
    }
    assert!(Schedule::new(2, 0.5, 0.0, 1.0, vec![256]).is_err());
    assert!(Schedule::new(2, 1.0, 1.0, 1.0, vec![256]).is_err());
    assert!(Schedule::new(2, 0.5, 1.0, 1.0, vec![1]).is_err());
}

#[test]
fn rate_fit_is_exact_on_power_laws() {
    let xs = [0.125, 0.25, 0.5, 1.0, 2.0];
    for p in [1.0, 0.5, -0.25] {
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(p)).collect();
        let fit = rate_fit(&xs, &ys).unwrap();
        assert!((fit.slope - p).abs() < 1e-14, "slope {} for {p}", fit.slope);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-13);
        assert!((fit.r2 - 1.0).abs() < 1e-14);
        assert!(fit.slope_half_width < 1e-7);
        assert_eq!(fit.points, 5);
    }
    assert!(rate_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    assert!(rate_fit(&[1.0, 2.0, 0.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(rate_fit(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]).is_err());
}

#[test]
fn rate_fit_interval_matches_textbook_regression() {
    // ln y = 1 + 2 ln x + noise, slope CI by hand: t_{0.975, 2} = 4.302653
    let lx = [0.0f64, 1.0, 2.0, 3.0];
    let noise = [0.1, -0.1, -0.1, 0.1];
    let xs: Vec<f64> = lx.iter().map(|v| v.exp()).collect();
    let ys: Vec<f64> = lx.iter().zip(noise).map(|(v, e)| (1.0 + 2.0 * v + e).exp()).collect();
    let fit = rate_fit(&xs, &ys).unwrap();
    assert!((fit.slope - 2.0).abs() < 1e-12);
    // residuals of the fit: sxx = 5, sse = 0.04 - (sxy_noise)^2/sxx with sxy_noise = 0
    let se = (0.04f64 / 2.0 / 5.0).sqrt();
    assert!((fit.slope_half_width - 4.302652729911275 * se).abs() < 1e-9);
}

#[test]
fn identical_coupling_gives_zero_gaps_bit_exactly() {
    let run = run_coupled(&small_config(Coupling::Identical), 4).unwrap();
    let f = &run.functionals;
    assert!(f.e1.iter().chain(&f.e2).chain(&f.e_total).all(|v| *v == 0.0));
    for ens in &run.ensembles {
        assert_eq!(ens.x, ens.xbar);
        assert_eq!(ens.x, ens.xhat);
    }
    assert!(run.intermediate.is_none() && run.macro_density.is_none());
}

#[test]
fn coupled_functionals_obey_triangle_inequality_and_grow() {
    let run = run_coupled(&small_config(Coupling::Dynamics), 4).unwrap();
    let f = &run.functionals;
    assert_eq!(f.times.len(), 21);
    assert!((f.times.last().unwrap() - 0.1).abs() < 1e-15);
    for i in 0..f.times.len() {
        assert!(f.e_total[i] <= f.e1[i] + f.e2[i] + 1e-12);
    }
    for w in f.e_total.windows(2).chain(f.e1.windows(2)).chain(f.e2.windows(2)) {
        assert!(w[1] >= w[0]);
    }
    for r in &f.per_replica {
        assert!(r[2] <= r[0] + r[1] + 1e-12);
    }
    for ens in &run.ensembles {
        let g = pathwise_gaps(ens);
        assert!(g[2] <= g[0] + g[1] + 1e-12);
    }
    assert!(f.final_e1().0 > 0.0 && f.final_e2().0 > 0.0);
}

#[test]
fn measure_errors_needs_four_replicas() {
    assert!(measure_errors(&small_config(Coupling::Identical), 3).is_err());
    let f = measure_errors(&small_config(Coupling::Identical), 4).unwrap();
    assert_eq!(f.replicas, 4);
}

#[test]
fn oracle_gap_is_small_against_the_error() {
    let mut cfg = small_config(Coupling::Dynamics);
    cfg.oracle = true;
    let f = measure_errors(&cfg, 4).unwrap();
    let (gap, _) = f.oracle_gap.unwrap();
    assert!(gap < 0.1 * f.final_total().0, "gap {gap} vs {:?}", f.final_total());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pathwise_gaps_ignore_joint_relabelling(seed in 0u64..1000, shift in 0usize..50) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n = 50;
        let draw = |rng: &mut ChaCha20Rng| -> Vec<f64> { (0..2 * n).map(|_| rng.random_range(-3.0..3.0)).collect() };
        let mut ens = CoupledEnsemble::from_positions(draw(&mut rng), 2, RngSpec::new(seed, 0)).unwrap();
        ens.xbar = draw(&mut rng);
        ens.xhat = draw(&mut rng);
        let before = pathwise_gaps(&ens);
        let perm: Vec<usize> = (0..n).map(|i| (7 * i + shift) % n).collect();
        ens.relabel(&perm).unwrap();
        prop_assert_eq!(before, pathwise_gaps(&ens));
        prop_assert!(before[2] <= before[0] + before[1] + 1e-12);
    }
}

fn gaussian_field(grid: Grid, std: f64) -> Field {
    let c = 1.0 / (2.0 * std::f64::consts::PI * std * std);
    Field::from_fn(grid, |p| c * (-(p[0] * p[0] + p[1] * p[1]) / (2.0 * std * std)).exp())
}

fn gaussian_draws(n: usize, std: f64, rng: &mut ChaCha20Rng) -> Vec<f64> {
    (0..2 * n)
        .map(|_| {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect()
}

#[test]
fn iid_sliced_w1_decays_like_inverse_root_n() {
    let grid = Grid::new(2, 128, 6.0).unwrap();
    let rho = gaussian_field(grid, 0.8);
    let ns = [256usize, 1024, 4096, 16384];
    let mut w1 = Vec::new();
    for &n in &ns {
        let mut total = 0.0;
        for rep in 0..8u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(1000 * n as u64 + rep);
            total += chaos_metrics(&gaussian_draws(n, 0.8, &mut rng), &rho, 1, 3).unwrap().sliced_w1;
        }
        w1.push(total / 8.0);
    }
    assert!(w1.windows(2).all(|w| w[1] < w[0]), "{w1:?}");
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fit = rate_fit(&xs, &w1).unwrap();
    assert!((-0.65..=-0.35).contains(&fit.slope), "slope {}", fit.slope);
}

#[test]
fn iid_ks_and_pair_defects_sit_at_the_floor() {
    let grid = Grid::new(2, 128, 6.0).unwrap();
    let rho = gaussian_field(grid, 0.8);
    let n = 2048;
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let m = chaos_metrics(&gaussian_draws(n, 0.8, &mut rng), &rho, 2, 3).unwrap();
    // the one-sample KS statistic exceeds 1.63/√N with probability 1%
    for ks in &m.ks {
        assert!(*ks < 1.63 / (n as f64).sqrt(), "ks {ks}");
    }
    let floor = iid_floor(&rho, n, 2, 3).unwrap();
    let (a, b) = (m.pairs.unwrap(), floor.pairs.unwrap());
    assert!(a.factorization < 1.5 * b.factorization);
    assert!(a.reference < 1.5 * b.reference && b.reference < 1.5 * a.reference);
    assert!(chaos_metrics(&[0.0; 8], &rho, 3, 0).is_err());
}
