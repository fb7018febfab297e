//! Gauss–Legendre rules and composite integration helpers.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrate `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Composite rule with `panels` equal panels on [a, b].
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * h;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Surface area of the unit sphere in R^d.
pub fn unit_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / statrs::function::gamma::gamma(h)
}

/// `∫_{[-a,a]^d} |z|^alpha dz` for `alpha > -d`.
///
/// The cube splits into `2d` pyramids with apex at the origin; the radial
/// factor integrates in closed form and leaves a smooth integral over one face.
pub fn cube_power_integral(d: usize, a: f64, alpha: f64) -> f64 {
    assert!(alpha > -(d as f64), "integrand not integrable at the origin");
    let radial = a / (alpha + d as f64);
    let face = if d == 1 {
        a.powf(alpha)
    } else {
        let gl = GaussLegendre::new(24);
        let panels = 4;
        let inner = |y2: f64| (a * a + y2).powf(alpha / 2.0);
        if d == 2 {
            gl.integrate_composite(-a, a, panels, |y| inner(y * y))
        } else {
            gl.integrate_composite(-a, a, panels, |y| {
                gl.integrate_composite(-a, a, panels, |z| inner(y * y + z * z))
            })
        }
    };
    2.0 * d as f64 * radial * face
}
