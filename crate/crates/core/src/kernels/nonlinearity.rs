//! The smoothed nonlinearity `f_σ` and its entropy density, stored as tables.

use std::io::Write;

use super::profiles::{bump_1d, bump_1d_derivative, plateau, plateau_derivative};
use crate::error::{domain, Result};
use crate::quadrature::GaussLegendre;

pub const DEFAULT_TABLE_SIZE: usize = 4096;

const MONOTONE_TOL: f64 = 1e-12;

/// The raw nonlinearity `f` before smoothing.
#[derive(Clone, Debug, PartialEq)]
pub enum RawNonlinearity {
    /// `f(u) = u^m` with `m ≥ 1`.
    Power(f64),
    /// Piecewise-linear `f` through `(u_i, f_i)`, `u_0 = 0`, `f_0 = 0`,
    /// extended linearly past the last node.
    Tabulated { u: Vec<f64>, f: Vec<f64> },
}

impl RawNonlinearity {
    pub fn validate(&self) -> Result<()> {
        match self {
            RawNonlinearity::Power(m) => {
                if !(*m >= 1.0 && m.is_finite()) {
                    return domain(format!("power-law exponent {m} must be ≥ 1"));
                }
            }
            RawNonlinearity::Tabulated { u, f } => {
                if u.len() < 2 || u.len() != f.len() {
                    return domain("tabulated nonlinearity needs ≥ 2 matching (u, f) pairs");
                }
                if u[0] != 0.0 || f[0] != 0.0 {
                    return domain("tabulated nonlinearity must start at (0, 0)");
                }
                if u.windows(2).any(|w| w[1] <= w[0]) {
                    return domain("tabulated u must be strictly increasing");
                }
                if f.windows(2).any(|w| w[1] < w[0]) || f.iter().any(|v| !v.is_finite()) {
                    return domain("tabulated f must be finite and nondecreasing");
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            RawNonlinearity::Power(m) => u.powf(*m),
            RawNonlinearity::Tabulated { u: us, f } => {
                let k = segment(us, u);
                f[k] + (u - us[k]) * (f[k + 1] - f[k]) / (us[k + 1] - us[k])
            }
        }
    }

    /// `f'(u)` for `u ≥ 0`.
    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            RawNonlinearity::Power(m) => {
                if *m == 1.0 {
                    1.0
                } else {
                    m * u.max(0.0).powf(m - 1.0)
                }
            }
            RawNonlinearity::Tabulated { u: us, f } => {
                let k = segment(us, u.max(0.0));
                (f[k + 1] - f[k]) / (us[k + 1] - us[k])
            }
        }
    }

    /// `∫_1^u f'(w)/w dw`, `-∞` at `u ≤ 0`.
    pub fn entropy_derivative(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self {
            RawNonlinearity::Power(m) => {
                if *m == 1.0 {
                    u.ln()
                } else {
                    m / (m - 1.0) * (u.powf(m - 1.0) - 1.0)
                }
            }
            RawNonlinearity::Tabulated { u: us, f } => {
                let (lo, hi, sign) = if u < 1.0 { (u, 1.0, -1.0) } else { (1.0, u, 1.0) };
                let mut g = 0.0;
                let mut a = lo;
                while a < hi {
                    let k = segment(us, a);
                    let end = if k + 2 < us.len() { us[k + 1].min(hi) } else { hi };
                    let slope = (f[k + 1] - f[k]) / (us[k + 1] - us[k]);
                    g += slope * (end / a).ln();
                    a = end;
                }
                sign * g
            }
        }
    }

    /// Entropy density `u ∫_1^u f'(w)/w dw − f(u)`, zero at `u ≤ 0`.
    pub fn entropy(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            RawNonlinearity::Power(m) if *m != 1.0 => (u.powf(*m) - m * u) / (m - 1.0),
            _ => u * self.entropy_derivative(u) - self.value(u),
        }
    }
}

fn segment(us: &[f64], u: f64) -> usize {
    match us.partition_point(|&v| v <= u) {
        0 => 0,
        p => (p - 1).min(us.len() - 2),
    }
}

/// Direct quadrature of the smoothed derivatives.
#[derive(Clone, Debug)]
struct Smoother {
    raw: RawNonlinearity,
    sigma: f64,
    rule: GaussLegendre,
}

impl Smoother {
    /// `(Γ_σ * (f' 1_{[0,∞)}))(u)` and its derivative.
    fn mollified(&self, u: f64) -> (f64, f64) {
        if u <= -self.sigma {
            return (0.0, 0.0);
        }
        let upper = (u / self.sigma).min(1.0);
        let sigma = self.sigma;
        let mut g = 0.0;
        let mut dg = 0.0;
        let panels = 8;
        let width = (upper + 1.0) / panels as f64;
        for p in 0..panels {
            let lo = -1.0 + p as f64 * width;
            let half = 0.5 * width;
            let mid = lo + half;
            for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let tau = mid + half * x;
                let fp = self.raw.derivative(u - sigma * tau);
                g += w * half * bump_1d(tau) * fp;
                dg += w * half * bump_1d_derivative(tau) * fp;
            }
        }
        (g, dg / sigma)
    }

    fn first(&self, u: f64) -> f64 {
        let (g, _) = self.mollified(u);
        g * plateau(self.sigma * u.abs())
    }

    fn first_and_second(&self, u: f64) -> (f64, f64) {
        let (g, dg) = self.mollified(u);
        let r = self.sigma * u.abs();
        let xi = plateau(r);
        let dxi = plateau_derivative(r) * self.sigma * u.signum();
        (g * xi, dg * xi + g * dxi)
    }

    fn integrate_first(&self, a: f64, b: f64, panels: usize) -> f64 {
        let gl = GaussLegendre::new(8);
        gl.integrate_composite(a, b, panels, |w| self.first(w))
    }
}

/// `f_σ`, `f_σ'`, `f_σ''` and the entropy density `h_σ` tabulated on
/// `[-σ, u_hi]`, with cubic Hermite interpolation between nodes.
///
/// Nodes are uniform on `[-σ, σ]` and on `[σ, u_hi]` separately, half of the
/// budget each, so the layer where the mollifier acts is resolved at any σ.
#[derive(Clone, Debug)]
pub struct NonlinearityTable {
    smoother: Smoother,
    nodes: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
    d2f: Vec<f64>,
    entropy: EntropyTable,
    inner_count: usize,
    compact: bool,
    h3_convex: bool,
}

impl NonlinearityTable {
    pub fn build(raw: RawNonlinearity, sigma: f64, u_max: f64, table_size: usize) -> Result<Self> {
        raw.validate()?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return domain(format!("smoothing parameter σ = {sigma} must be positive"));
        }
        if !(u_max > 0.0 && u_max.is_finite()) {
            return domain(format!("table range u_max = {u_max} must be positive"));
        }
        if table_size < 16 {
            return domain(format!("table size {table_size} too small"));
        }
        let support = 2.0 / sigma;
        let hi = u_max.min(support).max(2.0 * sigma);
        let compact = hi >= support;
        let inner_count = (table_size / 2).next_multiple_of(2);
        let outer_count = table_size - inner_count;
        let mut nodes = Vec::with_capacity(inner_count + outer_count + 1);
        for i in 0..=inner_count {
            nodes.push(-sigma + 2.0 * sigma * i as f64 / inner_count as f64);
        }
        for i in 1..=outer_count {
            nodes.push(sigma + (hi - sigma) * i as f64 / outer_count as f64);
        }
        let zero_node = inner_count / 2;
        nodes[zero_node] = 0.0;

        let smoother = Smoother {
            raw,
            sigma,
            rule: GaussLegendre::new(24),
        };
        let (df, d2f): (Vec<f64>, Vec<f64>) = nodes.iter().map(|&u| smoother.first_and_second(u)).unzip();
        if let Some(v) = df.iter().find(|v| !v.is_finite() || **v < -1e-14) {
            return domain(format!("smoothed derivative {v} is negative or non-finite"));
        }

        let gl = GaussLegendre::new(8);
        let mut f = vec![0.0; nodes.len()];
        for k in 1..nodes.len() {
            f[k] = f[k - 1] + gl.integrate(nodes[k - 1], nodes[k], |w| smoother.first(w));
        }
        let shift = f[zero_node];
        f.iter_mut().for_each(|v| *v -= shift);
        for w in f.windows(2) {
            if w[1] < w[0] - MONOTONE_TOL * w[0].abs().max(1.0) {
                return domain("smoothed nonlinearity fails to be monotone on the table");
            }
        }

        let entropy = EntropyTable::build(&smoother, nodes[zero_node + 1], hi, table_size, df[zero_node], d2f[zero_node]);

        let h3_convex = check_h3(&smoother.raw, hi);
        if !h3_convex {
            log::warn!("u ↦ u f(u) is not strictly convex on [0, {hi}]");
        }
        Ok(Self {
            smoother,
            nodes,
            f,
            df,
            d2f,
            entropy,
            inner_count,
            compact,
            h3_convex,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.smoother.sigma
    }

    pub fn raw(&self) -> &RawNonlinearity {
        &self.smoother.raw
    }

    /// Upper end of the tabulated range.
    pub fn u_hi(&self) -> f64 {
        *self.nodes.last().expect("non-empty table")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Whether `u ↦ u f(u)` was found strictly convex on the table range.
    pub fn h3_convex(&self) -> bool {
        self.h3_convex
    }

    fn locate(&self, u: f64) -> (usize, f64) {
        let sigma = self.smoother.sigma;
        let k = if u < sigma {
            let step = 2.0 * sigma / self.inner_count as f64;
            (((u + sigma) / step) as usize).min(self.inner_count - 1)
        } else {
            let outer = self.nodes.len() - 1 - self.inner_count;
            let step = (self.u_hi() - sigma) / outer as f64;
            (self.inner_count + ((u - sigma) / step) as usize).min(self.nodes.len() - 2)
        };
        let a = self.nodes[k];
        let b = self.nodes[k + 1];
        (k, ((u - a) / (b - a)).clamp(0.0, 1.0))
    }

    fn hermite(&self, k: usize, t: f64, v: &[f64], dv: &[f64]) -> f64 {
        let h = self.nodes[k + 1] - self.nodes[k];
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * v[k] + h10 * h * dv[k] + h01 * v[k + 1] + h11 * h * dv[k + 1]
    }

    /// `f_σ(u)`.
    pub fn value(&self, u: f64) -> f64 {
        let sigma = self.smoother.sigma;
        if u <= -sigma {
            return self.f[0];
        }
        let hi = self.u_hi();
        if u > hi {
            let top = *self.f.last().expect("non-empty table");
            return if self.compact {
                top
            } else {
                top + self.smoother.integrate_first(hi, u, 16)
            };
        }
        let (k, t) = self.locate(u);
        self.hermite(k, t, &self.f, &self.df)
    }

    /// `f_σ'(u)`.
    pub fn derivative(&self, u: f64) -> f64 {
        let sigma = self.smoother.sigma;
        if u <= -sigma {
            return 0.0;
        }
        if u > self.u_hi() {
            return if self.compact { 0.0 } else { self.smoother.first(u) };
        }
        let (k, t) = self.locate(u);
        self.hermite(k, t, &self.df, &self.d2f).max(0.0)
    }

    /// `f_σ''(u)`, linear between nodes.
    pub fn second_derivative(&self, u: f64) -> f64 {
        let sigma = self.smoother.sigma;
        if u <= -sigma {
            return 0.0;
        }
        if u > self.u_hi() {
            return if self.compact {
                0.0
            } else {
                self.smoother.first_and_second(u).1
            };
        }
        let (k, t) = self.locate(u);
        (1.0 - t) * self.d2f[k] + t * self.d2f[k + 1]
    }

    /// `g(u) = ∫_1^u f_σ'(w)/w dw` for `u > 0`, the derivative of `h_σ`.
    pub fn entropy_derivative(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let e = &self.entropy;
        if u > e.hi {
            let top = *e.g.last().expect("non-empty table");
            return if self.compact {
                top
            } else {
                top + GaussLegendre::new(16).integrate_composite(e.hi, u, 16, |w| self.smoother.first(w) / w)
            };
        }
        e.eval(u)
    }

    /// Entropy density `h_σ(u) = ∫_0^u ∫_1^v f_σ'(w)/w dw dv = u g(u) - f_σ(u)`,
    /// zero for `u ≤ 0`.
    pub fn entropy(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        u * self.entropy_derivative(u) - self.value(u)
    }

    /// Columns `u, f, df, d2f, entropy` at the table nodes.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "f", "df", "d2f", "entropy"])
            .map_err(crate::spectral::io::csv_err)?;
        for (k, &u) in self.nodes.iter().enumerate() {
            let h = self.entropy(u);
            w.write_record(&[
                u.to_string(),
                self.f[k].to_string(),
                self.df[k].to_string(),
                self.d2f[k].to_string(),
                h.to_string(),
            ])
            .map_err(crate::spectral::io::csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `g(u) = ∫_1^u f_σ'(w)/w dw` on geometrically spaced nodes, which suit its
/// logarithmic behaviour at small `u`. Below the first node `f_σ'` is replaced
/// by its linearisation and `g` is integrated in closed form.
#[derive(Clone, Debug)]
struct EntropyTable {
    lo: f64,
    hi: f64,
    log_ratio: f64,
    nodes: Vec<f64>,
    g: Vec<f64>,
    slope: Vec<f64>,
    slope_at_zero: f64,
    curvature_at_zero: f64,
}

impl EntropyTable {
    fn build(smoother: &Smoother, lo: f64, hi: f64, count: usize, slope_at_zero: f64, curvature_at_zero: f64) -> Self {
        let log_ratio = (hi / lo).ln() / count as f64;
        let mut nodes: Vec<f64> = (0..=count).map(|k| lo * (k as f64 * log_ratio).exp()).collect();
        nodes[count] = hi;
        let gl = GaussLegendre::new(8);
        let integrand = |w: f64| smoother.first(w) / w;
        let mut cum = vec![0.0; nodes.len()];
        for k in 1..nodes.len() {
            cum[k] = cum[k - 1] + gl.integrate(nodes[k - 1], nodes[k], integrand);
        }
        // value of the cumulative integral at u = 1
        let at_one = if 1.0 <= lo {
            -(slope_at_zero * lo.ln() + curvature_at_zero * (lo - 1.0))
        } else if 1.0 >= hi {
            cum[count] + GaussLegendre::new(16).integrate_composite(hi, 1.0, 64, integrand)
        } else {
            let k = nodes.partition_point(|&v| v <= 1.0) - 1;
            cum[k] + gl.integrate(nodes[k], 1.0, integrand)
        };
        let g = cum.iter().map(|c| c - at_one).collect();
        let slope = nodes.iter().map(|&u| integrand(u)).collect();
        Self {
            lo,
            hi,
            log_ratio,
            nodes,
            g,
            slope,
            slope_at_zero,
            curvature_at_zero,
        }
    }

    fn eval(&self, u: f64) -> f64 {
        if u < self.lo {
            return self.g[0] - self.slope_at_zero * (self.lo / u).ln() - self.curvature_at_zero * (self.lo - u);
        }
        let k = (((u / self.lo).ln() / self.log_ratio) as usize).min(self.nodes.len() - 2);
        let a = self.nodes[k];
        let h = self.nodes[k + 1] - a;
        let t = ((u - a) / h).clamp(0.0, 1.0);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.g[k]
            + (t3 - 2.0 * t2 + t) * h * self.slope[k]
            + (-2.0 * t3 + 3.0 * t2) * self.g[k + 1]
            + (t3 - t2) * h * self.slope[k + 1]
    }
}

/// Numerical check that `u ↦ u f(u)` is strictly convex on `(0, hi]`.
fn check_h3(raw: &RawNonlinearity, hi: f64) -> bool {
    let m = 512;
    let step = hi / m as f64;
    let phi = |u: f64| u * raw.value(u);
    (1..m).all(|i| {
        let u = i as f64 * step;
        phi(u + step) - 2.0 * phi(u) + phi(u - step) > 0.0
    })
}
