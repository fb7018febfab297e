use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::particles::{fill_gaussians, sample_initial, RngSpec, StreamTag};
use crate::spectral::{Field, Grid};

pub const SLICE_DIRECTIONS: usize = 64;
pub const PAIR_BINS_PER_AXIS: usize = 16;
/// Reference bins per grid spacing for the projected distribution functions.
const PROJECTION_REFINEMENT: f64 = 16.0;
/// Reference cells lighter than this fraction of the heaviest are skipped.
const NEGLIGIBLE_CELL: f64 = 1e-15;

/// Distances between an empirical measure and a reference density.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosMetrics {
    /// Mean over random directions of the 1-D Wasserstein-1 distance of the projections.
    pub sliced_w1: f64,
    /// Kolmogorov–Smirnov statistic of each coordinate marginal.
    pub ks: Vec<f64>,
    pub pairs: Option<PairDefects>,
}

/// Two-particle statistics on a coarse box binning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairDefects {
    /// L¹ distance between the empirical distribution of distinct pairs and
    /// the product of the empirical one-particle marginals. It depends only
    /// on the bin counts and equals `2(1 − Σ p_A²)/(N − 1)`.
    pub factorization: f64,
    /// L¹ distance between the empirical distribution of distinct pairs and
    /// the product of the binned reference density.
    pub reference: f64,
}

/// Reference density as cell masses: node `i` carries the uniform mass on
/// the cell of side `h` centred on it.
struct CellMasses {
    grid: Grid,
    cells: Vec<(usize, f64)>,
}

impl CellMasses {
    fn new(rho: &Field) -> Result<Self> {
        let grid = *rho.grid();
        let total: f64 = rho.values().iter().map(|v| v.max(0.0)).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Degenerate("reference density has no mass".into()));
        }
        let cutoff = NEGLIGIBLE_CELL * rho.max();
        let cells = rho
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > cutoff)
            .map(|(i, v)| (i, v / total))
            .collect();
        Ok(Self { grid, cells })
    }
}

/// CDF of `Σ_a U_a` with independent `U_a` uniform on `[-w_a/2, w_a/2]`.
fn uniform_sum_cdf(widths: &[f64], t: f64) -> f64 {
    let k = widths.len();
    let total: f64 = widths.iter().sum();
    let x = t + 0.5 * total;
    if x <= 0.0 {
        return 0.0;
    }
    if x >= total {
        return 1.0;
    }
    let mut acc = 0.0;
    for mask in 0..(1usize << k) {
        let shift: f64 = (0..k).filter(|a| mask >> a & 1 == 1).map(|a| widths[a]).sum();
        let y = x - shift;
        if y > 0.0 {
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * y.powi(k as i32);
        }
    }
    let factorial: f64 = (1..=k).map(|j| j as f64).product();
    (acc / (factorial * widths.iter().product::<f64>())).clamp(0.0, 1.0)
}

/// `∫ |F_emp − F_ref|` for sorted samples against a reference distribution
/// that is linear between `edges` with values `cdf`.
fn w1_against_piecewise_linear(sorted: &[f64], edges: &[f64], cdf: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut total = 0.0;
    let mut next = 0;
    for k in 0..edges.len() - 1 {
        let (a, b) = (edges[k], edges[k + 1]);
        let slope = (cdf[k + 1] - cdf[k]) / (b - a);
        let reference = |t: f64| cdf[k] + slope * (t - a);
        let mut left = a;
        loop {
            while next < sorted.len() && sorted[next] <= left {
                next += 1;
            }
            let right = if next < sorted.len() { sorted[next].min(b) } else { b };
            let level = next as f64 / n;
            let (ga, gb) = (reference(left) - level, reference(right) - level);
            let width = right - left;
            total += if ga * gb >= 0.0 {
                0.5 * width * (ga.abs() + gb.abs())
            } else {
                0.5 * width * (ga * ga + gb * gb) / (ga.abs() + gb.abs())
            };
            if right >= b {
                break;
            }
            left = right;
        }
    }
    total
}

fn sliced_w1(positions: &[f64], masses: &CellMasses, seed: u64) -> f64 {
    let grid = masses.grid;
    let d = grid.dim();
    let h = grid.spacing();
    let spec = RngSpec::new(seed, 0);
    let directions: Vec<[f64; 3]> = (0..SLICE_DIRECTIONS)
        .map(|j| {
            let mut g = [0.0; 3];
            if d == 1 {
                g[0] = 1.0;
                return g;
            }
            let mut rng = spec.stream(StreamTag::Directions, j as u64, 0);
            fill_gaussians(&mut rng, &mut g[..d]);
            let norm = g[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            g.iter_mut().for_each(|v| *v /= norm);
            g
        })
        .collect();
    let total: f64 = directions
        .par_iter()
        .map(|theta| {
            let project = |x: &[f64]| x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
            let mut samples: Vec<f64> = positions.chunks(d).map(project).collect();
            samples.sort_by(f64::total_cmp);
            let all_widths: Vec<f64> = theta[..d].iter().map(|t| t.abs() * h).collect();
            let widest = all_widths.iter().cloned().fold(0.0, f64::max);
            let widths: Vec<f64> = all_widths.into_iter().filter(|w| *w > 1e-3 * widest).collect();
            let spread: f64 = widths.iter().sum();
            let centres: Vec<(f64, f64)> = masses
                .cells
                .iter()
                .map(|&(i, m)| (project(&grid.point(i)[..d]), m))
                .collect();
            let lo = centres.iter().map(|c| c.0).fold(f64::INFINITY, f64::min) - spread;
            let hi = centres.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max) + spread;
            let lo = lo.min(samples[0]) - h;
            let hi = hi.max(*samples.last().expect("samples")) + h;
            let delta = h / PROJECTION_REFINEMENT;
            let bins = ((hi - lo) / delta).ceil() as usize;
            let mut density = vec![0.0; bins];
            for &(c, m) in &centres {
                let first = (((c - 0.5 * spread) - lo) / delta).floor().max(0.0) as usize;
                let last = ((((c + 0.5 * spread) - lo) / delta).ceil() as usize).min(bins);
                let mut below = uniform_sum_cdf(&widths, lo + first as f64 * delta - c);
                for (k, slot) in density.iter_mut().enumerate().take(last).skip(first) {
                    let above = uniform_sum_cdf(&widths, lo + (k + 1) as f64 * delta - c);
                    *slot += m * (above - below);
                    below = above;
                }
            }
            let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * delta).collect();
            let mut cdf = Vec::with_capacity(bins + 1);
            let mut acc = 0.0;
            cdf.push(0.0);
            for v in &density {
                acc += v;
                cdf.push(acc);
            }
            w1_against_piecewise_linear(&samples, &edges, &cdf)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total / SLICE_DIRECTIONS as f64
}

fn marginal_ks(positions: &[f64], masses: &CellMasses, axis: usize) -> f64 {
    let grid = masses.grid;
    let d = grid.dim();
    let n = grid.n();
    let h = grid.spacing();
    let mut column = vec![0.0; n];
    for &(i, m) in &masses.cells {
        column[grid.multi_index(i)[axis]] += m;
    }
    let mut below = vec![0.0; n + 1];
    for j in 0..n {
        below[j + 1] = below[j] + column[j];
    }
    let cdf = |x: f64| {
        let t = (x + grid.half_length()) / h + 0.5;
        let j = t.floor();
        if j < 0.0 {
            return 0.0;
        }
        let j = j as usize;
        if j >= n {
            return 1.0;
        }
        below[j] + column[j] * (t - j as f64)
    };
    let mut xs: Vec<f64> = positions.chunks(d).map(|p| p[axis]).collect();
    xs.sort_by(f64::total_cmp);
    let count = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / count).abs().max(((i + 1) as f64 / count - f).abs())
        })
        .fold(0.0, f64::max)
}

fn bin_of(grid: &Grid, x: &[f64]) -> usize {
    let width = 2.0 * grid.half_length() / PAIR_BINS_PER_AXIS as f64;
    x.iter().fold(0, |acc, &c| {
        let b = ((c + grid.half_length()) / width).floor().clamp(0.0, (PAIR_BINS_PER_AXIS - 1) as f64) as usize;
        acc * PAIR_BINS_PER_AXIS + b
    })
}

/// Reference mass per pair bin, splitting each cell by its overlap with the bins.
fn reference_bins(masses: &CellMasses) -> Vec<f64> {
    let grid = masses.grid;
    let d = grid.dim();
    let h = grid.spacing();
    let width = 2.0 * grid.half_length() / PAIR_BINS_PER_AXIS as f64;
    let mut q = vec![0.0; PAIR_BINS_PER_AXIS.pow(d as u32)];
    for &(i, m) in &masses.cells {
        let p = grid.point(i);
        // per axis: up to two (bin, fraction) pieces
        let mut pieces = [[(0usize, 0.0f64); 2]; 3];
        for a in 0..d {
            let lo = p[a] - 0.5 * h + grid.half_length();
            let hi = lo + h;
            let b0 = (lo / width).floor();
            let edge = (b0 + 1.0) * width;
            let wrap = |b: f64| (b as isize).rem_euclid(PAIR_BINS_PER_AXIS as isize) as usize;
            if hi <= edge {
                pieces[a] = [(wrap(b0), 1.0), (0, 0.0)];
            } else {
                let f = (edge - lo) / h;
                pieces[a] = [(wrap(b0), f), (wrap(b0 + 1.0), 1.0 - f)];
            }
        }
        for mask in 0..(1usize << d) {
            let mut flat = 0;
            let mut frac = m;
            for a in 0..d {
                let (b, f) = pieces[a][mask >> a & 1];
                flat = flat * PAIR_BINS_PER_AXIS + b;
                frac *= f;
            }
            if frac > 0.0 {
                q[flat] += frac;
            }
        }
    }
    q
}

fn pair_defects(positions: &[f64], masses: &CellMasses) -> PairDefects {
    let grid = masses.grid;
    let d = grid.dim();
    let count = positions.len() / d;
    let nf = count as f64;
    let mut counts = vec![0usize; PAIR_BINS_PER_AXIS.pow(d as u32)];
    for x in positions.chunks(d) {
        counts[bin_of(&grid, x)] += 1;
    }
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64 / nf).powi(2)).sum();
    let factorization = 2.0 * (1.0 - sum_sq) / (nf - 1.0);
    let q = reference_bins(masses);
    let active: Vec<usize> = (0..q.len()).filter(|&a| counts[a] > 0 || q[a] > 0.0).collect();
    let norm = nf * (nf - 1.0);
    let reference = active
        .par_iter()
        .map(|&a| {
            active
                .iter()
                .map(|&b| {
                    let na = counts[a] as f64;
                    let nb = counts[b] as f64;
                    let pair = (na * nb - if a == b { na } else { 0.0 }) / norm;
                    (pair - q[a] * q[b]).abs()
                })
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    PairDefects {
        factorization,
        reference,
    }
}

/// Distances between the empirical measure of `positions` (row-major,
/// dimension of `rho_ref`) and the normalised reference density. `k = 1`
/// gives sliced W1 and per-axis KS; `k = 2` adds the pair defects.
pub fn chaos_metrics(positions: &[f64], rho_ref: &Field, k: usize, seed: u64) -> Result<ChaosMetrics> {
    if !(1..=2).contains(&k) {
        return domain(format!("marginal order {k} not supported (1 or 2)"));
    }
    let d = rho_ref.grid().dim();
    if positions.len() < 2 * d || !positions.len().is_multiple_of(d) {
        return domain("need at least two particles as a row-major N × d array");
    }
    let masses = CellMasses::new(rho_ref)?;
    Ok(ChaosMetrics {
        sliced_w1: sliced_w1(positions, &masses, seed),
        ks: (0..d).map(|a| marginal_ks(positions, &masses, a)).collect(),
        pairs: (k == 2).then(|| pair_defects(positions, &masses)),
    })
}

/// The same metrics for `n` i.i.d. draws from the reference itself, the
/// Monte-Carlo floor any interacting system is compared against.
pub fn iid_floor(rho_ref: &Field, n: usize, k: usize, seed: u64) -> Result<ChaosMetrics> {
    let spec = RngSpec::new(seed ^ 0x5eed_f100_u64, StreamTag::Resample as u64);
    let draws = sample_initial(rho_ref, n, &spec)?;
    chaos_metrics(&draws, rho_ref, k, seed)
}
