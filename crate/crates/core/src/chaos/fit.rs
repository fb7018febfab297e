use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{domain, Result};

/// Least-squares fit of `log y = slope · log x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Half-width of the 95% confidence interval of the slope
    /// (zero for two points or an exact fit).
    pub slope_half_width: f64,
    pub points: usize,
}

impl RateFit {
    pub fn slope_interval(&self) -> (f64, f64) {
        (self.slope - self.slope_half_width, self.slope + self.slope_half_width)
    }
}

pub fn rate_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return domain("rate fit needs matching x and y lists");
    }
    if xs.len() < 3 {
        return domain(format!("rate fit needs at least 3 points, got {}", xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return domain("rate fit needs finite positive values");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return domain("rate fit needs at least two distinct x values");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let dof = n - 2.0;
    let t = StudentsT::new(0.0, 1.0, dof).expect("positive dof").inverse_cdf(0.975);
    let slope_half_width = t * (sse / dof / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        r2,
        slope_half_width,
        points: lx.len(),
    })
}
