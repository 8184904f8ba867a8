use serde::{Deserialize, Serialize};

use crate::error::{MtpError, Result};
use crate::space::{rasterize, Aabb, Ball, RasterMode};

/// Synthetic resonant set and sampling grids for [`estimate_kappa`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaInput {
    /// Closed axis-parallel pieces of `R` (points have `lo == hi`).
    pub resonant: Vec<Aabb>,
    /// Points of `R` to center balls at.
    pub samples: Vec<Vec<f64>>,
    /// `g(r) = r^{g_exponent}`.
    pub g_exponent: f64,
    pub eta_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub resolution: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub kappa: f64,
    pub raw_slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub points: usize,
    pub warning: Option<String>,
}

const KAPPA_CEIL: f64 = 1.0 - 1e-3;

/// Fits `m(B(x,r) ∩ Δ(R,η)) ≈ C g(η)^{1-κ} g(r)^κ` over `η <= r` by least
/// squares in log space, measuring intersections by inner rasterization.
pub fn estimate_kappa(input: &KappaInput) -> Result<KappaEstimate> {
    if input.eta_grid.len() < 4 || input.r_grid.len() < 4 {
        return Err(MtpError::Precondition("eta and r grids need at least 4 points each".into()));
    }
    if input.samples.is_empty() || input.resonant.is_empty() {
        return Err(MtpError::Precondition("need resonant pieces and sample points".into()));
    }
    if !(input.g_exponent > 0.0) {
        return Err(MtpError::Precondition("g exponent must be positive".into()));
    }
    let d = input.samples[0].len();
    let ge = input.g_exponent;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for x in &input.samples {
        for &r in &input.r_grid {
            let ball = Ball::new(x.clone(), r)?.to_box();
            for &eta in input.eta_grid.iter().filter(|&&e| e > 0.0 && e <= r) {
                let shapes: Vec<Aabb> = input
                    .resonant
                    .iter()
                    .map(|p| p.expand(eta).intersect(&ball))
                    .filter(|b| !b.is_empty())
                    .collect();
                let m = rasterize(&shapes, d, input.resolution, RasterMode::Inner)?.measure();
                if m > 0.0 {
                    xs.push(ge * (r.ln() - eta.ln()));
                    ys.push(m.ln() - ge * eta.ln());
                }
            }
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(MtpError::Estimation(format!("only {n} usable (η, r) pairs")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 1e-12 * n as f64 {
        return Err(MtpError::Estimation("log g(r) - log g(η) does not vary; fit is rank deficient".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let (kappa, warning) = if slope >= KAPPA_CEIL {
        (KAPPA_CEIL, Some(format!("fitted slope {slope:.4} reached the κ < 1 boundary; reporting 1 - 1e-3")))
    } else if slope < 0.0 {
        (0.0, Some(format!("fitted slope {slope:.4} is negative; reporting 0")))
    } else {
        (slope, None)
    };
    Ok(KappaEstimate { kappa, raw_slope: slope, intercept, rms_residual: rms, points: n, warning })
}
