//! Finite-scale critical exponents of truncated limsup sets.

use serde::{Deserialize, Serialize};

use crate::content::net_content;
use crate::dimfunc::DimensionFunction;
use crate::error::{MtpError, Result};
use crate::families::truncate_limsup;
use crate::space::{Aabb, CubeMask};

/// Result of [`estimate_critical_exponent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponent {
    pub s: f64,
    /// The ratio never dropped below ½ on the grid; `s` is the top of the grid.
    pub saturated: bool,
    /// The ratio is already below ½ at the first grid point; `s` is that point.
    pub below_grid: bool,
    /// `(s, ratio)` for every grid point evaluated and every bisection step.
    pub samples: Vec<(f64, f64)>,
}

const BISECT_TOL: f64 = 1e-6;

fn content_ratio(mask: &CubeMask, full: &CubeMask, s: f64) -> Result<f64> {
    let f = DimensionFunction::power(s);
    let depth = mask.resolution();
    Ok(net_content(mask, &f, depth)? / net_content(full, &f, depth)?)
}

/// The exponent where `N^{r^s}(mask) / N^{r^s}([0,1)^d)` first drops below ½.
/// Scans `s_grid` upward, then bisects inside the bracketing grid cell.
pub fn estimate_critical_exponent(mask: &CubeMask, s_grid: &[f64]) -> Result<CriticalExponent> {
    if s_grid.is_empty() {
        return Err(MtpError::Precondition("exponent grid is empty".into()));
    }
    if s_grid.windows(2).any(|w| w[1] <= w[0]) || s_grid.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(MtpError::Precondition("exponent grid must be positive and increasing".into()));
    }
    let full = CubeMask::full(mask.dim(), mask.resolution())?;
    let mut samples = Vec::new();
    let mut prev: Option<f64> = None;
    for &s in s_grid {
        let r = content_ratio(mask, &full, s)?;
        samples.push((s, r));
        if r < 0.5 {
            let Some(mut lo) = prev else {
                return Ok(CriticalExponent { s, saturated: false, below_grid: true, samples });
            };
            let mut hi = s;
            while hi - lo > BISECT_TOL {
                let mid = 0.5 * (lo + hi);
                let r = content_ratio(mask, &full, mid)?;
                samples.push((mid, r));
                if r < 0.5 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(CriticalExponent { s: 0.5 * (lo + hi), saturated: false, below_grid: false, samples });
        }
        prev = Some(s);
    }
    let s = *s_grid.last().unwrap();
    Ok(CriticalExponent { s, saturated: true, below_grid: false, samples })
}

/// [`estimate_critical_exponent`] on the outer rasterization of `⋃_{k=n}^{end} E_k`.
pub fn critical_exponent_of_family(
    sets: &[Vec<Aabb>],
    n: usize,
    end: usize,
    dim: usize,
    level: u32,
    s_grid: &[f64],
) -> Result<CriticalExponent> {
    estimate_critical_exponent(&truncate_limsup(sets, n, end, dim, level)?, s_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Cube;

    fn grid() -> Vec<f64> {
        (1..=40).map(|i| i as f64 * 0.05).collect()
    }

    #[test]
    fn full_space_saturates() {
        let full = CubeMask::full(1, 4).unwrap();
        let e = estimate_critical_exponent(&full, &grid()).unwrap();
        assert!(e.saturated);
        assert_eq!(e.s, 2.0);
    }

    #[test]
    fn single_cube_crossing() {
        for m in 1..=4u32 {
            let mask = CubeMask::from_cubes(1, 6, &[Cube::new(m, vec![1]).unwrap()]).unwrap();
            let e = estimate_critical_exponent(&mask, &grid()).unwrap();
            let expect = 2f64.ln() / (m as f64 * 4f64.ln());
            assert!((e.s - expect).abs() < 2.0 * BISECT_TOL, "m={m}: {} vs {expect}", e.s);
        }
    }

    #[test]
    fn bad_grids() {
        let full = CubeMask::full(1, 2).unwrap();
        assert!(estimate_critical_exponent(&full, &[]).is_err());
        assert!(estimate_critical_exponent(&full, &[0.5, 0.5]).is_err());
    }
}
