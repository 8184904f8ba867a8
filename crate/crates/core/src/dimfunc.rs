//! Power-log dimension functions `f(r) = r^alpha * (ln 1/r)^beta`, the order
//! relation between them, and the radius transform used with local scaling.

use serde::{Deserialize, Serialize};

use crate::error::{MtpError, Result};

/// Number of points on the geometric grid used for monotonicity checks.
pub const DEFAULT_GRID_POINTS: usize = 512;
/// Smallest radius on the verification grid.
pub const GRID_R_MIN: f64 = 1e-9;

fn default_max() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionFunction {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_max")]
    pub valid_radius_max: f64,
}

impl DimensionFunction {
    /// Builds and validates `r^alpha (ln 1/r)^beta` on `(0, 1]`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::with_max(alpha, beta, 1.0)
    }

    pub fn with_max(alpha: f64, beta: f64, valid_radius_max: f64) -> Result<Self> {
        let f = DimensionFunction {
            alpha,
            beta,
            valid_radius_max,
        };
        f.validate()?;
        Ok(f)
    }

    /// `r^s`. Panics if `s <= 0`; use [`DimensionFunction::new`] for untrusted input.
    pub fn power(s: f64) -> Self {
        assert!(s > 0.0 && s.is_finite(), "power exponent must be positive");
        DimensionFunction {
            alpha: s,
            beta: 0.0,
            valid_radius_max: 1.0,
        }
    }

    /// Checks the parameter constraints and grid monotonicity.
    pub fn validate(&self) -> Result<()> {
        self.validate_with_grid(DEFAULT_GRID_POINTS)
    }

    pub fn validate_with_grid(&self, points: usize) -> Result<()> {
        let DimensionFunction {
            alpha,
            beta,
            valid_radius_max: max,
        } = *self;
        if !alpha.is_finite() || !beta.is_finite() || !max.is_finite() {
            return Err(MtpError::Invalid("dimension function parameters must be finite".into()));
        }
        if alpha < 0.0 {
            return Err(MtpError::Invalid(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(max > 0.0 && max <= 1.0) {
            return Err(MtpError::Invalid(format!(
                "valid_radius_max must lie in (0, 1], got {max}"
            )));
        }
        if !(alpha > 0.0 || beta < 0.0) {
            return Err(MtpError::Invalid(format!(
                "f(r) does not tend to 0 as r -> 0 (alpha={alpha}, beta={beta})"
            )));
        }
        if beta != 0.0 && max >= 1.0 {
            return Err(MtpError::Invalid(
                "a nonzero log exponent needs valid_radius_max < 1".into(),
            ));
        }
        let grid = geometric_grid(GRID_R_MIN.min(max), max, points);
        let mut prev = self.eval_raw(grid[0]);
        for &r in &grid[1..] {
            let v = self.eval_raw(r);
            if !(v.is_finite() && v > 0.0) {
                return Err(MtpError::Invalid(format!("f({r}) is not a positive number")));
            }
            if v < prev * (1.0 - 1e-12) {
                return Err(MtpError::Invalid(format!(
                    "f is decreasing near r={r:.6e} (alpha={alpha}, beta={beta})"
                )));
            }
            prev = v;
        }
        Ok(())
    }

    #[inline]
    fn eval_raw(&self, r: f64) -> f64 {
        let p = if self.alpha == 0.0 { 1.0 } else { r.powf(self.alpha) };
        if self.beta == 0.0 {
            p
        } else {
            p * (1.0 / r).ln().powf(self.beta)
        }
    }

    /// Evaluates `f(r)` for `0 < r <= valid_radius_max`.
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r <= self.valid_radius_max) {
            return Err(MtpError::Domain(format!(
                "radius {r} outside (0, {}]",
                self.valid_radius_max
            )));
        }
        Ok(self.eval_raw(r))
    }

    /// Evaluates without the range check. Callers guarantee `0 < r <= valid_radius_max`.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        debug_assert!(r > 0.0);
        self.eval_raw(r)
    }

    /// Exponent-wise product `self * other` (radius range is the smaller of the two).
    pub fn product(&self, other: &DimensionFunction) -> DimensionFunction {
        DimensionFunction {
            alpha: self.alpha + other.alpha,
            beta: self.beta + other.beta,
            valid_radius_max: self.valid_radius_max.min(other.valid_radius_max),
        }
    }

    /// `self / other^k`, not validated.
    pub fn divide_power(&self, other: &DimensionFunction, k: f64) -> DimensionFunction {
        DimensionFunction {
            alpha: self.alpha - k * other.alpha,
            beta: self.beta - k * other.beta,
            valid_radius_max: self.valid_radius_max.min(other.valid_radius_max),
        }
    }

    pub fn is_power_law(&self) -> bool {
        self.beta == 0.0
    }
}

/// `points` radii spaced geometrically over `[lo, hi]` (both ends included).
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    if lo >= hi {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Grid supremum of `f(2r)/f(r)` over `[r_min, max/2]`, inflated by `1 + 1e-9`.
pub fn doubling_constant(f: &DimensionFunction, r_min: f64) -> Result<f64> {
    let half = f.valid_radius_max / 2.0;
    if !(r_min > 0.0 && r_min < half) {
        return Err(MtpError::Domain(format!(
            "r_min must lie in (0, {half}), got {r_min}"
        )));
    }
    let sup = geometric_grid(r_min, half, DEFAULT_GRID_POINTS)
        .into_iter()
        .map(|r| f.eval(2.0 * r) / f.eval(r))
        .fold(0.0f64, f64::max);
    Ok(sup * (1.0 + 1e-9))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Relation {
    /// `h/f -> infinity`.
    Strict,
    /// `h/f -> c` with `0 < c < infinity`.
    FiniteLimit { limit: f64 },
    /// The ratio tends to 0 or is not monotone.
    Fails { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreceqVerdict {
    pub relation: Relation,
    /// `(r, h(r)/f(r))` on the verification grid, increasing in `r`.
    pub witness_grid: Vec<(f64, f64)>,
    /// First grid radius where the ratio changed direction, if any.
    pub first_violation: Option<f64>,
}

impl PreceqVerdict {
    /// True for both strict and finite-limit outcomes.
    pub fn holds(&self) -> bool {
        !matches!(self.relation, Relation::Fails { .. })
    }

    pub fn is_strict(&self) -> bool {
        matches!(self.relation, Relation::Strict)
    }
}

/// Decides `h ⪯ f`: the ratio `h/f` is monotone and has a positive limit at 0.
pub fn compare(h: &DimensionFunction, f: &DimensionFunction) -> PreceqVerdict {
    compare_with_grid(h, f, DEFAULT_GRID_POINTS)
}

pub fn compare_with_grid(h: &DimensionFunction, f: &DimensionFunction, points: usize) -> PreceqVerdict {
    let max = h.valid_radius_max.min(f.valid_radius_max);
    let witness: Vec<(f64, f64)> = geometric_grid(GRID_R_MIN.min(max), max, points)
        .into_iter()
        .map(|r| (r, h.eval(r) / f.eval(r)))
        .collect();

    let first_violation = monotone_violation(&witness);

    let da = h.alpha - f.alpha;
    let db = h.beta - f.beta;
    // h/f = r^da (ln 1/r)^db; as r -> 0 the power part dominates unless da = 0.
    let symbolic = if da < 0.0 || (da == 0.0 && db > 0.0) {
        Relation::Strict
    } else if da > 0.0 || db < 0.0 {
        Relation::Fails {
            reason: "ratio tends to 0".into(),
        }
    } else {
        Relation::FiniteLimit { limit: 1.0 }
    };

    let relation = match (symbolic, first_violation) {
        (Relation::Fails { reason }, _) => Relation::Fails { reason },
        (_, Some(r)) => Relation::Fails {
            reason: format!("ratio is not monotone (direction changes near r={r:.6e})"),
        },
        (rel, None) => rel,
    };
    PreceqVerdict {
        relation,
        witness_grid: witness,
        first_violation,
    }
}

fn monotone_violation(w: &[(f64, f64)]) -> Option<f64> {
    let tol = 1e-12;
    let mut dir = 0i8;
    for pair in w.windows(2) {
        let (a, b) = (pair[0].1, pair[1].1);
        let scale = a.abs().max(b.abs());
        let step = if b > a + tol * scale {
            1
        } else if b < a - tol * scale {
            -1
        } else {
            0
        };
        if step != 0 {
            if dir == 0 {
                dir = step;
            } else if dir != step {
                return Some(pair[0].0);
            }
        }
    }
    None
}

/// Finds `r` with `g(r) = y` by bisection in `ln r` (closed form for pure powers).
pub fn invert(g: &DimensionFunction, y: f64) -> Result<f64> {
    let top = g.eval(g.valid_radius_max);
    if !(y > 0.0 && y <= top * (1.0 + 1e-15)) {
        return Err(MtpError::Domain(format!("value {y} outside (0, {top}]")));
    }
    if g.beta == 0.0 {
        return Ok(y.powf(1.0 / g.alpha).min(g.valid_radius_max));
    }
    let mut lo = (1e-300f64).ln();
    let mut hi = g.valid_radius_max.ln();
    if g.eval(lo.exp()) > y {
        return Err(MtpError::Domain(format!("value {y} below representable range")));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g.eval(mid.exp()) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = (lo.exp(), hi.exp());
    let r = if (g.eval(rl) - y).abs() <= (g.eval(rh) - y).abs() {
        rl
    } else {
        rh
    };
    Ok(r)
}

/// `g^{-1}((f(Υ)/g(Υ)^κ)^{1/(1-κ)})`.
pub fn kappa_transform(
    f: &DimensionFunction,
    g: &DimensionFunction,
    kappa: f64,
    upsilon: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(MtpError::Domain(format!("kappa must lie in [0, 1), got {kappa}")));
    }
    let max = f.valid_radius_max.min(g.valid_radius_max);
    if !(upsilon > 0.0 && upsilon <= max) {
        return Err(MtpError::Domain(format!("upsilon {upsilon} outside (0, {max}]")));
    }
    if f == g {
        return Ok(upsilon);
    }
    let h = f.divide_power(g, kappa);
    h.validate().map_err(|e| {
        MtpError::Precondition(format!("f/g^kappa is not a dimension function: {e}"))
    })?;
    let y = (f.eval(upsilon) / g.eval(upsilon).powf(kappa)).powf(1.0 / (1.0 - kappa));
    invert(g, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn evaluate_examples() {
        let f = DimensionFunction::new(1.0, 0.0).unwrap();
        assert_eq!(f.evaluate(0.25).unwrap(), 0.25);
        let f = DimensionFunction::new(0.5, 0.0).unwrap();
        assert_relative_eq!(f.evaluate(0.0625).unwrap(), 0.25, max_relative = 1e-15);
        let f = DimensionFunction::with_max(1.0, 1.0, 0.3).unwrap();
        // direct arithmetic: e^{-1} * ln(e) = e^{-1}, but e^{-1} > 0.3 is outside the range
        assert!(f.evaluate((-1.0f64).exp()).is_err());
        let f = DimensionFunction::with_max(1.0, 1.0, (-1.0f64).exp()).unwrap();
        let r = (-1.0f64).exp();
        assert_relative_eq!(f.evaluate(r).unwrap(), 0.367879441171, max_relative = 1e-11);
    }

    #[test]
    fn evaluate_rejects_out_of_range() {
        let f = DimensionFunction::power(1.0);
        assert!(matches!(f.evaluate(0.0), Err(MtpError::Domain(_))));
        assert!(matches!(f.evaluate(1.5), Err(MtpError::Domain(_))));
    }

    #[test]
    fn invalid_parameters() {
        assert!(DimensionFunction::new(0.0, 0.0).is_err());
        assert!(DimensionFunction::new(0.0, 1.0).is_err());
        assert!(DimensionFunction::new(-1.0, 0.0).is_err());
        // r (ln 1/r)^2 decreases past r = e^{-2}
        assert!(DimensionFunction::with_max(1.0, 2.0, 0.5).is_err());
        assert!(DimensionFunction::with_max(1.0, 2.0, 0.1).is_ok());
        assert!(DimensionFunction::with_max(0.0, -1.0, 0.5).is_ok());
    }

    #[test]
    fn doubling_examples() {
        let d = doubling_constant(&DimensionFunction::power(1.0), 1e-6).unwrap();
        assert_relative_eq!(d, 2.0, max_relative = 1e-8);
        let d = doubling_constant(&DimensionFunction::power(0.5), 1e-6).unwrap();
        assert_relative_eq!(d, 2f64.sqrt(), max_relative = 1e-8);
        // r ln(1/r): the sup sits at r_min, 2 (1 - ln 2 / ln 1e6)
        let f = DimensionFunction::with_max(1.0, 1.0, (-1.0f64).exp()).unwrap();
        let d = doubling_constant(&f, 1e-6).unwrap();
        assert_relative_eq!(d, 1.8996566681120062, max_relative = 1e-8);
        let f = DimensionFunction::with_max(1.0, -1.0, 0.5).unwrap();
        assert!(doubling_constant(&f, 1e-6).unwrap() > 2.0);
    }

    #[test]
    fn compare_examples() {
        let r1 = DimensionFunction::power(1.0);
        let rh = DimensionFunction::power(0.5);
        assert!(compare(&rh, &r1).is_strict());
        assert_eq!(
            compare(&r1, &r1).relation,
            Relation::FiniteLimit { limit: 1.0 }
        );
        assert!(!compare(&r1, &rh).holds());
    }

    #[test]
    fn compare_log_gap() {
        let f = DimensionFunction::with_max(1.0, 1.0, 0.3).unwrap();
        let g = DimensionFunction::with_max(1.0, 0.0, 0.3).unwrap();
        assert!(compare(&f, &g).is_strict());
        assert!(!compare(&g, &f).holds());
    }

    #[test]
    fn invert_examples() {
        let g = DimensionFunction::power(2.0);
        assert_relative_eq!(invert(&g, 0.25).unwrap(), 0.5, max_relative = 1e-14);
        let g = DimensionFunction::power(1.0);
        assert_relative_eq!(invert(&g, 0.1).unwrap(), 0.1, max_relative = 1e-14);
        let g = DimensionFunction::with_max(1.0, 1.0, (-1.0f64).exp()).unwrap();
        let r = invert(&g, 0.2).unwrap();
        assert!((g.eval(r) - 0.2).abs() <= 1e-12 * 0.2);
        // fine-grid scan oracle: the root lies in the grid cell where g crosses 0.2
        let grid = geometric_grid(1e-4, (-1.0f64).exp(), 200_000);
        let cross = grid.windows(2).find(|w| g.eval(w[0]) <= 0.2 && g.eval(w[1]) >= 0.2).unwrap();
        assert!(r >= cross[0] && r <= cross[1]);
    }

    #[test]
    fn kappa_examples() {
        let g = DimensionFunction::power(1.0);
        let v = kappa_transform(&DimensionFunction::power(0.5), &g, 0.0, 0.1).unwrap();
        assert_relative_eq!(v, 0.316227766016838, max_relative = 1e-12);
        let v = kappa_transform(&DimensionFunction::power(0.75), &g, 0.5, 0.01).unwrap();
        assert_relative_eq!(v, 0.1, max_relative = 1e-12);
        assert_eq!(kappa_transform(&g, &g, 0.3, 0.07).unwrap(), 0.07);
        assert!(matches!(
            kappa_transform(&g, &g, 1.0, 0.1),
            Err(MtpError::Domain(_))
        ));
        // f/g^kappa = r^{-0.25} is not a dimension function
        assert!(matches!(
            kappa_transform(&DimensionFunction::power(0.25), &g, 0.5, 0.1),
            Err(MtpError::Precondition(_))
        ));
    }
}
