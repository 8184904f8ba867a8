//! Closed-form dimension numbers: `s(t)` for rectangles, its limsup along
//! sequences `t_n`, product sets, and the κ-scaling estimator.
//!
//! Axis indices are 0-based throughout.

mod kappa;
mod scalar;
mod sequence;

pub use kappa::{estimate_kappa, KappaEstimate, KappaInput};
pub use scalar::{parse_rational, rational_from_f64, Scalar, F64_TOL};
pub use sequence::{limsup_dimension, LimsupReport, PowerLaw, SequenceData, TSequence};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::dimfunc::{compare, DimensionFunction};
use crate::error::{MtpError, Result};

/// Inputs `(a, t, δ, κ)` of the dimension number, one entry per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentData<S = f64> {
    pub a: Vec<S>,
    pub t: Vec<S>,
    pub delta: Vec<S>,
    pub kappa: Vec<S>,
}

impl<S: Scalar> ExponentData<S> {
    pub fn new(a: Vec<S>, t: Vec<S>, delta: Vec<S>, kappa: Vec<S>) -> Result<Self> {
        let d = ExponentData { a, t, delta, kappa };
        d.validate()?;
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.a.len();
        if d == 0 || self.t.len() != d || self.delta.len() != d || self.kappa.len() != d {
            return Err(MtpError::Invalid("a, t, delta and kappa need the same positive length".into()));
        }
        for i in 0..d {
            if !self.a[i].is_positive() || !self.a[i].to_f64().is_finite() {
                return Err(MtpError::Invalid(format!("a[{i}] must be positive")));
            }
            if self.t[i].lt(&S::zero()) || !self.t[i].to_f64().is_finite() {
                return Err(MtpError::Invalid(format!("t[{i}] must be nonnegative")));
            }
            if !self.delta[i].is_positive() || !self.delta[i].to_f64().is_finite() {
                return Err(MtpError::Invalid(format!("delta[{i}] must be positive")));
            }
            if self.kappa[i].lt(&S::zero()) || !self.kappa[i].lt(&S::one()) {
                return Err(MtpError::Invalid(format!("kappa[{i}] must lie in [0, 1)")));
            }
        }
        Ok(())
    }

    /// The candidate set `{a_i} ∪ {a_i + t_i}`, sorted, duplicates removed.
    pub fn taus(&self) -> Vec<S> {
        let mut v: Vec<S> = self
            .a
            .iter()
            .cloned()
            .chain(self.a.iter().zip(&self.t).map(|(a, t)| a.add(t)))
            .collect();
        v.sort_by(|x, y| x.to_f64().total_cmp(&y.to_f64()));
        let mut out: Vec<S> = Vec::with_capacity(v.len());
        for x in v {
            if out.last().map_or(true, |l| !l.approx_eq(&x)) {
                out.push(x);
            }
        }
        out
    }
}

impl ExponentData<f64> {
    /// Exact rational copy of the float data.
    pub fn to_rational(&self) -> Result<ExponentData<BigRational>> {
        let conv = |v: &[f64]| v.iter().map(|&x| rational_from_f64(x)).collect::<Result<Vec<_>>>();
        Ok(ExponentData {
            a: conv(&self.a)?,
            t: conv(&self.t)?,
            delta: conv(&self.delta)?,
            kappa: conv(&self.kappa)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSets<S = f64> {
    pub tau: S,
    pub k1: Vec<usize>,
    pub k2: Vec<usize>,
    pub k3: Vec<usize>,
}

/// `K1 = {a_i >= τ}`, `K2 = {a_i + t_i <= τ} \ K1`, `K3` the rest.
pub fn partition_sets<S: Scalar>(data: &ExponentData<S>, tau: &S) -> PartitionSets<S> {
    let mut p = PartitionSets { tau: tau.clone(), k1: vec![], k2: vec![], k3: vec![] };
    for i in 0..data.dim() {
        if tau.le(&data.a[i]) {
            p.k1.push(i);
        } else if data.a[i].add(&data.t[i]).le(tau) {
            p.k2.push(i);
        } else {
            p.k3.push(i);
        }
    }
    p
}

/// Bracketed expression of the dimension number for given index sets and `τ`.
fn candidate_value<S: Scalar>(data: &ExponentData<S>, k1: &[usize], k2: &[usize], k3: &[usize], tau: &S) -> S {
    let one = S::one();
    let mut v = S::zero();
    for &i in k1.iter().chain(k2) {
        v = v.add(&data.delta[i]);
    }
    let mut num = S::zero();
    for &i in k3 {
        v = v.add(&data.kappa[i].mul(&data.delta[i]));
        num = num.add(&one.sub(&data.kappa[i]).mul(&data.delta[i]).mul(&data.a[i]));
    }
    for &i in k2 {
        num = num.sub(&one.sub(&data.kappa[i]).mul(&data.delta[i]).mul(&data.t[i]));
    }
    v.add(&num.div(tau))
}

pub fn candidate<S: Scalar>(data: &ExponentData<S>, tau: &S) -> S {
    let p = partition_sets(data, tau);
    candidate_value(data, &p.k1, &p.k2, &p.k3, tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionNumber<S = f64> {
    pub value: S,
    pub argmin_tau: S,
    pub candidates: Vec<(S, S)>,
}

/// `s(t) = min_{τ ∈ 𝒜}` of the candidate expression; ties go to the smallest `τ`.
pub fn dimension_number<S: Scalar>(data: &ExponentData<S>) -> Result<DimensionNumber<S>> {
    data.validate()?;
    let mut candidates = Vec::new();
    let mut best: Option<(S, S)> = None;
    for tau in data.taus() {
        let v = candidate(data, &tau);
        let better = match &best {
            None => true,
            Some((_, b)) => !b.le(&v),
        };
        if better {
            best = Some((tau.clone(), v.clone()));
        }
        candidates.push((tau, v));
    }
    let (argmin_tau, value) = best.expect("candidate set is nonempty");
    Ok(DimensionNumber { value, argmin_tau, candidates })
}

/// Exponent bound on `[r0^{τ_{k+1}}, r0^{τ_k}]` for the pair `(lo, hi) = (τ_k, τ_{k+1})`,
/// evaluated at `r = r0^{at}`.
pub fn interval_exponent<S: Scalar>(data: &ExponentData<S>, lo: &S, hi: &S, at: &S) -> S {
    let upper = partition_sets(data, hi);
    let lower = partition_sets(data, lo);
    let k1 = upper.k1;
    let k2: Vec<usize> = lower.k2.into_iter().filter(|i| !k1.contains(i)).collect();
    let k3: Vec<usize> = (0..data.dim()).filter(|i| !k1.contains(i) && !k2.contains(i)).collect();
    candidate_value(data, &k1, &k2, &k3, at)
}

/// Smallest `t - s(t)` over consecutive candidate pairs and both endpoints
/// (nonnegative when the bound holds).
pub fn interval_exponent_margin<S: Scalar>(data: &ExponentData<S>) -> Result<S> {
    let s = dimension_number(data)?.value;
    let taus = data.taus();
    let mut worst: Option<S> = None;
    for w in taus.windows(2) {
        for at in [&w[0], &w[1]] {
            let m = interval_exponent(data, &w[0], &w[1], at).sub(&s);
            if worst.as_ref().map_or(true, |x| m.lt(x)) {
                worst = Some(m);
            }
        }
    }
    Ok(worst.unwrap_or_else(S::zero))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub max_jump: f64,
    /// Largest sup-norm distance between adjacent grid points.
    pub max_step: f64,
    pub lipschitz: f64,
    pub passed: bool,
}

/// Largest change of `s` between adjacent points of a path of `t` vectors,
/// against the bound `2 Σ(1-κ_i)δ_i / min a_i` per unit sup-norm step.
pub fn continuity_scan(base: &ExponentData<f64>, t_grid: &[Vec<f64>]) -> Result<ContinuityReport> {
    if t_grid.len() < 2 {
        return Err(MtpError::Precondition("continuity scan needs at least two grid points".into()));
    }
    let mut prev: Option<(f64, &Vec<f64>)> = None;
    let mut max_jump = 0.0f64;
    let mut max_step = 0.0f64;
    for t in t_grid {
        let data = ExponentData { t: t.clone(), ..base.clone() };
        let s = dimension_number(&data)?.value;
        if let Some((ps, pt)) = prev {
            let h = t.iter().zip(pt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if !(h > 0.0) {
                return Err(MtpError::Precondition("grid step must be positive".into()));
            }
            max_step = max_step.max(h);
            max_jump = max_jump.max((s - ps).abs());
        }
        prev = Some((s, t));
    }
    let min_a = base.a.iter().cloned().fold(f64::INFINITY, f64::min);
    let mass: f64 = base.delta.iter().zip(&base.kappa).map(|(d, k)| d * (1.0 - k)).sum();
    let lipschitz = 2.0 * mass / min_a;
    Ok(ContinuityReport {
        max_jump,
        max_step,
        lipschitz,
        passed: max_jump <= lipschitz * max_step * (1.0 + 1e-9) + 1e-12,
    })
}

/// `min_i (s_i + Σ_{k≠i} δ_k)` with the minimizing index (smallest on ties).
pub fn product_dimension_argmin<S: Scalar>(s: &[S], delta: &[S]) -> Result<(usize, S)> {
    if s.is_empty() || s.len() != delta.len() {
        return Err(MtpError::Invalid("s and delta need the same positive length".into()));
    }
    for i in 0..s.len() {
        if !s[i].is_positive() || !s[i].le(&delta[i]) {
            return Err(MtpError::Precondition(format!(
                "factor {i}: need 0 < s_i <= delta_i, got s={:?}, delta={:?}",
                s[i], delta[i]
            )));
        }
    }
    let total = delta.iter().fold(S::zero(), |a, v| a.add(v));
    let mut best: Option<(usize, S)> = None;
    for i in 0..s.len() {
        let v = total.sub(&delta[i]).add(&s[i]);
        if best.as_ref().map_or(true, |(_, b)| v.lt(b)) {
            best = Some((i, v));
        }
    }
    Ok(best.expect("nonempty"))
}

pub fn product_dimension<S: Scalar>(s: &[S], delta: &[S]) -> Result<S> {
    Ok(product_dimension_argmin(s, delta)?.1)
}

/// Forms `f̃_i = g_1 ⋯ g_{i-1} f_i g_{i+1} ⋯ g_d` and returns the smallest
/// index `k` with `f̃_k ⪯ f̃_i` for every `i`.
pub fn product_dimension_functions(
    f: &[DimensionFunction],
    g: &[DimensionFunction],
) -> Result<(usize, DimensionFunction)> {
    if f.is_empty() || f.len() != g.len() {
        return Err(MtpError::Invalid("f and g need the same positive length".into()));
    }
    for (i, (fi, gi)) in f.iter().zip(g).enumerate() {
        if !compare(fi, gi).holds() {
            return Err(MtpError::Precondition(format!("f_{i} ⪯ g_{i} fails")));
        }
    }
    let tilde: Vec<DimensionFunction> = (0..f.len())
        .map(|i| {
            let mut acc = f[i];
            for (j, gj) in g.iter().enumerate() {
                if j != i {
                    acc = acc.product(gj);
                }
            }
            acc
        })
        .collect();
    for i in 0..tilde.len() {
        for j in i + 1..tilde.len() {
            if !compare(&tilde[i], &tilde[j]).holds() && !compare(&tilde[j], &tilde[i]).holds() {
                return Err(MtpError::Precondition(format!(
                    "f̃_{i} and f̃_{j} are not comparable"
                )));
            }
        }
    }
    for k in 0..tilde.len() {
        if tilde.iter().all(|ti| compare(&tilde[k], ti).holds()) {
            return Ok((k, tilde[k]));
        }
    }
    Err(MtpError::Precondition("no f̃_k precedes every f̃_i".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn one_dim(a: f64, t: f64) -> ExponentData {
        ExponentData::new(vec![a], vec![t], vec![1.0], vec![0.0]).unwrap()
    }

    #[test]
    fn partition_examples() {
        let d = one_dim(2.0, 2.0);
        let p = partition_sets(&d, &2.0);
        assert_eq!((p.k1, p.k2, p.k3), (vec![0], vec![], vec![]));
        let p = partition_sets(&d, &4.0);
        assert_eq!((p.k1, p.k2, p.k3), (vec![], vec![0], vec![]));
        let z = ExponentData::new(vec![1.0, 3.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(partition_sets(&z, &0.5).k1, vec![0, 1]);
    }

    #[test]
    fn jarnik_exact() {
        let d = ExponentData::new(vec![q(2, 1)], vec![q(2, 1)], vec![q(1, 1)], vec![q(0, 1)]).unwrap();
        let s = dimension_number(&d).unwrap();
        assert_eq!(s.value, q(1, 2));
        assert_eq!(s.argmin_tau, q(4, 1));
        assert_eq!(s.candidates, vec![(q(2, 1), q(1, 1)), (q(4, 1), q(1, 2))]);
    }

    #[test]
    fn zero_t_gives_delta_sum() {
        let d = ExponentData::new(vec![1.0, 2.5], vec![0.0, 0.0], vec![0.7, 1.3], vec![0.2, 0.0]).unwrap();
        assert_eq!(dimension_number(&d).unwrap().value, 2.0);
    }

    #[test]
    fn worked_example_value() {
        let ln2 = 2f64.ln();
        let d = ExponentData::new(
            vec![1.0, 3f64.ln() / ln2],
            vec![2.0 / ln2, 25.0 / ln2],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        let want = (ln2 + 3f64.ln()) / (ln2 + 2.0);
        assert!((dimension_number(&d).unwrap().value - want).abs() < 1e-12);
        assert!((want - 0.66531).abs() < 1e-5);
    }

    #[test]
    fn product_examples() {
        let s = [q(1, 2), q(1, 3)];
        let one = [q(1, 1), q(1, 1)];
        assert_eq!(product_dimension(&s, &one).unwrap(), q(4, 3));
        assert_eq!(product_dimension(&one, &one).unwrap(), q(2, 1));
        assert_eq!(product_dimension(&[0.4], &[1.0]).unwrap(), 0.4);
        assert!(product_dimension(&[1.5], &[1.0]).is_err());
    }

    #[test]
    fn tilde_index_follows_order() {
        let f = [DimensionFunction::power(0.5), DimensionFunction::power(1.0 / 3.0)];
        let g = [DimensionFunction::power(1.0), DimensionFunction::power(1.0)];
        let (k, tf) = product_dimension_functions(&f, &g).unwrap();
        assert_eq!(k, 1);
        assert!((tf.alpha - 4.0 / 3.0).abs() < 1e-15);
        let (k, _) = product_dimension_functions(&g, &g).unwrap();
        assert_eq!(k, 0);
        assert_eq!(product_dimension_functions(&f[..1], &g[..1]).unwrap().0, 0);
        assert!(product_dimension_functions(&g[..1], &f[..1]).is_err());
    }

    #[test]
    fn continuity_on_jarnik_family() {
        let base = one_dim(2.0, 0.0);
        let grid: Vec<Vec<f64>> = (0..=4000).map(|i| vec![i as f64 * 1e-3]).collect();
        let r = continuity_scan(&base, &grid).unwrap();
        assert!(r.passed, "{r:?}");
        let coarse: Vec<Vec<f64>> = (0..=2000).map(|i| vec![i as f64 * 2e-3]).collect();
        let rc = continuity_scan(&base, &coarse).unwrap();
        assert!(rc.max_jump <= 2.5 * r.max_jump);
        assert!(r.max_jump <= rc.max_jump);
    }
}
