use serde::{Deserialize, Serialize};

use super::{dimension_number, ExponentData};
use crate::error::{MtpError, Result};

/// `c0 + c1 n^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default = "one")]
    pub p: f64,
}

fn one() -> f64 {
    1.0
}

impl PowerLaw {
    pub fn constant(c: f64) -> Self {
        PowerLaw { c0: c, c1: 0.0, p: 1.0 }
    }

    pub fn at(&self, n: usize) -> f64 {
        if self.c1 == 0.0 {
            self.c0
        } else {
            self.c0 + self.c1 * (n as f64).powf(self.p)
        }
    }

    fn poly(&self) -> Poly {
        Poly::from_terms(&[(0.0, self.c0), (self.p, self.c1)])
    }
}

/// A sequence `t_n`, `n >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TSequence {
    /// `t_n = phases[n mod k]`, each phase a per-axis power law.
    Laws { phases: Vec<Vec<PowerLaw>> },
    /// `t_n = values[n - 1]`.
    Explicit { values: Vec<Vec<f64>> },
}

impl TSequence {
    pub fn constant(t: &[f64]) -> Self {
        TSequence::Laws { phases: vec![t.iter().map(|&c| PowerLaw::constant(c)).collect()] }
    }

    pub fn at(&self, n: usize) -> Option<Vec<f64>> {
        match self {
            TSequence::Laws { phases } => {
                let ph = &phases[n % phases.len()];
                Some(ph.iter().map(|l| l.at(n)).collect())
            }
            TSequence::Explicit { values } => values.get(n.checked_sub(1)?).cloned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceData {
    pub a: Vec<f64>,
    pub delta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub t: TSequence,
}

impl SequenceData {
    pub fn data_at(&self, n: usize) -> Result<ExponentData> {
        let t = self
            .t
            .at(n)
            .ok_or_else(|| MtpError::Precondition(format!("sequence has no term n={n}")))?;
        ExponentData::new(self.a.clone(), t, self.delta.clone(), self.kappa.clone())
    }

    fn validate(&self) -> Result<()> {
        let d = self.a.len();
        match &self.t {
            TSequence::Laws { phases } => {
                if phases.is_empty() || phases.iter().any(|p| p.len() != d) {
                    return Err(MtpError::Invalid("every phase needs one law per axis".into()));
                }
                for l in phases.iter().flatten() {
                    if !(l.c0.is_finite() && l.c1.is_finite() && l.p.is_finite()) || (l.c1 != 0.0 && l.p <= 0.0) {
                        return Err(MtpError::Invalid(format!("bad power law {l:?}")));
                    }
                    if l.c1 < 0.0 || l.c0 < 0.0 {
                        return Err(MtpError::Invalid(format!("power law {l:?} can go negative")));
                    }
                }
            }
            TSequence::Explicit { values } => {
                if values.iter().any(|v| v.len() != d) {
                    return Err(MtpError::Invalid("every term needs one entry per axis".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimsupMethod {
    /// Exact limit of each phase from leading terms.
    Asymptotic,
    /// Maximum over the second half of the window.
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimsupReport {
    pub limsup: f64,
    pub method: LimsupMethod,
    pub values: Vec<(usize, f64)>,
    /// Largest value over `n ∈ [n_max/2, n_max]`.
    pub tail_max: f64,
    pub nonincreasing_tail: bool,
    /// The window has not settled: for laws the maximizing phase is still
    /// more than `1e-9` from its limit at `n_max`; for explicit sequences the
    /// last-quarter maximum differs from the tail maximum.
    pub still_moving: bool,
}

/// Values `s(t_n)` for `n = 1..=n_max` and the limsup along the sequence.
pub fn limsup_dimension(data: &SequenceData, n_max: usize) -> Result<LimsupReport> {
    if n_max == 0 {
        return Err(MtpError::Precondition("n_max must be at least 1".into()));
    }
    data.validate()?;
    let mut values = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        values.push((n, dimension_number(&data.data_at(n)?)?.value));
    }
    let half = n_max.div_ceil(2);
    let tail: Vec<(usize, f64)> = values.iter().copied().filter(|(n, _)| *n >= half).collect();
    let tail_max = tail.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let nonincreasing = |v: &[(usize, f64)]| v.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);

    match &data.t {
        TSequence::Laws { phases } => {
            let limits: Vec<f64> = phases.iter().map(|ph| phase_limit(data, ph)).collect();
            let limsup = limits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let k = phases.len();
            let top: Vec<usize> = (0..k).filter(|&p| limits[p] >= limsup - 1e-12).collect();
            let mut ok = true;
            let mut moving = false;
            for &p in &top {
                let sub: Vec<(usize, f64)> = tail.iter().copied().filter(|(n, _)| n % k == p).collect();
                ok &= nonincreasing(&sub);
                if let Some(last) = sub.last() {
                    moving |= (last.1 - limsup).abs() > 1e-9;
                }
            }
            Ok(LimsupReport {
                limsup,
                method: LimsupMethod::Asymptotic,
                values,
                tail_max,
                nonincreasing_tail: ok,
                still_moving: moving,
            })
        }
        TSequence::Explicit { .. } => {
            let quarter = (3 * n_max).div_ceil(4);
            let late = values
                .iter()
                .filter(|(n, _)| *n >= quarter)
                .map(|v| v.1)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(LimsupReport {
                limsup: tail_max,
                method: LimsupMethod::Window,
                values: values.clone(),
                tail_max,
                nonincreasing_tail: nonincreasing(&tail),
                still_moving: (late - tail_max).abs() > 1e-9,
            })
        }
    }
}

/// Generalized polynomial `Σ c_k n^{p_k}`, terms with distinct exponents sorted descending.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<(f64, f64)>);

impl Poly {
    fn from_terms(terms: &[(f64, f64)]) -> Poly {
        let mut p = Poly(vec![]);
        for &(e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, e: f64, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.0.iter_mut().find(|t| t.0 == e) {
            Some(t) => t.1 += c,
            None => self.0.push((e, c)),
        }
        self.0.sort_by(|a, b| b.0.total_cmp(&a.0));
    }

    fn add(&self, o: &Poly, k: f64) -> Poly {
        let mut p = self.clone();
        for &(e, c) in &o.0 {
            p.add_term(e, k * c);
        }
        p
    }

    /// Leading nonzero term, ignoring coefficients below `1e-12` relative.
    fn leading(&self) -> Option<(f64, f64)> {
        let scale = self.0.iter().fold(1.0f64, |a, t| a.max(t.1.abs()));
        self.0.iter().copied().find(|t| t.1.abs() > 1e-12 * scale)
    }

    /// Eventual sign as `n → ∞`.
    fn sign(&self) -> i32 {
        match self.leading() {
            None => 0,
            Some((_, c)) if c > 0.0 => 1,
            _ => -1,
        }
    }
}

/// `lim_{n→∞} s(t_n)` along one phase.
fn phase_limit(data: &SequenceData, laws: &[PowerLaw]) -> f64 {
    let d = data.a.len();
    let a: Vec<Poly> = data.a.iter().map(|&v| Poly::from_terms(&[(0.0, v)])).collect();
    let t: Vec<Poly> = laws.iter().map(|l| l.poly()).collect();
    let at: Vec<Poly> = (0..d).map(|i| a[i].add(&t[i], 1.0)).collect();
    let mut best = f64::INFINITY;
    for tau in a.iter().chain(&at) {
        let mut c = 0.0;
        let mut num = Poly(vec![]);
        for i in 0..d {
            let (dl, kp) = (data.delta[i], data.kappa[i]);
            if a[i].add(tau, -1.0).sign() >= 0 {
                c += dl;
            } else if at[i].add(tau, -1.0).sign() <= 0 {
                c += dl;
                num = num.add(&t[i], -(1.0 - kp) * dl);
            } else {
                c += kp * dl;
                num = num.add(&a[i], (1.0 - kp) * dl);
            }
        }
        let (pt, ct) = tau.leading().expect("τ is positive");
        let frac = match num.leading() {
            None => 0.0,
            Some((pn, _)) if pn < pt => 0.0,
            Some((pn, cn)) if pn == pt => cn / ct,
            Some((_, cn)) => cn.signum() * f64::INFINITY,
        };
        best = best.min(c + frac);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked(t: f64) -> SequenceData {
        let ln2 = 2f64.ln();
        SequenceData {
            a: vec![1.0, 3f64.ln() / ln2],
            delta: vec![1.0, 1.0],
            kappa: vec![0.0, 0.0],
            t: TSequence::Laws {
                phases: vec![vec![
                    PowerLaw::constant(t / ln2),
                    PowerLaw { c0: 0.0, c1: 1.0 / ln2, p: 2.0 },
                ]],
            },
        }
    }

    #[test]
    fn worked_example_limits() {
        let (ln2, ln3) = (2f64.ln(), 3f64.ln());
        for t in [1.0, 2.0, 3.0, 5.0] {
            let r = limsup_dimension(&worked(t), 50).unwrap();
            let want = ((ln2 + ln3) / (ln2 + t)).min(1.0);
            assert!((r.limsup - want).abs() < 1e-12, "t={t}: {} vs {want}", r.limsup);
            assert!(r.nonincreasing_tail);
            for &(n, v) in r.values.iter().filter(|(n, _)| *n >= 3) {
                let nf = n as f64;
                let per = (1.0 + (ln3 - t) / (ln3 + nf * nf)).min((ln2 + ln3) / (ln2 + t));
                assert!((v - per).abs() < 1e-9, "t={t}, n={n}");
            }
        }
    }

    #[test]
    fn constant_and_alternating() {
        let base = |t: Vec<f64>| SequenceData {
            a: vec![2.0],
            delta: vec![1.0],
            kappa: vec![0.0],
            t: TSequence::constant(&t),
        };
        let r = limsup_dimension(&base(vec![2.0]), 10).unwrap();
        assert!((r.limsup - 0.5).abs() < 1e-15);
        let alt = SequenceData {
            t: TSequence::Laws {
                phases: vec![vec![PowerLaw::constant(2.0)], vec![PowerLaw::constant(6.0)]],
            },
            ..base(vec![0.0])
        };
        let r = limsup_dimension(&alt, 20).unwrap();
        assert!((r.limsup - 0.5).abs() < 1e-15);
        let explicit = SequenceData {
            t: TSequence::Explicit { values: (1..=20).map(|n| vec![if n % 2 == 0 { 2.0 } else { 6.0 }]).collect() },
            ..base(vec![0.0])
        };
        let r = limsup_dimension(&explicit, 20).unwrap();
        assert_eq!(r.method, LimsupMethod::Window);
        assert!((r.limsup - 0.5).abs() < 1e-15);
        assert!(limsup_dimension(&explicit, 21).is_err());
    }
}
