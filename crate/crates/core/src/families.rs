//! Generators for limsup-set families: rational balls, resonant rectangles,
//! the two-axis exponential example, and finite truncations of their unions.

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Limits;
use crate::content::frostman_lp;
use crate::covering::Shape;
use crate::dimfunc::{kappa_transform, DimensionFunction};
use crate::error::{MtpError, Result};
use crate::formulas::{PowerLaw, SequenceData, TSequence};
use crate::space::{rasterize_with, Aabb, Ball, CubeMask, RasterMode, Rectangle};

pub const FAMILY_VERSION: u32 = 1;

fn family_version() -> u32 {
    FAMILY_VERSION
}

/// Radius or `ρ` law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadiusLaw {
    /// `c · x^{-p}`.
    Power { c: f64, p: f64 },
    /// `c · b^{-x}`.
    Exponential { c: f64, b: f64 },
}

impl RadiusLaw {
    pub fn at(&self, x: f64) -> f64 {
        match *self {
            RadiusLaw::Power { c, p } => c * x.powf(-p),
            RadiusLaw::Exponential { c, b } => c * b.powf(-x),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadiusLaw::Power { c, p } => c > 0.0 && p > 0.0 && c.is_finite() && p.is_finite(),
            RadiusLaw::Exponential { c, b } => c > 0.0 && b > 1.0 && c.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(MtpError::Invalid(format!("radius law {self:?} does not decrease to 0")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BallFamilyKind {
    /// `B(p/q, q^{-τ})` over reduced `p/q` with `0 <= p <= q <= q_max`.
    Rational { tau: f64, q_max: u64 },
    Explicit { balls: Vec<Ball> },
    /// Seeded uniform centers in `[0,1]^dim` with radius `law(n)`, `n >= 1`.
    Geometric { dim: usize, seed: u64, count: usize, radius: RadiusLaw },
}

/// Radius change `r ↦ g^{-1}(f(r))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkSpec {
    pub f: DimensionFunction,
    pub g: DimensionFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFamilySpec {
    #[serde(default = "family_version")]
    pub family_version: u32,
    #[serde(flatten)]
    pub kind: BallFamilyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrink: Option<ShrinkSpec>,
}

impl BallFamilySpec {
    pub fn rational(tau: f64, q_max: u64) -> Self {
        BallFamilySpec { family_version: FAMILY_VERSION, kind: BallFamilyKind::Rational { tau, q_max }, shrink: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family_version != FAMILY_VERSION {
            return Err(MtpError::Invalid(format!("unsupported family_version {}", self.family_version)));
        }
        match &self.kind {
            BallFamilyKind::Rational { tau, q_max } => {
                if !(*tau >= 2.0 && tau.is_finite()) {
                    return Err(MtpError::Invalid(format!("tau must be at least 2, got {tau}")));
                }
                if *q_max == 0 {
                    return Err(MtpError::Invalid("q_max must be positive".into()));
                }
            }
            BallFamilyKind::Explicit { balls } => {
                if let Some(b) = balls.iter().find(|b| b.dim() != balls[0].dim() || !(b.radius > 0.0)) {
                    return Err(MtpError::Invalid(format!("bad ball in explicit list: {b:?}")));
                }
            }
            BallFamilyKind::Geometric { dim, radius, .. } => {
                if *dim == 0 {
                    return Err(MtpError::Invalid("dim must be positive".into()));
                }
                radius.validate()?;
            }
        }
        if let Some(s) = &self.shrink {
            s.f.validate()?;
            s.g.validate()?;
        }
        Ok(())
    }
}

/// Reduced fractions `p/q`, `0 <= p <= q <= q_max`, in `(q, p)` order.
pub fn rationals(q_max: u64) -> impl Iterator<Item = (u64, u64)> {
    (1..=q_max).flat_map(|q| (0..=q).filter(move |&p| p.gcd(&q) == 1).map(move |p| (p, q)))
}

/// The first `count` balls of the family (all of them for finite kinds when
/// `count` is larger).
pub fn generate_balls(spec: &BallFamilySpec, count: usize) -> Result<Vec<Ball>> {
    if count == 0 {
        return Err(MtpError::Precondition("N must be at least 1".into()));
    }
    spec.validate()?;
    let mut balls: Vec<Ball> = match &spec.kind {
        BallFamilyKind::Rational { tau, q_max } => rationals(*q_max)
            .take(count)
            .map(|(p, q)| Ball::new(vec![p as f64 / q as f64], (q as f64).powf(-tau)))
            .collect::<Result<_>>()?,
        BallFamilyKind::Explicit { balls } => balls.iter().take(count).cloned().collect(),
        BallFamilyKind::Geometric { dim, seed, count: total, radius } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (1..=(*total).min(count))
                .map(|n| {
                    let c: Vec<f64> = (0..*dim).map(|_| rng.gen::<f64>()).collect();
                    Ball::new(c, radius.at(n as f64))
                })
                .collect::<Result<_>>()?
        }
    };
    if let Some(s) = &spec.shrink {
        for b in &mut balls {
            b.radius = kappa_transform(&s.f, &s.g, 0.0, b.radius)?;
        }
    }
    Ok(balls)
}

/// Levels `(l_n, u_n]` selecting `J_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelLaw {
    /// `l_n = n - 1`, `u_n = n`.
    Linear,
    /// `l_n = base^{n-1}`, `u_n = base^n`.
    Geometric { base: f64 },
    /// `bounds[n-1] = (l_n, u_n)`.
    Explicit { bounds: Vec<(f64, f64)> },
}

impl LevelLaw {
    pub fn bounds(&self, n: usize) -> Option<(f64, f64)> {
        match self {
            LevelLaw::Linear => Some((n as f64 - 1.0, n as f64)),
            LevelLaw::Geometric { base } => Some((base.powi(n as i32 - 1), base.powi(n as i32))),
            LevelLaw::Explicit { bounds } => bounds.get(n.checked_sub(1)?).copied(),
        }
    }
}

/// One resonant set `R_α`: a point (`lo == hi`) or an axis-parallel piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonantPiece {
    pub beta: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ResonantPiece {
    pub fn point(beta: f64, x: Vec<f64>) -> Self {
        ResonantPiece { beta, lo: x.clone(), hi: x }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonantSystemSpec {
    #[serde(default = "family_version")]
    pub family_version: u32,
    pub pieces: Vec<ResonantPiece>,
    pub levels: LevelLaw,
    pub rho: RadiusLaw,
    pub a: Vec<f64>,
    pub t: TSequence,
}

impl ResonantSystemSpec {
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.family_version != FAMILY_VERSION {
            return Err(MtpError::Invalid(format!("unsupported family_version {}", self.family_version)));
        }
        let d = self.dim();
        if d == 0 || self.a.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(MtpError::Invalid("exponents a must be positive".into()));
        }
        if let Some(p) = self.pieces.iter().find(|p| {
            p.lo.len() != d || p.hi.len() != d || p.lo.iter().zip(&p.hi).any(|(l, h)| l > h) || !p.beta.is_finite()
        }) {
            return Err(MtpError::Invalid(format!("bad resonant piece {p:?}")));
        }
        self.rho.validate()
    }

    /// `(ρ(u_n), a + t_n)`.
    pub fn scale(&self, n: usize) -> Result<(f64, Vec<f64>)> {
        let (_, u) = self
            .levels
            .bounds(n)
            .ok_or_else(|| MtpError::Precondition(format!("no level bounds for n={n}")))?;
        let t = self
            .t
            .at(n)
            .ok_or_else(|| MtpError::Precondition(format!("sequence has no term n={n}")))?;
        if t.len() != self.dim() {
            return Err(MtpError::Invalid("t has the wrong length".into()));
        }
        let e = self.a.iter().zip(&t).map(|(a, t)| a + t).collect();
        Ok((self.rho.at(u), e))
    }

    fn active(&self, n: usize) -> Result<Vec<&ResonantPiece>> {
        let (l, u) = self
            .levels
            .bounds(n)
            .ok_or_else(|| MtpError::Precondition(format!("no level bounds for n={n}")))?;
        Ok(self.pieces.iter().filter(|p| l < p.beta && p.beta <= u).collect())
    }
}

/// Rectangles `Δ(R_α, ρ(u_n)^{a+t_n})` for the point pieces with `α ∈ J_n`.
pub fn generate_rectangles(spec: &ResonantSystemSpec, n: usize) -> Result<Vec<Rectangle>> {
    spec.validate()?;
    let (rho, e) = spec.scale(n)?;
    spec.active(n)?
        .into_iter()
        .filter(|p| p.is_point())
        .map(|p| Rectangle::new(p.lo.clone(), rho, e.clone()))
        .collect()
}

/// The open neighbourhood `E_n` as boxes, including strips around non-point pieces.
pub fn resonant_boxes(spec: &ResonantSystemSpec, n: usize) -> Result<Vec<Aabb>> {
    spec.validate()?;
    let (rho, e) = spec.scale(n)?;
    let w: Vec<f64> = e.iter().map(|&x| rho.powf(x)).collect();
    Ok(spec
        .active(n)?
        .into_iter()
        .map(|p| Aabb {
            lo: p.lo.iter().zip(&w).map(|(x, w)| x - w).collect(),
            hi: p.hi.iter().zip(&w).map(|(x, w)| x + w).collect(),
        })
        .collect())
}

/// `{x ∈ [0,1]^2 : ‖2^n x₁‖ < e^{-nt}, ‖3^n x₂‖ < e^{-n²}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleLLVZSpec {
    pub t: f64,
    pub n_range: (usize, usize),
}

impl ExampleLLVZSpec {
    pub fn new(t: f64, n_range: (usize, usize)) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(MtpError::Invalid(format!("t must be positive, got {t}")));
        }
        if n_range.0 == 0 || n_range.0 > n_range.1 {
            return Err(MtpError::Invalid(format!("bad n range {n_range:?}")));
        }
        Ok(ExampleLLVZSpec { t, n_range })
    }

    /// `a = (1, log 3 / log 2)`.
    pub fn a() -> Vec<f64> {
        vec![1.0, 3f64.ln() / 2f64.ln()]
    }

    /// Resonant points `(k/2^n, j/3^n)` at `β = n`, `ρ(u) = 2^{-u}`; the
    /// half-widths `e^{-nt}/2^n` and `e^{-n²}/3^n` give `t_n = (t, n)/log 2`.
    pub fn resonant_system(&self) -> ResonantSystemSpec {
        let mut pieces = Vec::new();
        for n in self.n_range.0..=self.n_range.1 {
            let (p2, p3) = (1u64 << n, 3u64.pow(n as u32));
            for k in 0..=p2 {
                for j in 0..=p3 {
                    pieces.push(ResonantPiece::point(n as f64, vec![k as f64 / p2 as f64, j as f64 / p3 as f64]));
                }
            }
        }
        let ln2 = 2f64.ln();
        ResonantSystemSpec {
            family_version: FAMILY_VERSION,
            pieces,
            levels: LevelLaw::Linear,
            rho: RadiusLaw::Exponential { c: 1.0, b: 2.0 },
            a: Self::a(),
            t: TSequence::Laws {
                phases: vec![vec![PowerLaw::constant(self.t / ln2), PowerLaw { c0: 0.0, c1: 1.0 / ln2, p: 1.0 }]],
            },
        }
    }

    pub fn rectangles(&self, n: usize) -> Result<Vec<Rectangle>> {
        if n < self.n_range.0 || n > self.n_range.1 {
            return Err(MtpError::Precondition(format!("n={n} outside {:?}", self.n_range)));
        }
        generate_rectangles(&self.resonant_system(), n)
    }

    /// Dimension-number inputs with `t_n = (t, n²)/log 2` and `δ = 1`, `κ = 0`.
    pub fn sequence_data(&self) -> SequenceData {
        let ln2 = 2f64.ln();
        SequenceData {
            a: Self::a(),
            delta: vec![1.0, 1.0],
            kappa: vec![0.0, 0.0],
            t: TSequence::Laws {
                phases: vec![vec![PowerLaw::constant(self.t / ln2), PowerLaw { c0: 0.0, c1: 1.0 / ln2, p: 2.0 }]],
            },
        }
    }
}

/// Sets `E_k` given as unions of open boxes, `sets[k-1] = E_k`.
pub fn ball_sets(balls: &[Ball]) -> Vec<Vec<Aabb>> {
    balls.iter().map(|b| vec![b.to_box()]).collect()
}

/// Each set translated by `shift` on the torus `[0,1)^d`; boxes that cross
/// the boundary are split into their wrapped pieces.
pub fn shifted_sets(sets: &[Vec<Aabb>], shift: &[f64]) -> Result<Vec<Vec<Aabb>>> {
    sets.iter()
        .map(|set| {
            let mut out = Vec::new();
            for b in set {
                if b.dim() != shift.len() {
                    return Err(MtpError::Invalid("shift dimension mismatch".into()));
                }
                let mut pieces = vec![Aabb { lo: vec![], hi: vec![] }];
                for i in 0..shift.len() {
                    let w = (b.hi[i] - b.lo[i]).min(1.0);
                    let lo = (b.lo[i] + shift[i]).rem_euclid(1.0);
                    let hi = lo + w;
                    let spans: Vec<(f64, f64)> = if hi <= 1.0 { vec![(lo, hi)] } else { vec![(lo, 1.0), (0.0, hi - 1.0)] };
                    pieces = pieces
                        .into_iter()
                        .flat_map(|p| {
                            spans.iter().map(move |&(l, h)| {
                                let mut q = p.clone();
                                q.lo.push(l);
                                q.hi.push(h);
                                q
                            })
                        })
                        .collect();
                }
                out.extend(pieces);
            }
            Ok(out)
        })
        .collect()
}

pub fn truncate_limsup(sets: &[Vec<Aabb>], n: usize, end: usize, dim: usize, level: u32) -> Result<CubeMask> {
    truncate_limsup_with(sets, n, end, dim, level, &Limits::from_env())
}

/// Outer rasterization of `⋃_{k=n}^{end} E_k` (1-based, `end` clamped to the family length).
pub fn truncate_limsup_with(
    sets: &[Vec<Aabb>],
    n: usize,
    end: usize,
    dim: usize,
    level: u32,
    limits: &Limits,
) -> Result<CubeMask> {
    if n == 0 || n > end {
        return Err(MtpError::Precondition(format!("need 1 <= n <= N, got n={n}, N={end}")));
    }
    let end = end.min(sets.len());
    let boxes: Vec<Aabb> = if n > end { vec![] } else { sets[n - 1..end].iter().flatten().cloned().collect() };
    let mask = rasterize_with(&boxes, dim, level, RasterMode::Outer, limits)?;
    if mask.cube_count() > limits.max_cells {
        return Err(MtpError::Resource(format!(
            "truncation has {} cubes, budget is {}",
            mask.cube_count(),
            limits.max_cells
        )));
    }
    Ok(mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShrinkLaw {
    /// Concentric ball of half the radius.
    SubBall,
    /// `k^d` balls of radius `r/(4k)` centred on the `k`-grid of the container.
    SubGrid { k: u32 },
    /// Concentric ball of radius `r^{a_max}/2` inside a rectangle.
    RectangleInside,
    /// Concentric box of half-widths `r^{a_i + t_i}` inside a rectangle.
    ResonantCore { t: Vec<f64> },
}

/// One pair `(container, E)` with its recorded content ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrunkOpen {
    pub container: Shape,
    pub mask: CubeMask,
    /// Frostman lower bound for the f-content of `mask`.
    pub content_lower: f64,
    /// `content_lower / m(container)`.
    pub ratio: f64,
}

/// The set `E ⊂ container` of a shrink law, inner-rasterized at `level`.
pub fn shrink_geometry(container: &Shape, law: &ShrinkLaw, level: u32) -> Result<CubeMask> {
    let d = container.center().len();
    let boxes: Vec<Aabb> = match (law, container) {
        (ShrinkLaw::SubBall, Shape::Ball(b)) => vec![b.scaled(0.5).to_box()],
        (ShrinkLaw::SubGrid { k }, Shape::Ball(b)) => {
            let k = *k;
            if k == 0 {
                return Err(MtpError::Invalid("sub_grid needs k >= 1".into()));
            }
            let step = 2.0 * b.radius / k as f64;
            let r = b.radius / (4.0 * k as f64);
            let total = (k as usize).pow(d as u32);
            (0..total)
                .map(|mut g| {
                    let c = (0..d)
                        .map(|i| {
                            let j = g % k as usize;
                            g /= k as usize;
                            b.center[i] - b.radius + (j as f64 + 0.5) * step
                        })
                        .collect();
                    Ok(Ball::new(c, r)?.to_box())
                })
                .collect::<Result<_>>()?
        }
        (ShrinkLaw::RectangleInside, Shape::Rectangle(r)) => {
            let amax = r.exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            vec![Ball::new(r.center.clone(), 0.5 * r.base_radius.powf(amax))?.to_box()]
        }
        (ShrinkLaw::ResonantCore { t }, Shape::Rectangle(r)) => {
            if t.len() != d || t.iter().any(|&t| !(t >= 0.0)) {
                return Err(MtpError::Invalid("resonant_core needs one nonnegative t per axis".into()));
            }
            let w: Vec<f64> = r.exponents.iter().zip(t).map(|(a, t)| r.base_radius.powf(a + t)).collect();
            vec![Aabb {
                lo: r.center.iter().zip(&w).map(|(c, w)| c - w).collect(),
                hi: r.center.iter().zip(&w).map(|(c, w)| c + w).collect(),
            }]
        }
        (_, Shape::Ball(_)) => return Err(MtpError::Invalid("rectangle laws need a rectangle container".into())),
        (_, Shape::Rectangle(_)) => return Err(MtpError::Invalid("ball laws need a ball container".into())),
    };
    let mask = rasterize_with(&boxes, d, level, RasterMode::Inner, &Limits::from_env())?;
    if mask.is_empty() {
        return Err(MtpError::Construction(format!(
            "shrunk set is empty at level {level}; refine the resolution"
        )));
    }
    Ok(mask)
}

/// Emits `E ⊂ container` at resolution `level` by inner rasterization and
/// records its content ratio. Fails when the ratio is below `c`.
pub fn shrink_to_open(
    container: &Shape,
    law: &ShrinkLaw,
    f: &DimensionFunction,
    level: u32,
    c: f64,
) -> Result<ShrunkOpen> {
    let mask = shrink_geometry(container, law, level)?;
    let content_lower = frostman_lp(&mask, f, level)?.value;
    let ratio = content_lower / container.volume();
    if ratio < c {
        return Err(MtpError::Construction(format!(
            "content ratio {ratio:.6e} is below the requested c={c}; achievable c is {ratio:.6e}"
        )));
    }
    Ok(ShrunkOpen { container: container.clone(), mask, content_lower, ratio })
}

/// Pairs `(B_n or R_n, E_n)` with a common declared ratio `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrunkOpenFamily {
    pub f: DimensionFunction,
    pub c: f64,
    pub pairs: Vec<ShrunkOpen>,
}

impl ShrunkOpenFamily {
    pub fn build(containers: &[Shape], law: &ShrinkLaw, f: &DimensionFunction, level: u32, c: f64) -> Result<Self> {
        let pairs = containers
            .iter()
            .enumerate()
            .map(|(i, s)| {
                shrink_to_open(s, law, f, level, c).map_err(|e| match e {
                    MtpError::Construction(m) => MtpError::Construction(format!("set {}: {m}", i + 1)),
                    e => e,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ShrunkOpenFamily { f: *f, c, pairs })
    }

    /// Sets only, with the trivial content bound 0 recorded and `c = 0`.
    pub fn geometric(containers: &[Shape], law: &ShrinkLaw, f: &DimensionFunction, level: u32) -> Result<Self> {
        let pairs = containers
            .iter()
            .map(|s| {
                Ok(ShrunkOpen {
                    container: s.clone(),
                    mask: shrink_geometry(s, law, level)?,
                    content_lower: 0.0,
                    ratio: 0.0,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ShrunkOpenFamily { f: *f, c: 0.0, pairs })
    }

    pub fn min_ratio(&self) -> f64 {
        self.pairs.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn sets(&self) -> Vec<&CubeMask> {
        self.pairs.iter().map(|p| &p.mask).collect()
    }
}
