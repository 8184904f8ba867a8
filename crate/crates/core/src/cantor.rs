//! Cantor-level constructions inside a container ball: level structures with
//! their separation and mass checks, the assembled measure, ball-bound
//! verification, rectangle measures and content-ratio certificates.
//!
//! Family indices are 1-based, as in [`crate::covering`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::content::{frostman_lp, net_content};
use crate::covering::{greedy_order, BoxIndex, Selection, Shape, SEPARATION};
use crate::dimfunc::{compare, DimensionFunction};
use crate::error::{MtpError, Result};
use crate::families::ShrunkOpenFamily;
use crate::measure::DiscreteMeasure;
use crate::space::{inner_shrink, morton_index, neighborhood, side, Aabb, Ball, Cube, CubeMask};

/// Largest `η = 4^{-m}`, `m <= L`, whose erosion `(E)_{-η}` keeps at least half
/// the net content of `E`. Returns `(η, (E)_{-η})`.
pub fn choose_eta(e: &CubeMask, f: &DimensionFunction) -> Result<(f64, CubeMask)> {
    if e.is_empty() {
        return Err(MtpError::Precondition("cannot erode an empty set".into()));
    }
    let l = e.resolution();
    let full = net_content(e, f, l)?;
    for m in 0..=l {
        let eta = side(m);
        let core = inner_shrink(e, eta)?;
        if core.is_empty() {
            continue;
        }
        if net_content(&core, f, l)? >= 0.5 * full * (1.0 - 1e-12) {
            return Ok((eta, core));
        }
    }
    Err(MtpError::Construction(format!(
        "no erosion by 4^-m, m <= {l}, keeps half the content; refine the resolution"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub index: usize,
    pub ball: Ball,
    pub eta: f64,
    /// `L_k`, the eroded set.
    pub set: CubeMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// Smallest family index admitted on this level.
    pub g: usize,
    pub entries: Vec<LevelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PChecks {
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
    pub p4: bool,
    /// `Σ m(B_k) / m(B)` per level.
    pub level_mass: Vec<f64>,
    pub c_low: f64,
    pub c_high: f64,
    /// `Σ m(Δ(L_k, η_k))` per level and its bound `3^{-l} m(B/2)`.
    pub p3_sums: Vec<f64>,
    pub p3_bounds: Vec<f64>,
    pub violations: Vec<String>,
}

impl PChecks {
    pub fn all(&self) -> bool {
        self.p1 && self.p2 && self.p3 && self.p4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStructure {
    pub container: Ball,
    pub l_b: usize,
    pub resolution: u32,
    pub levels: Vec<Level>,
    pub checks: PChecks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelParams {
    /// Smallest index tried for `G`.
    pub g_min: usize,
    pub level_cap: usize,
    /// How many increasing values of `G` to try per level.
    pub max_g_tries: usize,
}

impl Default for LevelParams {
    fn default() -> Self {
        LevelParams { g_min: 1, level_cap: usize::MAX, max_g_tries: 256 }
    }
}

/// `max(1, ceil(f(|B|)/g(|B|)))`.
pub fn level_count(container: &Ball, f: &DimensionFunction, g: &DimensionFunction) -> Result<usize> {
    let diam = container.diameter().min(f.valid_radius_max).min(g.valid_radius_max);
    let v = f.evaluate(diam)? / g.evaluate(diam)?;
    Ok((v * (1.0 - 1e-12)).ceil().max(1.0) as usize)
}

fn bbox_distance(a: &Aabb, b: &Aabb) -> f64 {
    a.distance(b)
}

/// Distance between masks, skipping the exact pass when bounding boxes settle it.
fn far_enough(a: &CubeMask, ab: &Aabb, b: &CubeMask, bb: &Aabb, need: f64) -> bool {
    if bbox_distance(ab, bb) >= need {
        return true;
    }
    a.distance(b) >= need
}

struct Erosions<'a> {
    family: &'a ShrunkOpenFamily,
    f: &'a DimensionFunction,
    cache: Vec<Option<Option<(f64, CubeMask, Aabb)>>>,
}

impl Erosions<'_> {
    fn get(&mut self, i: usize) -> Option<&(f64, CubeMask, Aabb)> {
        if self.cache[i].is_none() {
            let v = choose_eta(&self.family.pairs[i].mask, self.f)
                .ok()
                .and_then(|(eta, m)| m.bounding_box().map(|b| (eta, m, b)));
            self.cache[i] = Some(v);
        }
        self.cache[i].as_ref().unwrap().as_ref()
    }
}

/// Previous-level neighbourhoods `Δ(L_k, η_k)` as open boxes.
#[derive(Clone)]
struct Avoid {
    entries: Vec<(Aabb, Vec<Aabb>)>,
}

impl Avoid {
    fn add(&mut self, e: &LevelEntry) {
        let boxes: Vec<Aabb> = e.set.cubes().iter().map(|c| c.to_box().expand(e.eta)).collect();
        let bb = e.set.bounding_box().expect("entries are nonempty").expand(e.eta);
        self.entries.push((bb, boxes));
    }

    fn meets(&self, q: &Aabb) -> bool {
        self.entries.iter().any(|(bb, boxes)| bb.meets(q) && boxes.iter().any(|b| b.meets(q)))
    }
}

/// Builds levels `K(1..min(l_B, level_cap))` from the containers and shrunk
/// sets of `family`. Level 1 is the K_{G,B} selection in `container`; later
/// levels pack `B/2` away from earlier neighbourhoods with radii below half
/// the smallest earlier `η`. Within a level, sets closer than P1 allows are
/// skipped. `G` starts at `g_min` and grows until P3 holds.
pub fn build_levels(
    container: &Ball,
    family: &ShrunkOpenFamily,
    f: &DimensionFunction,
    g: &DimensionFunction,
    params: LevelParams,
) -> Result<LevelStructure> {
    if !compare(f, g).holds() {
        return Err(MtpError::Precondition("build_levels needs f ⪯ g".into()));
    }
    if family.pairs.is_empty() {
        return Err(MtpError::Precondition("empty family".into()));
    }
    let mut balls = Vec::with_capacity(family.pairs.len());
    for (i, p) in family.pairs.iter().enumerate() {
        match &p.container {
            Shape::Ball(b) if b.dim() == container.dim() => balls.push(b.clone()),
            _ => {
                return Err(MtpError::Precondition(format!(
                    "family set {} is not a ball of dimension {}",
                    i + 1,
                    container.dim()
                )))
            }
        }
    }
    let resolution = family.pairs[0].mask.resolution();
    if family.pairs.iter().any(|p| p.mask.resolution() != resolution) {
        return Err(MtpError::Precondition("family masks have different resolutions".into()));
    }
    let l_b = level_count(container, f, g)?;
    let n_levels = if f == g { 1 } else { l_b.min(params.level_cap.max(1)) };
    let half = container.scaled(0.5);
    let container_box = container.to_box();

    let mut thresholds = vec![params.g_min.max(1)];
    for i in params.g_min.max(1)..balls.len() {
        if balls[i].radius < balls[i - 1].radius {
            thresholds.push(i + 1);
        }
    }
    thresholds.truncate(params.max_g_tries.max(1));

    let mut b = Builder {
        balls: &balls,
        er: Erosions { family, f, cache: vec![None; balls.len()] },
        container_box,
        half_box: half.to_box(),
        half_volume: half.volume(),
        thresholds,
        n_levels,
    };
    let levels = b.build_from(1, &Avoid { entries: vec![] }, f64::INFINITY)?;
    let mut ls = LevelStructure {
        container: container.clone(),
        l_b,
        resolution,
        levels,
        checks: PChecks {
            p1: false,
            p2: false,
            p3: false,
            p4: false,
            level_mass: vec![],
            c_low: 0.0,
            c_high: 0.0,
            p3_sums: vec![],
            p3_bounds: vec![],
            violations: vec![],
        },
    };
    ls.checks = check_properties(&ls)?;
    Ok(ls)
}

struct Builder<'a> {
    balls: &'a [Ball],
    er: Erosions<'a>,
    container_box: Aabb,
    half_box: Aabb,
    half_volume: f64,
    thresholds: Vec<usize>,
    n_levels: usize,
}

impl Builder<'_> {
    /// Levels `l..=n_levels`. Every level but the last keeps only radii at
    /// or above a cut; the cut starts at zero and rises through the radii in
    /// use until the following levels can be built.
    fn build_from(&mut self, l: usize, avoid: &Avoid, r_min: f64) -> Result<Vec<Level>> {
        let mut cut = 0.0f64;
        let mut last_err;
        loop {
            let level = match self.level(l, avoid, r_min, cut)? {
                Ok(level) => level,
                Err(e) => return Err(e),
            };
            if l == self.n_levels {
                return Ok(vec![level]);
            }
            let mut next = Avoid { entries: avoid.entries.clone() };
            let mut rm = r_min;
            for e in &level.entries {
                next.add(e);
                rm = rm.min(e.eta);
            }
            match self.build_from(l + 1, &next, rm) {
                Ok(rest) => {
                    let mut v = vec![level];
                    v.extend(rest);
                    return Ok(v);
                }
                Err(e) => last_err = e,
            }
            let smallest = level.entries.iter().map(|e| e.ball.radius).fold(f64::INFINITY, f64::min);
            match self.balls.iter().map(|b| b.radius).filter(|&r| r > smallest).fold(None, |m: Option<f64>, r| {
                Some(m.map_or(r, |m| m.min(r)))
            }) {
                Some(c) if c > cut => cut = c,
                _ => return Err(last_err),
            }
        }
    }

    /// One level with radii `>= cut`; the inner error reports why no `G` worked.
    fn level(&mut self, l: usize, avoid: &Avoid, r_min: f64, cut: f64) -> Result<std::result::Result<Level, MtpError>> {
        let bound = 3f64.powi(-(l as i32)) * self.half_volume;
        let region = if l == 1 { self.container_box.clone() } else { self.half_box.clone() };
        let mut last_sum = None;
        for gv in self.thresholds.clone() {
            let pool: Vec<usize> = (gv - 1..self.balls.len())
                .filter(|&i| {
                    let b = &self.balls[i];
                    let bx = b.to_box();
                    b.radius >= cut
                        && b.dim() == region.dim()
                        && (l == 1 || b.radius < r_min / 2.0)
                        && region.contains_box(&bx)
                        && !avoid.meets(&bx)
                })
                .collect();
            let radii: Vec<f64> = pool.iter().map(|&i| self.balls[i].radius).collect();
            let order: Vec<usize> = greedy_order(&radii).into_iter().map(|k| pool[k]).collect();
            let entries = pack_level(&order, self.balls, &mut self.er)?;
            if entries.is_empty() {
                break;
            }
            let sum = p3_sum(&entries)?;
            if sum <= bound {
                return Ok(Ok(Level { g: gv, entries }));
            }
            last_sum = Some(sum);
        }
        Ok(Err(MtpError::Construction(match last_sum {
            Some(s) => format!("level {l}: P3 fails for every G tried (sum {s:.4e} > bound {bound:.4e})"),
            None => format!("level {l}: no admissible family sets remain; lengthen the truncation"),
        })))
    }
}

/// Greedy pass over `order`: 3-dilates of balls disjoint, erosion available, and P1 against the sets kept so far.
fn pack_level(order: &[usize], balls: &[Ball], er: &mut Erosions) -> Result<Vec<LevelEntry>> {
    let mut dil = BoxIndex::new();
    let mut kept: Vec<(LevelEntry, Aabb)> = Vec::new();
    for &i in order {
        let d = balls[i].scaled(SEPARATION).to_box();
        if dil.meets_any(&d) {
            continue;
        }
        let Some((eta, set, bb)) = er.get(i).cloned() else { continue };
        let ok = kept.iter().all(|(e, ebb)| {
            let need = 3.0 * balls[i].radius.max(e.ball.radius);
            far_enough(&set, &bb, &e.set, ebb, need)
        });
        if !ok {
            continue;
        }
        dil.insert(d);
        kept.push((LevelEntry { index: i + 1, ball: balls[i].clone(), eta, set }, bb));
    }
    Ok(kept.into_iter().map(|(e, _)| e).collect())
}

fn p3_sum(entries: &[LevelEntry]) -> Result<f64> {
    let mut s = 0.0;
    for e in entries {
        s += neighborhood(&e.set, e.eta)?.measure();
    }
    Ok(s)
}

/// Recomputes P1–P4 on a structure from scratch.
pub fn check_properties(ls: &LevelStructure) -> Result<PChecks> {
    let mut v = Vec::new();
    let boxes: Vec<Vec<Aabb>> = ls
        .levels
        .iter()
        .map(|l| l.entries.iter().map(|e| e.set.bounding_box().unwrap_or(Aabb { lo: vec![], hi: vec![] })).collect())
        .collect();

    let mut p1 = true;
    for (li, level) in ls.levels.iter().enumerate() {
        let es = &level.entries;
        for a in 0..es.len() {
            for b in a + 1..es.len() {
                let need = 3.0 * es[a].ball.radius.max(es[b].ball.radius);
                if !far_enough(&es[a].set, &boxes[li][a], &es[b].set, &boxes[li][b], need) {
                    p1 = false;
                    v.push(format!("P1: sets {} and {} on level {}", es[a].index, es[b].index, li + 1));
                }
            }
        }
    }

    let mb = ls.container.volume();
    let level_mass: Vec<f64> = ls
        .levels
        .iter()
        .map(|l| l.entries.iter().map(|e| e.ball.volume()).sum::<f64>() / mb)
        .collect();
    let c_low = level_mass.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_high = level_mass.iter().cloned().fold(0.0, f64::max);
    let p2 = !ls.levels.is_empty() && c_low > 0.0;
    if !p2 {
        v.push("P2: a level carries no mass".into());
    }

    let half = ls.container.scaled(0.5).volume();
    let mut p3_sums = Vec::new();
    let mut p3_bounds = Vec::new();
    let mut p3 = true;
    for (li, level) in ls.levels.iter().enumerate() {
        let s = p3_sum(&level.entries)?;
        let bound = 3f64.powi(-(li as i32 + 1)) * half;
        if s > bound {
            p3 = false;
            v.push(format!("P3: level {} sum {s:.4e} exceeds {bound:.4e}", li + 1));
        }
        p3_sums.push(s);
        p3_bounds.push(bound);
    }

    let mut p4 = true;
    for i in 0..ls.levels.len() {
        for j in i + 1..ls.levels.len() {
            for (a, ea) in ls.levels[i].entries.iter().enumerate() {
                for (b, eb) in ls.levels[j].entries.iter().enumerate() {
                    let need = ea.eta / 2.0;
                    if eb.ball.radius >= need {
                        p4 = false;
                        v.push(format!("P4: radius of set {} is not below η_{}/2", eb.index, ea.index));
                    }
                    if !far_enough(&ea.set, &boxes[i][a], &eb.set, &boxes[j][b], need) {
                        p4 = false;
                        v.push(format!("P4: sets {} and {} closer than η/2", ea.index, eb.index));
                    }
                }
            }
        }
    }
    Ok(PChecks { p1, p2, p3, p4, level_mass, c_low, c_high, p3_sums, p3_bounds, violations: v })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryMeasure {
    pub index: usize,
    pub level: usize,
    /// Total mass of the Frostman solution before normalization.
    pub frostman_value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorMeasure {
    pub weights: DiscreteMeasure,
    pub provenance: Vec<EntryMeasure>,
}

/// `μ = (1/n) Σ_l Σ_k m(B_k)/Σ_{K(l)} m(B) · ν_k` with `ν_k` the normalized
/// Frostman solution on `L_k` and `n` the number of levels built.
pub fn build_measure(ls: &LevelStructure, f: &DimensionFunction) -> Result<CantorMeasure> {
    if ls.levels.is_empty() {
        return Err(MtpError::Precondition("structure has no levels".into()));
    }
    let n = ls.levels.len() as f64;
    let mut nus = Vec::new();
    let mut provenance = Vec::new();
    for (li, level) in ls.levels.iter().enumerate() {
        let tot: f64 = level.entries.iter().map(|e| e.ball.volume()).sum();
        for e in &level.entries {
            let cert = frostman_lp(&e.set, f, ls.resolution)?;
            let w = e.ball.volume() / tot / n;
            provenance.push(EntryMeasure { index: e.index, level: li + 1, frostman_value: cert.value, weight: w });
            nus.push((w, cert.weights.normalized()?));
        }
    }
    let parts: Vec<(f64, &DiscreteMeasure)> = nus.iter().map(|(w, m)| (*w, m)).collect();
    let weights = DiscreteMeasure::combine(&parts)?;
    Ok(CantorMeasure { weights, provenance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    /// `max μ(B(x,r)) f(|B|) / f(r)`.
    pub c_star: f64,
    pub worst: Option<Ball>,
    pub probes: usize,
}

pub fn verify_holder(mu: &DiscreteMeasure, f: &DimensionFunction, container: &Ball, samples: &[Ball]) -> Result<HolderReport> {
    let fb = f.evaluate(container.diameter().min(f.valid_radius_max))?;
    let mut c_star = 0.0f64;
    let mut worst = None;
    for b in samples {
        let fr = f.evaluate(b.radius.min(f.valid_radius_max))?;
        let v = mu.ball_mass(b) * fb / fr;
        if v > c_star {
            c_star = v;
            worst = Some(b.clone());
        }
    }
    Ok(HolderReport { c_star, worst, probes: samples.len() })
}

/// Deterministic probe balls: for each radius `ρ = 4^{-n}` from the container
/// radius down to the cell side, centers on the `ρ/2` grid over every level-`n`
/// cube meeting the support, kept inside the closed container. Support cube
/// corners are grid points at fine enough `n`.
pub fn holder_probes(mu: &DiscreteMeasure, container: &Ball) -> Result<Vec<Ball>> {
    let d = mu.dim();
    let l = mu.resolution();
    let cb = container.to_box();
    let support = mu.support();
    let mut out = Vec::new();
    for n in 0..=l {
        let rho = side(n);
        if rho > container.radius {
            continue;
        }
        let sh = 2 * d as u32 * (l - n);
        let mut keys = BTreeSet::new();
        for &(s, e) in support.runs() {
            let (a, b) = (s >> sh, (e - 1) >> sh);
            keys.extend(a..=b);
        }
        let mut pts: BTreeSet<Vec<u64>> = BTreeSet::new();
        for k in keys {
            let idx = morton_index(k, n, d);
            for off in 0..3usize.pow(d as u32) {
                let mut o = off;
                let p: Vec<u64> = idx
                    .iter()
                    .map(|&i| {
                        let v = 2 * i + (o % 3) as u64;
                        o /= 3;
                        v
                    })
                    .collect();
                pts.insert(p);
            }
        }
        for p in pts {
            let x: Vec<f64> = p.iter().map(|&v| v as f64 * rho / 2.0).collect();
            if x.iter().zip(cb.lo.iter().zip(&cb.hi)).all(|(x, (lo, hi))| *x >= *lo && *x <= *hi) {
                out.push(Ball { center: x, radius: rho });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RectangleMeasureMode {
    /// One sidelength vector; `ν_k` is Lebesgue measure on `E_k`.
    EqualSidelength,
    /// Mixed sidelengths grouped by `2^{-ℓ-1} <= r_k < 2^{-ℓ}`; `ν_k` is the
    /// Frostman solution for `r^s` on `E_k`.
    Grouped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMass {
    pub ell: i32,
    pub count: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleMeasure {
    pub weights: DiscreteMeasure,
    pub groups: Vec<GroupMass>,
    pub s: f64,
    /// `max μ(B(x,r)) m(B) / r^s` over the probes.
    pub constant: f64,
    /// `Σ m(R_k)` over the selection.
    pub selection_mass: f64,
    /// `max μ(B(x,r)) Σ m(R_k) / r^s`: the constant with the covering ratio
    /// of the selection divided out.
    pub normalized_constant: f64,
    pub worst: Option<Ball>,
    pub probes: usize,
}

/// `μ = Σ_k m(R_k)/Σ m(R) · ν_k` over the selected rectangles, where set `k`
/// of `family` holds `E_k` for the rectangle with selection index `k`.
pub fn build_measure_rectangles(
    selection: &Selection,
    family: &ShrunkOpenFamily,
    s: f64,
    mode: RectangleMeasureMode,
) -> Result<RectangleMeasure> {
    if selection.chosen.is_empty() {
        return Err(MtpError::Precondition("empty selection".into()));
    }
    let mut parts = Vec::new();
    let mut rect_info = Vec::new();
    for c in &selection.chosen {
        let pair = family
            .pairs
            .get(c.index - 1)
            .ok_or_else(|| MtpError::Precondition(format!("rectangle {} has no shrunk set", c.index)))?;
        let Shape::Rectangle(r) = &c.shape else {
            return Err(MtpError::Precondition(format!("selection entry {} is not a rectangle", c.index)));
        };
        if pair.container != c.shape {
            return Err(MtpError::Precondition(format!("rectangle {} does not match its shrunk set", c.index)));
        }
        if mode == RectangleMeasureMode::Grouped {
            let amax = r.exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if pair.mask.diameter() > r.base_radius.powf(amax) * (1.0 + 1e-12) {
                return Err(MtpError::Precondition(format!("set {} is wider than r^a_d", c.index)));
            }
        }
        if pair.mask.is_empty() {
            return Err(MtpError::Precondition(format!("set {} is empty", c.index)));
        }
        rect_info.push((r.volume(), r.base_radius));
    }
    if mode == RectangleMeasureMode::EqualSidelength {
        let r0 = match &selection.chosen[0].shape {
            Shape::Rectangle(r) => r.radii(),
            Shape::Ball(_) => unreachable!(),
        };
        for c in &selection.chosen {
            if let Shape::Rectangle(r) = &c.shape {
                if r.radii().iter().zip(&r0).any(|(a, b)| (a - b).abs() > 1e-12 * b) {
                    return Err(MtpError::Precondition(format!(
                        "rectangle {} has different sidelengths in equal-sidelength mode",
                        c.index
                    )));
                }
            }
        }
    }
    let total_vol: f64 = rect_info.iter().map(|v| v.0).sum();
    let f = DimensionFunction::power(s);
    for (c, (vol, _)) in selection.chosen.iter().zip(&rect_info) {
        let mask = &family.pairs[c.index - 1].mask;
        let nu = match mode {
            RectangleMeasureMode::EqualSidelength => DiscreteMeasure::uniform_on(mask, 1.0)?,
            RectangleMeasureMode::Grouped => frostman_lp(mask, &f, mask.resolution())?.weights.normalized()?,
        };
        parts.push((vol / total_vol, nu));
    }
    let mut groups: Vec<GroupMass> = Vec::new();
    for ((w, _), (_, r)) in parts.iter().zip(&rect_info) {
        let ell = (-r.log2()).floor() as i32;
        match groups.iter_mut().find(|g| g.ell == ell) {
            Some(g) => {
                g.count += 1;
                g.mass += w;
            }
            None => groups.push(GroupMass { ell, count: 1, mass: *w }),
        }
    }
    groups.sort_by_key(|g| g.ell);
    let refs: Vec<(f64, &DiscreteMeasure)> = parts.iter().map(|(w, m)| (*w, m)).collect();
    let weights = DiscreteMeasure::combine(&refs)?;
    let probes = rectangle_probes(selection, family)?;
    let (constant, worst) = holder_constant(&weights, &probes, selection.container.volume(), s);
    let normalized_constant = constant * total_vol / selection.container.volume();
    Ok(RectangleMeasure {
        weights,
        groups,
        s,
        constant,
        selection_mass: total_vol,
        normalized_constant,
        worst,
        probes: probes.len(),
    })
}

/// Probe balls for rectangle measures: centers at the middle, corners and edge
/// midpoints of each shrunk set's bounding box, radii `2^{-j}` from the largest
/// half-side of the rectangle down to the cell side.
pub fn rectangle_probes(selection: &Selection, family: &ShrunkOpenFamily) -> Result<Vec<Ball>> {
    let mut out = Vec::new();
    for c in &selection.chosen {
        let mask = &family.pairs[c.index - 1].mask;
        let Some(bb) = mask.bounding_box() else { continue };
        let d = bb.dim();
        let top = c.shape.to_box().hi.iter().zip(&c.shape.to_box().lo).map(|(h, l)| (h - l) / 2.0).fold(0.0, f64::max);
        let jmin = (-top.log2() - 1e-9).ceil().max(1.0) as i32;
        let jmax = 2 * mask.resolution() as i32;
        for off in 0..3usize.pow(d as u32) {
            let mut o = off;
            let x: Vec<f64> = (0..d)
                .map(|i| {
                    let t = (o % 3) as f64 / 2.0;
                    o /= 3;
                    bb.lo[i] + t * (bb.hi[i] - bb.lo[i])
                })
                .collect();
            for j in jmin..=jmax {
                out.push(Ball { center: x.clone(), radius: 0.5f64.powi(j) });
            }
        }
    }
    Ok(out)
}

/// `max μ(B) · scale / r^s` over `probes`.
pub fn holder_constant(mu: &DiscreteMeasure, probes: &[Ball], scale: f64, s: f64) -> (f64, Option<Ball>) {
    let mut best = 0.0f64;
    let mut worst = None;
    for b in probes {
        let v = mu.ball_mass(b) * scale / b.radius.powf(s);
        if v > best {
            best = v;
            worst = Some(b.clone());
        }
    }
    (best, worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    /// Largest grid exponent whose constant does not grow along the runs.
    pub exponent: f64,
    /// `constants[i][j]`: run `i`, grid exponent `j`.
    pub constants: Vec<Vec<f64>>,
}

/// One measure of a scale sweep. Probe constants are `μ(B) · scale / r^s`.
#[derive(Debug, Clone)]
pub struct ExponentRun {
    pub measure: DiscreteMeasure,
    pub probes: Vec<Ball>,
    pub scale: f64,
}

/// Finite-scale Hölder exponent from measures built at successively finer
/// scales: the largest `s'` such that for every grid value up to `s'` and every
/// consecutive pair of runs the probe constant does not increase.
pub fn holder_exponent(runs: &[ExponentRun], s_grid: &[f64]) -> Result<ExponentEstimate> {
    if runs.len() < 2 || s_grid.is_empty() {
        return Err(MtpError::Precondition("need two runs and a nonempty exponent grid".into()));
    }
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MtpError::Precondition("exponent grid must increase".into()));
    }
    let constants: Vec<Vec<f64>> = runs
        .iter()
        .map(|run| {
            let masses: Vec<(f64, f64)> = run.probes.iter().map(|b| (run.measure.ball_mass(b), b.radius)).collect();
            s_grid
                .iter()
                .map(|&s| masses.iter().map(|&(m, r)| m * run.scale / r.powf(s)).fold(0.0, f64::max))
                .collect()
        })
        .collect();
    let mut exponent = f64::NAN;
    for (j, &s) in s_grid.iter().enumerate() {
        let ok = constants.windows(2).all(|w| w[1][j] <= w[0][j] * (1.0 + 1e-9));
        if !ok {
            break;
        }
        exponent = s;
    }
    if exponent.is_nan() {
        return Err(MtpError::Estimation("constants grow already at the smallest exponent".into()));
    }
    Ok(ExponentEstimate { exponent, constants })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipProbe {
    pub cube: Cube,
    /// Frostman lower bound for the content of `F ∩ Q`.
    pub lower: f64,
    /// Net content of `Q`.
    pub reference: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LIPCertificate {
    pub f: DimensionFunction,
    pub probes: Vec<LipProbe>,
    pub c_measured: f64,
    pub passed: bool,
    pub failure: Option<String>,
}

/// Content ratios `content(F ∩ Q) / content(Q)` over every dyadic cube `Q` at
/// the given levels.
pub fn lip_verify(set: &CubeMask, f: &DimensionFunction, probe_levels: &[u32]) -> Result<LIPCertificate> {
    if probe_levels.is_empty() {
        return Err(MtpError::Precondition("no probe levels".into()));
    }
    let l = set.resolution();
    let d = set.dim();
    let mut probes = Vec::new();
    let mut c = f64::INFINITY;
    let mut failure = None;
    for &pl in probe_levels {
        if pl > l {
            return Err(MtpError::Precondition(format!("probe level {pl} is finer than the resolution {l}")));
        }
        if d as u32 * pl > 20 {
            return Err(MtpError::Resource(format!("probe level {pl} gives too many cubes")));
        }
        for key in 0..(1u128 << (2 * d as u32 * pl)) {
            let q = Cube { level: pl, index: morton_index(key, pl, d) };
            let qm = CubeMask::from_cubes(d, l, std::slice::from_ref(&q))?;
            let reference = net_content(&qm, f, l)?;
            let inter = set.restrict_to_cube(&q)?;
            let lower = if inter.is_empty() { 0.0 } else { frostman_lp(&inter, f, l)?.value };
            let ratio = lower / reference;
            if inter.is_empty() && failure.is_none() {
                failure = Some(format!("probe cube level {pl} index {:?} misses the set", q.index));
            }
            c = c.min(ratio);
            probes.push(LipProbe { cube: q, lower, reference, ratio });
        }
    }
    Ok(LIPCertificate { f: *f, probes, c_measured: c, passed: failure.is_none() && c > 0.0, failure })
}

/// `c_measured` for `r^α` over each `α` in `alphas`.
pub fn lip_sweep(set: &CubeMask, alphas: &[f64], probe_levels: &[u32]) -> Result<Vec<(f64, f64)>> {
    alphas
        .iter()
        .map(|&a| {
            let f = DimensionFunction::new(a, 0.0)?;
            Ok((a, lip_verify(set, &f, probe_levels)?.c_measured))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{generate_balls, BallFamilySpec, ShrinkLaw, ShrunkOpenFamily};
    use crate::space::{rasterize, RasterMode};

    #[test]
    fn choose_eta_examples() {
        let f = DimensionFunction::power(1.0);
        let unit = CubeMask::full(1, 4).unwrap();
        let (eta, core) = choose_eta(&unit, &f).unwrap();
        assert_eq!(eta, 0.25);
        assert!((core.measure() - 0.5).abs() < 1e-15);

        let cube = CubeMask::from_cubes(1, 5, &[Cube::new(2, vec![5]).unwrap()]).unwrap();
        let (eta, core) = choose_eta(&cube, &f).unwrap();
        assert_eq!(eta, side(3));
        assert_eq!(core.bounding_box().unwrap().lo, vec![5.0 / 16.0 + side(3)]);

        let cell = CubeMask::from_cubes(1, 3, &[Cube::new(3, vec![7]).unwrap()]).unwrap();
        assert!(matches!(choose_eta(&cell, &f), Err(MtpError::Construction(_))));
    }

    #[test]
    fn uniform_measure_constant() {
        let unit = Ball::new(vec![0.5, 0.5], 0.5).unwrap();
        let mu = DiscreteMeasure::uniform_on(&CubeMask::full(2, 3).unwrap(), 1.0).unwrap();
        let f = DimensionFunction::power(2.0);
        let probes = holder_probes(&mu, &unit).unwrap();
        let h = verify_holder(&mu, &f, &unit, &probes).unwrap();
        assert!((h.c_star - 4.0).abs() < 1e-9, "{h:?}");

        let f = DimensionFunction::power(1.0);
        let unit1 = Ball::new(vec![0.5], 0.5).unwrap();
        let pm = DiscreteMeasure::point_mass(&[0.3], 4).unwrap();
        let probes = holder_probes(&pm, &unit1).unwrap();
        let h = verify_holder(&pm, &f, &unit1, &probes).unwrap();
        assert!((h.c_star - 1.0 / side(4)).abs() < 1e-9, "{h:?}");
    }

    fn jarnik(level: u32, q_max: u64) -> ShrunkOpenFamily {
        let balls = generate_balls(&BallFamilySpec::rational(2.0, q_max), usize::MAX).unwrap();
        let shapes: Vec<Shape> = balls.into_iter().map(Shape::Ball).collect();
        ShrunkOpenFamily::build(&shapes, &ShrinkLaw::SubGrid { k: 2 }, &DimensionFunction::power(0.5), level, 0.0).unwrap()
    }

    #[test]
    fn one_level_when_f_equals_g() {
        let fam = jarnik(7, 12);
        let f = DimensionFunction::power(1.0);
        let unit = Ball::new(vec![0.5], 0.5).unwrap();
        let ls = build_levels(&unit, &fam, &f, &f, LevelParams::default()).unwrap();
        assert_eq!(ls.levels.len(), 1);
        assert!(ls.checks.all(), "{:?}", ls.checks);
        let mu = build_measure(&ls, &f).unwrap();
        assert!((mu.weights.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_levels_and_measure() {
        let fam = jarnik(8, 32);
        let f = DimensionFunction::power(0.5);
        let g = DimensionFunction::power(1.0);
        let b = Ball::new(vec![0.5], 0.25).unwrap();
        let ls = build_levels(&b, &fam, &f, &g, LevelParams::default()).unwrap();
        assert_eq!(ls.l_b, 2);
        assert_eq!(ls.levels.len(), 2);
        assert!(ls.checks.all(), "{:?}", ls.checks);
        let mu = build_measure(&ls, &f).unwrap();
        assert!((mu.weights.total() - 1.0).abs() < 1e-9);
        for level in &ls.levels {
            let support = level
                .entries
                .iter()
                .fold(CubeMask::empty(1, 8).unwrap(), |acc, e| acc.union(&e.set).unwrap());
            let m: f64 = support.cubes().iter().map(|c| mu.weights.cube_mass(c)).sum();
            assert!((m - 0.5).abs() < 1e-9, "{m}");
        }
    }

    #[test]
    fn level_cap_limits_depth() {
        let fam = jarnik(8, 32);
        let f = DimensionFunction::power(0.5);
        let g = DimensionFunction::power(1.0);
        let b = Ball::new(vec![0.5], 0.25).unwrap();
        let params = LevelParams { level_cap: 1, ..LevelParams::default() };
        let ls = build_levels(&b, &fam, &f, &g, params).unwrap();
        assert_eq!(ls.levels.len(), 1);
        assert!(build_levels(&b, &fam, &g, &f, params).is_err());
    }

    #[test]
    fn lip_full_space() {
        let full = CubeMask::full(1, 6).unwrap();
        let cert = lip_verify(&full, &DimensionFunction::power(0.5), &[1, 2]).unwrap();
        assert!(cert.passed);
        assert!(cert.probes.iter().all(|p| (p.ratio - 1.0).abs() < 1e-6), "{cert:?}");
        let half = rasterize(&[Aabb { lo: vec![0.0], hi: vec![0.5] }], 1, 6, RasterMode::Outer).unwrap();
        let cert = lip_verify(&half, &DimensionFunction::power(1.0), &[1]).unwrap();
        assert!(!cert.passed && cert.failure.is_some());
    }
}
