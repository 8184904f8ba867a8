//! Hausdorff content on the base-4 cube tree: the exact net-cover recursion,
//! the fractional cover LP, its Frostman dual, and the singular value LP.
//!
//! The LPs run on a compressed tree. Each canonical cube of the mask is one
//! variable whose capacity is the best uniform cover of a full cube; ancestors
//! that split the mask give the remaining rows, and chains of ancestors over
//! the same cubes collapse to one row with the smallest cap.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Limits;
use crate::dimfunc::{compare, DimensionFunction};
use crate::error::{MtpError, Result};
use crate::lp::{pack_mw, solve_dense, LinearProgram, Row, DENSE_ROW_LIMIT};
use crate::measure::DiscreteMeasure;
use crate::space::{side, Ball, Cube, CubeMask};

/// Options shared by the content solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContentOptions {
    /// Covers may only use cubes of level `>= level_floor` (diameter cap `4^{-floor}`).
    pub level_floor: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentEstimate {
    pub lower: f64,
    pub upper: f64,
    pub depth: u32,
    pub f: DimensionFunction,
    pub binding_constraints: Vec<Cube>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanCertificate {
    pub weights: DiscreteMeasure,
    pub value: f64,
    pub binding_constraints: Vec<Cube>,
    /// Upper bound on the optimum; equals `value` for simplex solves.
    pub upper_bound: f64,
}

/// Weight `weight` on every level-`cover_level` descendant of `cube`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverEntry {
    pub cube: Cube,
    pub weight: f64,
    pub cover_level: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverCertificate {
    pub entries: Vec<CoverEntry>,
    pub value: f64,
    /// Lower bound on the optimum; equals `value` for simplex solves.
    pub lower_bound: f64,
}

impl CoverCertificate {
    /// Smallest total weight over the cells of `mask` (1 or more for a valid cover).
    pub fn min_coverage(&self, mask: &CubeMask) -> f64 {
        mask.cubes()
            .iter()
            .map(|c| {
                self.entries
                    .iter()
                    .filter(|e| e.cube.contains_cube(c))
                    .map(|e| e.weight)
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Recomputes `sum weight * (#subcubes) * f(side)`.
    pub fn cost(&self, f: &DimensionFunction) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let k = (e.cover_level - e.cube.level) * e.cube.dim() as u32;
                e.weight * 4f64.powi(k as i32) * f.eval(side(e.cover_level))
            })
            .sum()
    }
}

fn prepare(a: &CubeMask, f: &DimensionFunction, depth: u32, opts: ContentOptions) -> Result<(CubeMask, u32)> {
    f.validate()?;
    if a.resolution() > depth {
        return Err(MtpError::Precondition(format!(
            "mask resolution {} is finer than depth {depth}",
            a.resolution()
        )));
    }
    let limits = Limits::from_env();
    if depth > limits.max_level {
        return Err(MtpError::Resource(format!("depth {depth} exceeds {}", limits.max_level)));
    }
    let mut floor = opts.level_floor;
    while side(floor) > f.valid_radius_max * (1.0 + 1e-12) {
        floor += 1;
    }
    if floor > depth {
        return Err(MtpError::Precondition(format!(
            "no cube level in [{floor}, {depth}] is admissible for f"
        )));
    }
    Ok((a.refine_to(depth)?, floor))
}

/// Best cover of one full level-`n` cube by its subcubes of levels in
/// `[max(n, floor), depth]`: `(cost, level)`.
fn full_cap(f: &DimensionFunction, d: usize, n: u32, floor: u32, depth: u32) -> (f64, u32) {
    let mut best = (f64::INFINITY, depth);
    for j in n.max(floor)..=depth {
        let v = 4f64.powi(((j - n) * d as u32) as i32) * f.eval(side(j));
        if v < best.0 {
            best = (v, j);
        }
    }
    best
}

struct Unit {
    cube: Cube,
    level: u32,
    cap: f64,
}

/// Laminar packing structure over the canonical cubes of a mask.
struct Tree {
    cubes: Vec<Cube>,
    /// Per-cube cap and the cover it comes from.
    leaf: Vec<Unit>,
    /// `(first, end)` cube ranges of multi-cube rows.
    groups: Vec<((usize, usize), Unit)>,
}

impl Tree {
    fn build(mask: &CubeMask, f: &DimensionFunction, floor: u32) -> Result<Tree> {
        let depth = mask.resolution();
        let d = mask.dim();
        let cubes = mask.cubes();
        if cubes.is_empty() {
            return Err(MtpError::Precondition("mask is empty".into()));
        }
        let budget = Limits::from_env().max_cells;
        if cubes.len().saturating_mul((depth - floor + 1) as usize) > budget {
            return Err(MtpError::Resource(format!(
                "{} cubes over {} levels exceed the cell budget {budget}",
                cubes.len(),
                depth - floor + 1
            )));
        }
        let mut leaf: Vec<Unit> = cubes
            .iter()
            .map(|c| {
                let (cap, level) = full_cap(f, d, c.level, floor, depth);
                Unit { cube: c.clone(), level, cap }
            })
            .collect();
        let keys: Vec<u128> = cubes.iter().map(|c| crate::space::mask_block(d, depth, c).0).collect();
        let mut groups: BTreeMap<(usize, usize), Unit> = BTreeMap::new();
        for l in floor..depth {
            let sh = 2 * d as u32 * (depth - l);
            let cap = f.eval(side(l));
            let mut i = 0;
            while i < cubes.len() {
                if cubes[i].level <= l {
                    i += 1;
                    continue;
                }
                let key = keys[i] >> sh;
                let mut j = i + 1;
                while j < cubes.len() && cubes[j].level > l && keys[j] >> sh == key {
                    j += 1;
                }
                let unit = Unit {
                    cube: Cube { level: l, index: crate::space::morton_index(key, l, d) },
                    level: l,
                    cap,
                };
                if j - i == 1 {
                    if cap < leaf[i].cap {
                        leaf[i] = unit;
                    }
                } else {
                    match groups.get(&(i, j)) {
                        Some(u) if u.cap <= cap => {}
                        _ => {
                            groups.insert((i, j), unit);
                        }
                    }
                }
                i = j;
            }
        }
        Ok(Tree { cubes, leaf, groups: groups.into_iter().collect() })
    }

    fn rows(&self) -> usize {
        self.leaf.len() + self.groups.len()
    }

    /// Row indices touching each cube (its own row first).
    fn columns(&self) -> Vec<Vec<usize>> {
        let n = self.cubes.len();
        let mut cols: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (g, ((s, e), _)) in self.groups.iter().enumerate() {
            for c in &mut cols[*s..*e] {
                c.push(n + g);
            }
        }
        cols
    }

    fn caps(&self) -> Vec<f64> {
        self.leaf
            .iter()
            .map(|u| u.cap)
            .chain(self.groups.iter().map(|(_, u)| u.cap))
            .collect()
    }

    fn unit(&self, row: usize) -> &Unit {
        if row < self.leaf.len() {
            &self.leaf[row]
        } else {
            &self.groups[row - self.leaf.len()].1
        }
    }

    fn loads(&self, x: &[f64]) -> Vec<f64> {
        let mut prefix = vec![0.0; x.len() + 1];
        for (i, v) in x.iter().enumerate() {
            prefix[i + 1] = prefix[i] + v;
        }
        x.iter()
            .copied()
            .chain(self.groups.iter().map(|((s, e), _)| prefix[*e] - prefix[*s]))
            .collect()
    }
}

fn mw_eps() -> f64 {
    0.01
}

struct Packing {
    x: Vec<f64>,
    upper: f64,
}

fn solve_packing(t: &Tree) -> Result<Packing> {
    let n = t.cubes.len();
    let caps = t.caps();
    if t.rows() <= DENSE_ROW_LIMIT {
        let mut rows: Vec<Row> = (0..n).map(|i| Row::le(vec![(i, 1.0)], caps[i])).collect();
        for ((s, e), u) in &t.groups {
            rows.push(Row::le((*s..*e).map(|i| (i, 1.0)).collect(), u.cap));
        }
        let lp = LinearProgram { n_vars: n, objective: vec![-1.0; n], rows, max_iterations: None };
        let sol = solve_dense(&lp)?;
        let v = -sol.objective;
        return Ok(Packing { x: sol.x, upper: v });
    }
    let sol = pack_mw(&t.columns(), &caps, mw_eps(), 200_000_000)?;
    Ok(Packing { x: sol.x, upper: sol.upper })
}

/// Exact minimum of `sum f(|Q_i|)` over covers of `a` by cubes of level `<= depth`.
pub fn net_content(a: &CubeMask, f: &DimensionFunction, depth: u32) -> Result<f64> {
    net_content_with(a, f, depth, ContentOptions::default())
}

pub fn net_content_with(a: &CubeMask, f: &DimensionFunction, depth: u32, opts: ContentOptions) -> Result<f64> {
    Ok(net_cover_with(a, f, depth, opts)?.value)
}

/// Optimal integral cover realizing [`net_content`].
pub fn net_cover_with(a: &CubeMask, f: &DimensionFunction, depth: u32, opts: ContentOptions) -> Result<CoverCertificate> {
    let (mask, floor) = prepare(a, f, depth, opts)?;
    let d = mask.dim();
    let own: Vec<f64> = (0..=depth)
        .map(|l| if l >= floor { f.eval(side(l)) } else { f64::INFINITY })
        .collect();
    // full[l]: cost of covering one whole level-l cube, children summed in order
    let mut full = vec![(0.0, depth); depth as usize + 1];
    full[depth as usize] = (own[depth as usize], depth);
    for l in (0..depth).rev() {
        let c = full[l as usize + 1].0;
        let mut acc = 0.0;
        for _ in 0..(1usize << (2 * d)) {
            acc += c;
        }
        full[l as usize] = if own[l as usize] <= acc { (own[l as usize], l) } else { (acc, full[l as usize + 1].1) };
    }
    let mut dp = Dp {
        mask: &mask,
        own: &own,
        full: &full,
        depth,
        visited: 0,
        budget: Limits::from_env().max_cells,
    };
    let mut idx = vec![0u64; d];
    let Some((value, entries)) = dp.cost(0, &mut idx, 0)? else {
        return Ok(CoverCertificate { entries: vec![], value: 0.0, lower_bound: 0.0 });
    };
    Ok(CoverCertificate { entries, value, lower_bound: value })
}

struct Dp<'a> {
    mask: &'a CubeMask,
    own: &'a [f64],
    full: &'a [(f64, u32)],
    depth: u32,
    visited: usize,
    budget: usize,
}

impl Dp<'_> {
    fn cost(&mut self, level: u32, idx: &mut Vec<u64>, key: u128) -> Result<Option<(f64, Vec<CoverEntry>)>> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(MtpError::Resource(format!("net-content recursion exceeded {} nodes", self.budget)));
        }
        let d = self.mask.dim();
        let sh = 2 * d as u32 * (self.depth - level);
        let (ks, ke) = (key << sh, (key + 1) << sh);
        let runs = self.mask.runs();
        let pos = runs.partition_point(|r| r.1 <= ks);
        if pos == runs.len() || runs[pos].0 >= ke {
            return Ok(None);
        }
        let cube = Cube { level, index: idx.clone() };
        if runs[pos].0 <= ks && runs[pos].1 >= ke {
            let (v, j) = self.full[level as usize];
            return Ok(Some((v, vec![CoverEntry { cube, weight: 1.0, cover_level: j }])));
        }
        let mut acc = 0.0;
        let mut entries = Vec::new();
        for g in 0..(1usize << (2 * d)) {
            let saved = idx.clone();
            for (k, v) in idx.iter_mut().enumerate() {
                *v = (*v << 2) | ((g >> (2 * k)) & 3) as u64;
            }
            if let Some((v, e)) = self.cost(level + 1, idx, (key << (2 * d)) | g as u128)? {
                acc += v;
                entries.extend(e);
            }
            *idx = saved;
        }
        let own = self.own[level as usize];
        if own <= acc {
            Ok(Some((own, vec![CoverEntry { cube, weight: 1.0, cover_level: level }])))
        } else {
            Ok(Some((acc, entries)))
        }
    }
}

/// Weighted content: `min sum c_Q f(|Q|)` with `sum_{Q ∋ x} c_Q >= 1` on `a`.
pub fn fractional_cover(a: &CubeMask, f: &DimensionFunction, depth: u32) -> Result<CoverCertificate> {
    fractional_cover_with(a, f, depth, ContentOptions::default())
}

pub fn fractional_cover_with(a: &CubeMask, f: &DimensionFunction, depth: u32, opts: ContentOptions) -> Result<CoverCertificate> {
    let (mask, floor) = prepare(a, f, depth, opts)?;
    let t = Tree::build(&mask, f, floor)?;
    let caps = t.caps();
    let cols = t.columns();
    let (w, lower) = if t.rows() <= DENSE_ROW_LIMIT {
        let rows = cols
            .iter()
            .map(|c| Row::ge(c.iter().map(|&r| (r, 1.0)).collect(), 1.0))
            .collect();
        let lp = LinearProgram { n_vars: caps.len(), objective: caps.clone(), rows, max_iterations: None };
        let sol = solve_dense(&lp)?;
        (sol.x, sol.objective)
    } else {
        let p = pack_mw(&cols, &caps, mw_eps(), 200_000_000)?;
        (p.y, p.lower)
    };
    let mut entries = Vec::new();
    let mut value = 0.0;
    for (r, &wr) in w.iter().enumerate() {
        if wr > 0.0 {
            let u = t.unit(r);
            value += wr * u.cap;
            entries.push(CoverEntry { cube: u.cube.clone(), weight: wr, cover_level: u.level });
        }
    }
    Ok(CoverCertificate { entries, value, lower_bound: lower.min(value) })
}

/// Largest mass `μ` on `a` with `μ(Q) <= f(|Q|)` for every cube of level `<= depth`.
pub fn frostman_lp(a: &CubeMask, f: &DimensionFunction, depth: u32) -> Result<FrostmanCertificate> {
    frostman_lp_with(a, f, depth, ContentOptions::default())
}

pub fn frostman_lp_with(a: &CubeMask, f: &DimensionFunction, depth: u32, opts: ContentOptions) -> Result<FrostmanCertificate> {
    let (mask, floor) = prepare(a, f, depth, opts)?;
    let t = Tree::build(&mask, f, floor)?;
    let p = solve_packing(&t)?;
    let caps = t.caps();
    let mut x: Vec<f64> = p.x.iter().map(|v| v.max(0.0)).collect();
    let worst = t
        .loads(&x)
        .iter()
        .zip(&caps)
        .map(|(l, c)| l / c)
        .fold(0.0f64, f64::max);
    if worst > 1.0 {
        for v in &mut x {
            *v /= worst;
        }
    }
    let loads = t.loads(&x);
    let binding = loads
        .iter()
        .zip(&caps)
        .enumerate()
        .filter(|(_, (l, c))| **l >= **c * (1.0 - 1e-9))
        .map(|(r, _)| t.unit(r).cube.clone())
        .collect();
    let masses: Vec<(Cube, f64)> = t.cubes.iter().cloned().zip(x.iter().copied()).collect();
    let weights = DiscreteMeasure::from_cube_masses(mask.dim(), depth, &masses)?;
    let value = weights.total();
    Ok(FrostmanCertificate { weights, value, binding_constraints: binding, upper_bound: p.upper.max(value) })
}

/// `1/z*` with `z* = min_μ max_Q μ(Q)/f(|Q|)` over probability measures on `a`.
pub fn singular_value(a: &CubeMask, f: &DimensionFunction, depth: u32) -> Result<f64> {
    singular_value_with(a, f, depth, ContentOptions::default())
}

pub fn singular_value_with(a: &CubeMask, f: &DimensionFunction, depth: u32, opts: ContentOptions) -> Result<f64> {
    let (mask, floor) = prepare(a, f, depth, opts)?;
    let t = Tree::build(&mask, f, floor)?;
    if t.rows() > DENSE_ROW_LIMIT {
        let p = solve_packing(&t)?;
        return Ok(p.x.iter().sum());
    }
    let n = t.cubes.len();
    let caps = t.caps();
    let scale = caps.iter().fold(0.0f64, |a, &c| a.max(c));
    let z = n;
    let mut rows: Vec<Row> = (0..n).map(|i| Row::le(vec![(i, 1.0), (z, -caps[i] / scale)], 0.0)).collect();
    for ((s, e), u) in &t.groups {
        let mut c: Vec<(usize, f64)> = (*s..*e).map(|i| (i, 1.0)).collect();
        c.push((z, -u.cap / scale));
        rows.push(Row::le(c, 0.0));
    }
    rows.push(Row::eq((0..n).map(|i| (i, 1.0)).collect(), 1.0));
    let mut objective = vec![0.0; n + 1];
    objective[z] = 1.0;
    let lp = LinearProgram { n_vars: n + 1, objective, rows, max_iterations: None };
    let sol = solve_dense(&lp)?;
    let zs = sol.x[z] / scale;
    if !(zs > 0.0) {
        return Err(MtpError::Estimation("singular value LP returned z = 0".into()));
    }
    Ok(1.0 / zs)
}

/// Frostman lower bound and net-cover upper bound at `depth`.
pub fn content_estimate(a: &CubeMask, f: &DimensionFunction, depth: u32) -> Result<ContentEstimate> {
    let cert = frostman_lp(a, f, depth)?;
    let upper = net_content(a, f, depth)?;
    Ok(ContentEstimate {
        lower: cert.value,
        upper,
        depth,
        f: *f,
        binding_constraints: cert.binding_constraints,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub lower: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub floor: f64,
    pub passed: bool,
}

/// Compares the Frostman content of `a` with `f(|A|)/g(|A|) · m(A)`.
/// `floor` defaults to `2^{-d}`.
pub fn content_ratio_check(
    a: &CubeMask,
    f: &DimensionFunction,
    g: &DimensionFunction,
    floor: Option<f64>,
) -> Result<RatioReport> {
    if !compare(f, g).holds() {
        return Err(MtpError::Precondition("content ratio check needs f ⪯ g".into()));
    }
    let lower = frostman_lp(a, f, a.resolution())?.value;
    let diam = a.diameter();
    let rhs = f.evaluate(diam)? / g.evaluate(diam)? * a.measure();
    let ratio = lower / rhs;
    let floor = floor.unwrap_or(0.5f64.powi(a.dim() as i32));
    Ok(RatioReport { lower, rhs, ratio, floor, passed: ratio >= floor })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpReport {
    /// `max μ(B)/f(|B|)` over probes.
    pub c: f64,
    /// `μ(total)/c`.
    pub content_lower_bound: f64,
    pub worst_probe: usize,
}

/// Mass-distribution check of `mu` against `f` on the given balls.
pub fn mdp_verify(mu: &DiscreteMeasure, f: &DimensionFunction, probes: &[Ball]) -> Result<MdpReport> {
    if probes.is_empty() {
        return Err(MtpError::Precondition("no probes".into()));
    }
    let mut c = 0.0f64;
    let mut worst = 0;
    for (i, b) in probes.iter().enumerate() {
        let fb = f.evaluate(b.diameter().min(f.valid_radius_max))?;
        let v = mu.ball_mass(b) / fb;
        if v > c {
            c = v;
            worst = i;
        }
    }
    let content_lower_bound = if c > 0.0 { mu.total() / c } else { f64::INFINITY };
    Ok(MdpReport { c, content_lower_bound, worst_probe: worst })
}
