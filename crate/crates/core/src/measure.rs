//! Finite measures on `[0,1)^d` with constant density on Morton blocks.

use serde::{Deserialize, Serialize};

use crate::error::{MtpError, Result};
use crate::space::{side, Aabb, Ball, Cube, CubeMask};

/// Nonnegative measure given by masses on disjoint aligned Morton ranges of
/// level-`L` cells, spread uniformly (Lebesgue) inside each range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct DiscreteMeasure {
    dim: usize,
    resolution: u32,
    /// `(start, len, mass)`, sorted and disjoint.
    blocks: Vec<(u128, u128, f64)>,
    prefix: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    dim: usize,
    resolution: u32,
    blocks: Vec<(u128, u128, f64)>,
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = MtpError;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        DiscreteMeasure::build(r.dim, r.resolution, r.blocks)
    }
}

impl From<DiscreteMeasure> for MeasureRepr {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureRepr {
            dim: m.dim,
            resolution: m.resolution,
            blocks: m.blocks,
        }
    }
}

impl DiscreteMeasure {
    fn build(dim: usize, resolution: u32, mut blocks: Vec<(u128, u128, f64)>) -> Result<Self> {
        if dim == 0 || dim as u32 * resolution > crate::space::MAX_DIM_TIMES_LEVEL {
            return Err(MtpError::Invalid(format!("bad measure shape d={dim}, L={resolution}")));
        }
        if blocks.iter().any(|b| !(b.2 >= 0.0 && b.2.is_finite()) || b.1 == 0) {
            return Err(MtpError::Invalid("block masses must be finite and nonnegative".into()));
        }
        blocks.retain(|b| b.2 > 0.0);
        blocks.sort_by(|a, b| a.0.cmp(&b.0));
        let total = 1u128 << (2 * dim as u32 * resolution);
        let mut end = 0u128;
        for b in &blocks {
            if b.0 < end || b.0 + b.1 > total {
                return Err(MtpError::Invalid("measure blocks overlap or leave the space".into()));
            }
            end = b.0 + b.1;
        }
        let mut m = DiscreteMeasure {
            dim,
            resolution,
            blocks,
            prefix: vec![],
        };
        m.reindex();
        Ok(m)
    }

    fn reindex(&mut self) {
        let mut acc = 0.0;
        self.prefix = Vec::with_capacity(self.blocks.len() + 1);
        self.prefix.push(0.0);
        for b in &self.blocks {
            acc += b.2;
            self.prefix.push(acc);
        }
    }

    pub fn zero(dim: usize, resolution: u32) -> Result<Self> {
        Self::build(dim, resolution, vec![])
    }

    /// Masses on cubes of level `<= resolution`; cubes must be pairwise disjoint.
    pub fn from_cube_masses(dim: usize, resolution: u32, masses: &[(Cube, f64)]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(masses.len());
        for (c, w) in masses {
            if c.dim() != dim || c.level > resolution {
                return Err(MtpError::Invalid(format!("cube {c:?} does not fit d={dim}, L={resolution}")));
            }
            let (s, len) = crate::space::mask_block(dim, resolution, c);
            blocks.push((s, len, *w));
        }
        Self::build(dim, resolution, blocks)
    }

    /// Lebesgue measure on `mask` scaled to total mass `total`.
    pub fn uniform_on(mask: &CubeMask, total: f64) -> Result<Self> {
        let n = mask.cell_count() as f64;
        if n == 0.0 {
            return Self::zero(mask.dim(), mask.resolution());
        }
        let blocks = mask
            .runs()
            .iter()
            .map(|&(s, e)| (s, e - s, total * (e - s) as f64 / n))
            .collect();
        Self::build(mask.dim(), mask.resolution(), blocks)
    }

    /// Unit mass spread over one cell.
    pub fn point_mass(x: &[f64], resolution: u32) -> Result<Self> {
        let c = crate::space::cube_containing(x, resolution)?;
        Self::from_cube_masses(x.len(), resolution, &[(c, 1.0)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn blocks(&self) -> &[(u128, u128, f64)] {
        &self.blocks
    }

    pub fn total(&self) -> f64 {
        *self.prefix.last().unwrap_or(&0.0)
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        let blocks = self.blocks.iter().map(|&(s, l, w)| (s, l, w * k)).collect();
        Self::build(self.dim, self.resolution, blocks)
    }

    /// Probability measure with the same shape.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.total();
        if t <= 0.0 {
            return Err(MtpError::Domain("cannot normalize a zero measure".into()));
        }
        self.scaled(1.0 / t)
    }

    pub fn support(&self) -> CubeMask {
        let runs = self.blocks.iter().map(|&(s, l, _)| (s, s + l)).collect();
        CubeMask::from_sorted_runs(self.dim, self.resolution, runs)
    }

    /// Sum of weighted measures on a common grid. Overlapping blocks are split
    /// where densities change.
    pub fn combine(parts: &[(f64, &DiscreteMeasure)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(MtpError::Invalid("nothing to combine".into()));
        };
        let (dim, res) = (first.dim, first.resolution);
        let mut events: Vec<(u128, f64)> = Vec::new();
        for (w, m) in parts {
            if m.dim != dim || m.resolution != res {
                return Err(MtpError::Invalid("measures live on different grids".into()));
            }
            for &(s, l, mass) in &m.blocks {
                let dens = w * mass / l as f64;
                events.push((s, dens));
                events.push((s + l, -dens));
            }
        }
        events.sort_by(|a, b| a.0.cmp(&b.0));
        let mut blocks = Vec::new();
        let mut dens = 0.0f64;
        let mut i = 0;
        let mut last = 0u128;
        while i < events.len() {
            let x = events[i].0;
            if x > last && dens > 0.0 {
                blocks.push((last, x - last, dens * (x - last) as f64));
            }
            while i < events.len() && events[i].0 == x {
                dens += events[i].1;
                i += 1;
            }
            if dens.abs() < 1e-300 {
                dens = 0.0;
            }
            dens = dens.max(0.0);
            last = x;
        }
        Self::build(dim, res, blocks)
    }

    /// Mass of the Morton key range `[s, e)` of level-`L` cells.
    pub fn range_mass(&self, s: u128, e: u128) -> f64 {
        if s >= e || self.blocks.is_empty() {
            return 0.0;
        }
        let i0 = self.blocks.partition_point(|b| b.0 + b.1 <= s);
        let i1 = self.blocks.partition_point(|b| b.0 < e);
        if i0 >= i1 {
            return 0.0;
        }
        let mut m = self.prefix[i1] - self.prefix[i0];
        let (bs, bl, bw) = self.blocks[i0];
        if bs < s {
            m -= bw * (s - bs) as f64 / bl as f64;
        }
        let (bs, bl, bw) = self.blocks[i1 - 1];
        if bs + bl > e {
            m -= bw * (bs + bl - e) as f64 / bl as f64;
        }
        m.max(0.0)
    }

    /// `μ(Q)` for a cube of any level.
    pub fn cube_mass(&self, c: &Cube) -> f64 {
        if c.level <= self.resolution {
            let (s, l) = crate::space::mask_block(self.dim, self.resolution, c);
            self.range_mass(s, s + l)
        } else {
            let sh = 2 * self.dim as u32 * (c.level - self.resolution);
            let key = crate::space::morton_key(c) >> sh;
            self.range_mass(key, key + 1) * 0.25f64.powi((self.dim as u32 * (c.level - self.resolution)) as i32)
        }
    }

    /// Density (mass per unit volume) of the block holding `key`, if any.
    fn density_at(&self, key: u128) -> Option<(usize, f64)> {
        let i = self.blocks.partition_point(|b| b.0 + b.1 <= key);
        let b = self.blocks.get(i)?;
        (b.0 <= key).then(|| (i, b.2 / b.1 as f64 * (1u128 << (2 * self.dim as u32 * self.resolution)) as f64))
    }

    /// `μ(B)` for an open box.
    pub fn box_mass(&self, b: &Aabb) -> f64 {
        if b.dim() != self.dim || b.is_empty() || self.blocks.is_empty() {
            return 0.0;
        }
        let mut idx = vec![0u64; self.dim];
        self.descend(b, 0, &mut idx, 0)
    }

    pub fn ball_mass(&self, ball: &Ball) -> f64 {
        self.box_mass(&ball.to_box())
    }

    fn descend(&self, q: &Aabb, level: u32, idx: &mut Vec<u64>, key: u128) -> f64 {
        let s = side(level);
        let node = Aabb {
            lo: idx.iter().map(|&i| i as f64 * s).collect(),
            hi: idx.iter().map(|&i| (i + 1) as f64 * s).collect(),
        };
        if !q.meets(&node) {
            return 0.0;
        }
        let sh = 2 * self.dim as u32 * (self.resolution - level);
        let (ks, ke) = (key << sh, (key + 1) << sh);
        if q.contains_box(&node) {
            return self.range_mass(ks, ke);
        }
        let m = self.range_mass(ks, ke);
        if m == 0.0 {
            return 0.0;
        }
        // uniform over the whole node: overlap volume times density
        if let Some((i, dens)) = self.density_at(ks) {
            let b = self.blocks[i];
            if b.0 <= ks && b.0 + b.1 >= ke {
                return dens * q.intersect(&node).volume();
            }
        }
        if level == self.resolution {
            return m * q.intersect(&node).volume() / node.volume();
        }
        let mut acc = 0.0;
        for g in 0..(1usize << (2 * self.dim)) {
            let saved = idx.clone();
            for (k, v) in idx.iter_mut().enumerate() {
                *v = (*v << 2) | ((g >> (2 * k)) & 3) as u64;
            }
            acc += self.descend(q, level + 1, idx, (key << (2 * self.dim)) | g as u128);
            *idx = saved;
        }
        acc
    }

    /// Masses of all level-`L` cells with positive mass; errors past `budget`.
    pub fn cell_masses(&self, budget: usize) -> Result<Vec<(Cube, f64)>> {
        let n: u128 = self.blocks.iter().map(|b| b.1).sum();
        if n > budget as u128 {
            return Err(MtpError::Resource(format!("{n} cells exceed budget {budget}")));
        }
        let mut out = Vec::with_capacity(n as usize);
        for &(s, l, w) in &self.blocks {
            for k in s..s + l {
                out.push((
                    Cube {
                        level: self.resolution,
                        index: crate::space::morton_index(k, self.resolution, self.dim),
                    },
                    w / l as f64,
                ));
            }
        }
        Ok(out)
    }
}
