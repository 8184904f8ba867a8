use serde::{Deserialize, Serialize};

use super::{box_distance, side, Aabb, Cube, MAX_DIM_TIMES_LEVEL};
use crate::error::{MtpError, Result};

/// Interleaves the base-4 digits of `index` (level `level`) into a Morton key.
pub(crate) fn morton_encode(index: &[u64], level: u32) -> u128 {
    let d = index.len();
    let mut key: u128 = 0;
    for j in 0..level {
        let shift = 2 * (level - 1 - j);
        let mut group: u128 = 0;
        for (k, &i) in index.iter().enumerate() {
            group |= (((i >> shift) & 3) as u128) << (2 * k);
        }
        key = (key << (2 * d)) | group;
    }
    key
}

pub(crate) fn morton_decode(key: u128, level: u32, d: usize) -> Vec<u64> {
    let mut idx = vec![0u64; d];
    let gmask: u128 = (1u128 << (2 * d)) - 1;
    for j in 0..level {
        let group = (key >> (2 * d as u32 * (level - 1 - j))) & gmask;
        for (k, v) in idx.iter_mut().enumerate() {
            *v = (*v << 2) | ((group >> (2 * k)) & 3) as u64;
        }
    }
    idx
}

/// Finite union of disjoint base-4 cubes at resolution `L`.
///
/// Stored as sorted, non-adjacent half-open runs of Morton keys of level-`L`
/// cells, so the canonical cube list (complete sibling groups merged upward)
/// is recovered by splitting runs into maximal aligned blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CubeMask {
    dim: usize,
    resolution: u32,
    runs: Vec<(u128, u128)>,
}

/// JSON element of the cube-list serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeRecord {
    pub level: u32,
    pub index: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct MaskRepr {
    dim: usize,
    resolution: u32,
    cubes: Vec<CubeRecord>,
}

impl Serialize for CubeMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MaskRepr {
            dim: self.dim,
            resolution: self.resolution,
            cubes: self.to_records(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CubeMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MaskRepr::deserialize(d)?;
        CubeMask::from_records(r.dim, Some(r.resolution), &r.cubes).map_err(serde::de::Error::custom)
    }
}

fn check_shape(dim: usize, resolution: u32) -> Result<()> {
    if dim == 0 {
        return Err(MtpError::Invalid("dimension must be at least 1".into()));
    }
    if dim as u32 * resolution > MAX_DIM_TIMES_LEVEL {
        return Err(MtpError::Resource(format!(
            "d*L = {} exceeds {MAX_DIM_TIMES_LEVEL}",
            dim as u32 * resolution
        )));
    }
    Ok(())
}

impl CubeMask {
    pub fn empty(dim: usize, resolution: u32) -> Result<Self> {
        check_shape(dim, resolution)?;
        Ok(CubeMask {
            dim,
            resolution,
            runs: Vec::new(),
        })
    }

    pub fn full(dim: usize, resolution: u32) -> Result<Self> {
        let mut m = Self::empty(dim, resolution)?;
        m.runs.push((0, m.total_cells()));
        Ok(m)
    }

    /// Runs must be sorted by start; overlapping or adjacent runs are merged.
    pub(crate) fn from_sorted_runs(dim: usize, resolution: u32, runs: Vec<(u128, u128)>) -> Self {
        let mut m = CubeMask {
            dim,
            resolution,
            runs: Vec::with_capacity(runs.len()),
        };
        for (s, e) in runs {
            m.push_run(s, e);
        }
        m
    }

    pub(crate) fn push_run(&mut self, s: u128, e: u128) {
        if s >= e {
            return;
        }
        if let Some(last) = self.runs.last_mut() {
            debug_assert!(s >= last.0);
            if s <= last.1 {
                last.1 = last.1.max(e);
                return;
            }
        }
        self.runs.push((s, e));
    }

    /// Builds a mask from arbitrary (possibly overlapping) cubes of level `<= resolution`.
    pub fn from_cubes(dim: usize, resolution: u32, cubes: &[Cube]) -> Result<Self> {
        check_shape(dim, resolution)?;
        let mut runs = Vec::with_capacity(cubes.len());
        for c in cubes {
            if c.dim() != dim {
                return Err(MtpError::Invalid("cube dimension mismatch".into()));
            }
            if c.level > resolution {
                return Err(MtpError::Invalid(format!(
                    "cube level {} finer than resolution {resolution}",
                    c.level
                )));
            }
            let (s, len) = block(dim, resolution, c);
            runs.push((s, s + len));
        }
        runs.sort_unstable();
        Ok(Self::from_sorted_runs(dim, resolution, runs))
    }

    pub fn from_records(dim: usize, resolution: Option<u32>, recs: &[CubeRecord]) -> Result<Self> {
        let res = resolution.unwrap_or_else(|| recs.iter().map(|r| r.level).max().unwrap_or(0));
        let cubes = recs
            .iter()
            .map(|r| Cube::new(r.level, r.index.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_cubes(dim, res, &cubes)
    }

    pub fn to_records(&self) -> Vec<CubeRecord> {
        self.cubes()
            .into_iter()
            .map(|c| CubeRecord {
                level: c.level,
                index: c.index,
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn runs(&self) -> &[(u128, u128)] {
        &self.runs
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Number of level-`L` cells, `4^{dL}`, in the whole space.
    pub fn total_cells(&self) -> u128 {
        1u128 << (2 * self.dim as u32 * self.resolution)
    }

    /// Number of level-`L` cells in the mask.
    pub fn cell_count(&self) -> u128 {
        self.runs.iter().map(|(s, e)| e - s).sum()
    }

    /// Lebesgue measure `sum 4^{-n d}` over the canonical cubes.
    pub fn measure(&self) -> f64 {
        self.cell_count() as f64 / self.total_cells() as f64
    }

    /// Canonical cube list in Morton order.
    pub fn cubes(&self) -> Vec<Cube> {
        let mut out = Vec::new();
        for &(s, e) in &self.runs {
            split_run(self.dim, self.resolution, s, e, &mut |c| out.push(c));
        }
        out
    }

    pub fn cube_count(&self) -> usize {
        let mut n = 0;
        for &(s, e) in &self.runs {
            split_run(self.dim, self.resolution, s, e, &mut |_| n += 1);
        }
        n
    }

    /// Level-`L` cells; errors past `budget` cells.
    pub fn cells(&self, budget: usize) -> Result<Vec<Cube>> {
        if self.cell_count() > budget as u128 {
            return Err(MtpError::Resource(format!(
                "mask has {} cells, budget is {budget}",
                self.cell_count()
            )));
        }
        let mut out = Vec::with_capacity(self.cell_count() as usize);
        for &(s, e) in &self.runs {
            for k in s..e {
                out.push(Cube {
                    level: self.resolution,
                    index: morton_decode(k, self.resolution, self.dim),
                });
            }
        }
        Ok(out)
    }

    /// The same set at a finer resolution.
    pub fn refine_to(&self, resolution: u32) -> Result<Self> {
        if resolution < self.resolution {
            return Err(MtpError::Invalid(format!(
                "cannot refine from level {} to coarser level {resolution}",
                self.resolution
            )));
        }
        check_shape(self.dim, resolution)?;
        let sh = 2 * self.dim as u32 * (resolution - self.resolution);
        Ok(CubeMask {
            dim: self.dim,
            resolution,
            runs: self.runs.iter().map(|&(s, e)| (s << sh, e << sh)).collect(),
        })
    }

    fn aligned(&self, other: &CubeMask) -> Result<(CubeMask, CubeMask)> {
        if self.dim != other.dim {
            return Err(MtpError::Invalid("mask dimension mismatch".into()));
        }
        let l = self.resolution.max(other.resolution);
        Ok((self.refine_to(l)?, other.refine_to(l)?))
    }

    pub fn union(&self, other: &CubeMask) -> Result<CubeMask> {
        let (a, b) = self.aligned(other)?;
        let mut all: Vec<(u128, u128)> = a.runs.iter().chain(&b.runs).copied().collect();
        all.sort_unstable();
        Ok(Self::from_sorted_runs(a.dim, a.resolution, all))
    }

    pub fn intersection(&self, other: &CubeMask) -> Result<CubeMask> {
        let (a, b) = self.aligned(other)?;
        let mut out = CubeMask {
            dim: a.dim,
            resolution: a.resolution,
            runs: Vec::new(),
        };
        let (mut i, mut j) = (0, 0);
        while i < a.runs.len() && j < b.runs.len() {
            let (s1, e1) = a.runs[i];
            let (s2, e2) = b.runs[j];
            let s = s1.max(s2);
            let e = e1.min(e2);
            if s < e {
                out.push_run(s, e);
            }
            if e1 < e2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(out)
    }

    pub fn difference(&self, other: &CubeMask) -> Result<CubeMask> {
        let comp = other.complement();
        self.intersection(&comp)
    }

    /// Complement inside `[0,1)^d`.
    pub fn complement(&self) -> CubeMask {
        let mut out = CubeMask {
            dim: self.dim,
            resolution: self.resolution,
            runs: Vec::new(),
        };
        let mut pos = 0u128;
        for &(s, e) in &self.runs {
            out.push_run(pos, s);
            pos = e;
        }
        out.push_run(pos, self.total_cells());
        out
    }

    pub fn is_subset_of(&self, other: &CubeMask) -> Result<bool> {
        Ok(self.difference(other)?.is_empty())
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        match super::cube_containing(x, self.resolution) {
            Ok(c) => {
                let k = morton_encode(&c.index, self.resolution);
                let pos = self.runs.partition_point(|&(s, _)| s <= k);
                pos > 0 && self.runs[pos - 1].1 > k
            }
            Err(_) => false,
        }
    }

    /// True when every level-`L` cell of `cube` belongs to the mask.
    pub fn contains_cube(&self, cube: &Cube) -> bool {
        if cube.level > self.resolution {
            return false;
        }
        let (s, len) = block(self.dim, self.resolution, cube);
        let pos = self.runs.partition_point(|&(a, _)| a <= s);
        pos > 0 && self.runs[pos - 1].1 >= s + len
    }

    /// True when some level-`L` cell of `cube` belongs to the mask.
    pub fn meets_cube(&self, cube: &Cube) -> bool {
        let (s, len) = block(self.dim, self.resolution.max(cube.level), cube);
        let (s, e) = if cube.level > self.resolution {
            let sh = 2 * self.dim as u32 * (cube.level - self.resolution);
            (s >> sh, (s >> sh) + 1)
        } else {
            (s, s + len)
        };
        let pos = self.runs.partition_point(|&(_, b)| b <= s);
        pos < self.runs.len() && self.runs[pos].0 < e
    }

    /// Restriction to a cube.
    pub fn restrict_to_cube(&self, cube: &Cube) -> Result<CubeMask> {
        let q = CubeMask::from_cubes(self.dim, self.resolution.max(cube.level), std::slice::from_ref(cube))?;
        self.intersection(&q)
    }

    /// Closed bounding box of the mask, `None` if empty.
    pub fn bounding_box(&self) -> Option<Aabb> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for c in self.cubes() {
            for (k, (l, h)) in c.lower().into_iter().zip(c.upper()).enumerate() {
                lo[k] = lo[k].min(l);
                hi[k] = hi[k].max(h);
            }
        }
        Some(Aabb { lo, hi })
    }

    /// Max-metric distance between the closures of two masks (infinite if either is empty).
    pub fn distance(&self, other: &CubeMask) -> f64 {
        let a = self.cubes();
        let b = other.cubes();
        let bb: Vec<(Vec<f64>, Vec<f64>)> = b.iter().map(|c| (c.lower(), c.upper())).collect();
        let mut best = f64::INFINITY;
        for c in &a {
            let (lo, hi) = (c.lower(), c.upper());
            for (l2, h2) in &bb {
                best = best.min(box_distance(&lo, &hi, l2, h2));
                if best == 0.0 {
                    return 0.0;
                }
            }
        }
        best
    }

    /// Diameter of the closure (max-metric), 0 if empty.
    pub fn diameter(&self) -> f64 {
        self.bounding_box()
            .map(|b| {
                b.lo.iter()
                    .zip(&b.hi)
                    .map(|(l, h)| h - l)
                    .fold(0.0, f64::max)
            })
            .unwrap_or(0.0)
    }

    pub fn cell_side(&self) -> f64 {
        side(self.resolution)
    }
}

/// Morton start and length (in level-`resolution` cells) of a cube.
pub(crate) fn block(dim: usize, resolution: u32, c: &Cube) -> (u128, u128) {
    let sh = 2 * dim as u32 * (resolution - c.level);
    (morton_encode(&c.index, c.level) << sh, 1u128 << sh)
}

/// Splits `[s, e)` into maximal aligned blocks, i.e. canonical cubes.
pub(crate) fn split_run(dim: usize, resolution: u32, mut s: u128, e: u128, emit: &mut dyn FnMut(Cube)) {
    let step = 2 * dim as u32;
    while s < e {
        let mut k = 0u32;
        while k < resolution {
            let size = 1u128 << (step * (k + 1));
            if s % size == 0 && s + size <= e {
                k += 1;
            } else {
                break;
            }
        }
        let level = resolution - k;
        emit(Cube {
            level,
            index: morton_decode(s >> (step * k), level, dim),
        });
        s += 1u128 << (step * k);
    }
}
