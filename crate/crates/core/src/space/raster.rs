use super::mask::CubeMask;
use super::{side, Aabb};
use crate::config::Limits;
use crate::error::{MtpError, Result};

/// Which level-`L` cells a rasterization keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RasterMode {
    /// Cells whose closure lies in the closure of one shape.
    Inner,
    /// Cells meeting the open shape. A cell that only touches the boundary
    /// is not kept.
    Outer,
}

struct Descent<'a> {
    boxes: &'a [Aabb],
    dim: usize,
    resolution: u32,
    mode: RasterMode,
    budget: usize,
    visited: usize,
    out: CubeMask,
}

impl Descent<'_> {
    fn run(&mut self, level: u32, idx: &mut Vec<u64>, key: u128, live: &[usize]) -> Result<()> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(MtpError::Resource(format!(
                "rasterization visited more than {} cells",
                self.budget
            )));
        }
        let s = side(level);
        let node = Aabb {
            lo: idx.iter().map(|&i| i as f64 * s).collect(),
            hi: idx.iter().map(|&i| (i + 1) as f64 * s).collect(),
        };
        let mut sub = Vec::with_capacity(live.len());
        for &b in live {
            let bx = &self.boxes[b];
            if bx.contains_box(&node) {
                self.emit(level, key);
                return Ok(());
            }
            if bx.meets(&node) {
                sub.push(b);
            }
        }
        if sub.is_empty() {
            return Ok(());
        }
        if level == self.resolution {
            if self.mode == RasterMode::Outer {
                self.emit(level, key);
            }
            return Ok(());
        }
        let groups = 1usize << (2 * self.dim);
        for g in 0..groups {
            let saved = idx.clone();
            for (k, v) in idx.iter_mut().enumerate() {
                *v = (*v << 2) | ((g >> (2 * k)) & 3) as u64;
            }
            let child_key = (key << (2 * self.dim)) | g as u128;
            self.run(level + 1, idx, child_key, &sub)?;
            *idx = saved;
        }
        Ok(())
    }

    fn emit(&mut self, level: u32, key: u128) {
        let sh = 2 * self.dim as u32 * (self.resolution - level);
        let s = key << sh;
        self.out.push_run(s, s + (1u128 << sh));
    }
}

/// Rasterizes a union of open boxes at level `resolution` with default limits.
pub fn rasterize(shapes: &[Aabb], dim: usize, resolution: u32, mode: RasterMode) -> Result<CubeMask> {
    rasterize_with(shapes, dim, resolution, mode, &Limits::from_env())
}

pub fn rasterize_with(
    shapes: &[Aabb],
    dim: usize,
    resolution: u32,
    mode: RasterMode,
    limits: &Limits,
) -> Result<CubeMask> {
    if resolution > limits.max_level {
        return Err(MtpError::Resource(format!(
            "level {resolution} exceeds the configured maximum {}",
            limits.max_level
        )));
    }
    if shapes.iter().any(|b| b.dim() != dim) {
        return Err(MtpError::Invalid("shape dimension mismatch".into()));
    }
    let mut d = Descent {
        boxes: shapes,
        dim,
        resolution,
        mode,
        budget: limits.max_cells,
        visited: 0,
        out: CubeMask::empty(dim, resolution)?,
    };
    let live: Vec<usize> = (0..shapes.len()).filter(|&i| !shapes[i].is_empty()).collect();
    let mut idx = vec![0u64; dim];
    d.run(0, &mut idx, 0, &live)?;
    Ok(d.out)
}

/// `(E)_{-η}`: cells of `E` whose interior stays at distance `> η` from the
/// complement of `E` (the region outside `[0,1)^d` counts as complement).
/// `eta` must be a nonnegative multiple of the cell side `4^{-L}`.
pub fn inner_shrink(e: &CubeMask, eta: f64) -> Result<CubeMask> {
    let l = e.resolution();
    let h = side(l);
    let m_f = eta / h;
    let m = m_f.round();
    if eta < 0.0 || (m_f - m).abs() > 1e-9 * m.max(1.0) {
        return Err(MtpError::Precondition(format!(
            "eta={eta} is not a nonnegative multiple of the cell side {h}"
        )));
    }
    if m == 0.0 || e.is_empty() {
        return Ok(e.clone());
    }
    let n_cells = (1u64 << (2 * l)) as f64;
    if 2.0 * m >= n_cells {
        return CubeMask::empty(e.dim(), l);
    }
    let dim = e.dim();
    let core = Aabb {
        lo: vec![m * h; dim],
        hi: vec![(n_cells - m) * h; dim],
    };
    let mut boxes = vec![];
    for c in e.complement().cubes() {
        boxes.push(c.to_box().expand(m * h));
    }
    let limits = Limits {
        max_level: l.max(Limits::from_env().max_level),
        ..Limits::from_env()
    };
    let near = rasterize_with(&boxes, dim, l, RasterMode::Outer, &limits)?;
    let core = rasterize_with(&[core], dim, l, RasterMode::Outer, &limits)?;
    e.intersection(&core)?.difference(&near)
}

/// Outer rasterization of the open `η`-neighbourhood of a mask, at the mask's resolution.
pub fn neighborhood(s: &CubeMask, eta: f64) -> Result<CubeMask> {
    if !(eta > 0.0) {
        return Err(MtpError::Precondition(format!("eta must be positive, got {eta}")));
    }
    let boxes: Vec<Aabb> = s.cubes().into_iter().map(|c| c.to_box().expand(eta)).collect();
    let limits = Limits {
        max_level: s.resolution().max(Limits::from_env().max_level),
        ..Limits::from_env()
    };
    rasterize_with(&boxes, s.dim(), s.resolution(), RasterMode::Outer, &limits)
}

/// Outer rasterization of the open `η`-neighbourhood of closed boxes (points
/// are boxes with `lo == hi`).
pub fn neighborhood_of_boxes(boxes: &[Aabb], eta: f64, dim: usize, resolution: u32) -> Result<CubeMask> {
    if !(eta > 0.0) {
        return Err(MtpError::Precondition(format!("eta must be positive, got {eta}")));
    }
    let grown: Vec<Aabb> = boxes.iter().map(|b| b.expand(eta)).collect();
    rasterize(&grown, dim, resolution, RasterMode::Outer)
}
