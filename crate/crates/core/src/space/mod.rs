//! The unit cube `[0,1)^d` with the max metric, base-4 cubes, boxes, and
//! finite-resolution open-set masks.

mod io;
mod mask;
mod raster;

pub use io::{read_mask_binary, write_mask_binary, MASK_MAGIC};
pub use mask::{CubeMask, CubeRecord};
pub use raster::{
    inner_shrink, neighborhood, neighborhood_of_boxes, rasterize, rasterize_with, RasterMode,
};

use serde::{Deserialize, Serialize};

use crate::error::{MtpError, Result};

/// `(first key, cell count)` of a cube's block of level-`resolution` cells.
pub(crate) fn mask_block(dim: usize, resolution: u32, c: &Cube) -> (u128, u128) {
    mask::block(dim, resolution, c)
}

/// Morton key of a cube at its own level.
pub(crate) fn morton_key(c: &Cube) -> u128 {
    mask::morton_encode(&c.index, c.level)
}

pub(crate) fn morton_index(key: u128, level: u32, dim: usize) -> Vec<u64> {
    mask::morton_decode(key, level, dim)
}

/// Largest `d * L` for which Morton keys fit in a `u128`.
pub const MAX_DIM_TIMES_LEVEL: u32 = 63;

/// Side length `4^{-n}`.
#[inline]
pub fn side(level: u32) -> f64 {
    0.25f64.powi(level as i32)
}

/// A base-4 cube `prod [i_k 4^{-n}, (i_k+1) 4^{-n})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube {
    pub level: u32,
    pub index: Vec<u64>,
}

impl Cube {
    pub fn new(level: u32, index: Vec<u64>) -> Result<Self> {
        let n = 1u64 << (2 * level);
        if index.is_empty() {
            return Err(MtpError::Invalid("cube index must have at least one axis".into()));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return Err(MtpError::Invalid(format!(
                "index {bad} out of range for level {level}"
            )));
        }
        Ok(Cube { level, index })
    }

    pub fn root(dim: usize) -> Self {
        Cube {
            level: 0,
            index: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn side(&self) -> f64 {
        side(self.level)
    }

    /// Max-metric diameter, equal to the side.
    pub fn diameter(&self) -> f64 {
        self.side()
    }

    pub fn lower(&self) -> Vec<f64> {
        let s = self.side();
        self.index.iter().map(|&i| i as f64 * s).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        let s = self.side();
        self.index.iter().map(|&i| (i + 1) as f64 * s).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        let s = self.side();
        self.index.iter().map(|&i| (i as f64 + 0.5) * s).collect()
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32)
    }

    pub fn parent(&self) -> Option<Cube> {
        (self.level > 0).then(|| Cube {
            level: self.level - 1,
            index: self.index.iter().map(|i| i >> 2).collect(),
        })
    }

    /// The `4^d` children in Morton order.
    pub fn children(&self) -> Vec<Cube> {
        let d = self.dim();
        (0..(1usize << (2 * d)))
            .map(|g| Cube {
                level: self.level + 1,
                index: (0..d)
                    .map(|k| (self.index[k] << 2) | ((g >> (2 * k)) & 3) as u64)
                    .collect(),
            })
            .collect()
    }

    /// True when `self` contains `other` (a cube contains itself).
    pub fn contains_cube(&self, other: &Cube) -> bool {
        if other.level < self.level || other.dim() != self.dim() {
            return false;
        }
        let shift = 2 * (other.level - self.level);
        self.index
            .iter()
            .zip(&other.index)
            .all(|(&a, &b)| b >> shift == a)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        let s = self.side();
        self.index
            .iter()
            .zip(x)
            .all(|(&i, &v)| v >= i as f64 * s && v < (i + 1) as f64 * s)
    }

    pub fn to_box(&self) -> Aabb {
        Aabb {
            lo: self.lower(),
            hi: self.upper(),
        }
    }
}

/// The unique level-`n` cube containing `x ∈ [0,1)^d`.
pub fn cube_containing(x: &[f64], n: u32) -> Result<Cube> {
    if x.iter().any(|&v| !(0.0..1.0).contains(&v)) {
        return Err(MtpError::Domain(format!("point {x:?} outside [0,1)^d")));
    }
    let scale = (1u64 << (2 * n)) as f64;
    let top = (1u64 << (2 * n)) - 1;
    Ok(Cube {
        level: n,
        index: x.iter().map(|&v| ((v * scale).floor() as u64).min(top)).collect(),
    })
}

/// Chebyshev distance between two closed boxes (0 if they overlap).
pub fn box_distance(a_lo: &[f64], a_hi: &[f64], b_lo: &[f64], b_hi: &[f64]) -> f64 {
    let mut d = 0.0f64;
    for k in 0..a_lo.len() {
        let gap = (b_lo[k] - a_hi[k]).max(a_lo[k] - b_hi[k]).max(0.0);
        d = d.max(gap);
    }
    d
}

/// An axis-parallel open box `prod (lo_k, hi_k)`. Max-metric balls are boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a).max(0.0))
            .product()
    }

    /// Volume of the part inside `[0,1]^d`.
    pub fn clipped_volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b.min(1.0) - a.max(0.0)).max(0.0))
            .product()
    }

    pub fn expand(&self, eta: f64) -> Aabb {
        Aabb {
            lo: self.lo.iter().map(|v| v - eta).collect(),
            hi: self.hi.iter().map(|v| v + eta).collect(),
        }
    }

    pub fn intersect(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| a >= b)
    }

    /// Closed containment of `other` in the closure of `self`.
    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..self.dim()).all(|k| other.lo[k] >= self.lo[k] && other.hi[k] <= self.hi[k])
    }

    /// Open boxes meet.
    pub fn meets(&self, other: &Aabb) -> bool {
        (0..self.dim()).all(|k| self.lo[k] < other.hi[k] && other.lo[k] < self.hi[k])
    }

    pub fn distance(&self, other: &Aabb) -> f64 {
        box_distance(&self.lo, &self.hi, &other.lo, &other.hi)
    }
}

/// Open max-metric ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || center.is_empty() {
            return Err(MtpError::Invalid(format!("invalid ball radius {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn scaled(&self, k: f64) -> Ball {
        Ball {
            center: self.center.clone(),
            radius: self.radius * k,
        }
    }

    pub fn to_box(&self) -> Aabb {
        Aabb {
            lo: self.center.iter().map(|c| c - self.radius).collect(),
            hi: self.center.iter().map(|c| c + self.radius).collect(),
        }
    }

    /// Lebesgue volume `(2r)^d`.
    pub fn volume(&self) -> f64 {
        self.diameter().powi(self.dim() as i32)
    }

    /// Closed containment of the closure of `other`.
    pub fn contains_ball(&self, other: &Ball) -> bool {
        self.to_box().contains_box(&other.to_box())
    }

    pub fn disjoint(&self, other: &Ball) -> bool {
        !self.to_box().meets(&other.to_box())
    }
}

/// Rectangle with per-axis radii `r^{a_k}` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub center: Vec<f64>,
    pub base_radius: f64,
    pub exponents: Vec<f64>,
}

impl Rectangle {
    pub fn new(center: Vec<f64>, base_radius: f64, exponents: Vec<f64>) -> Result<Self> {
        if center.len() != exponents.len() || center.is_empty() {
            return Err(MtpError::Invalid("rectangle center and exponents differ in length".into()));
        }
        if !(base_radius > 0.0 && base_radius < 1.0) {
            return Err(MtpError::Invalid(format!(
                "rectangle base radius must lie in (0,1), got {base_radius}"
            )));
        }
        if exponents.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(MtpError::Invalid("rectangle exponents must be positive".into()));
        }
        Ok(Rectangle {
            center,
            base_radius,
            exponents,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.exponents
            .iter()
            .map(|&a| self.base_radius.powf(a))
            .collect()
    }

    pub fn to_box(&self) -> Aabb {
        let r = self.radii();
        Aabb {
            lo: self.center.iter().zip(&r).map(|(c, r)| c - r).collect(),
            hi: self.center.iter().zip(&r).map(|(c, r)| c + r).collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.radii().iter().map(|r| 2.0 * r).product()
    }

    /// Per-axis dilation by `k` around the center.
    pub fn dilate_box(&self, k: f64) -> Aabb {
        let r = self.radii();
        Aabb {
            lo: self.center.iter().zip(&r).map(|(c, r)| c - k * r).collect(),
            hi: self.center.iter().zip(&r).map(|(c, r)| c + k * r).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_containing_examples() {
        assert_eq!(cube_containing(&[0.0], 2).unwrap().index, vec![0]);
        assert_eq!(cube_containing(&[0.26], 1).unwrap().index, vec![1]);
        assert_eq!(cube_containing(&[0.9, 0.1], 1).unwrap().index, vec![3, 0]);
        assert!(cube_containing(&[1.0], 1).is_err());
    }

    #[test]
    fn children_nest_in_parent() {
        let q = Cube::new(2, vec![5, 9]).unwrap();
        for c in q.children() {
            assert!(q.contains_cube(&c));
            assert_eq!(c.parent().unwrap(), q);
        }
        assert_eq!(q.children().len(), 16);
    }
}
