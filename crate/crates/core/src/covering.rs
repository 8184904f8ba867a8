//! Greedy covering-lemma selections: the 5r subfamily and 3r-separated
//! packings inside a container ball.
//!
//! Candidate lists are indexed from 1: `candidates[i]` has index `i + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{MtpError, Result};
use crate::space::{Aabb, Ball, Rectangle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball(Ball),
    Rectangle(Rectangle),
}

impl Shape {
    pub fn to_box(&self) -> Aabb {
        match self {
            Shape::Ball(b) => b.to_box(),
            Shape::Rectangle(r) => r.to_box(),
        }
    }

    /// Dilation by `k` about the center (per axis for rectangles).
    pub fn dilate_box(&self, k: f64) -> Aabb {
        match self {
            Shape::Ball(b) => b.scaled(k).to_box(),
            Shape::Rectangle(r) => r.dilate_box(k),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Shape::Ball(b) => b.volume(),
            Shape::Rectangle(r) => r.volume(),
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Shape::Ball(b) => &b.center,
            Shape::Rectangle(r) => &r.center,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chosen {
    pub index: usize,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: Vec<Chosen>,
    pub container: Ball,
    /// `m(∪ chosen) / m(container)`.
    pub achieved_ratio: f64,
    pub separation_factor: f64,
}

impl Selection {
    fn from_chosen(chosen: Vec<Chosen>, container: &Ball) -> Self {
        let vol: f64 = chosen.iter().map(|c| c.shape.volume()).sum();
        Selection {
            achieved_ratio: vol / container.volume(),
            chosen,
            container: container.clone(),
            separation_factor: SEPARATION,
        }
    }

    /// Exact re-check of containment and separation.
    pub fn verify(&self) -> std::result::Result<(), String> {
        let cb = self.container.to_box();
        for c in &self.chosen {
            if !cb.contains_box(&c.shape.to_box()) {
                return Err(format!("shape {} leaves the container", c.index));
            }
        }
        let dil: Vec<Aabb> = self.chosen.iter().map(|c| c.shape.dilate_box(self.separation_factor)).collect();
        for i in 0..dil.len() {
            for j in i + 1..dil.len() {
                if dil[i].meets(&dil[j]) {
                    return Err(format!(
                        "dilates of {} and {} meet",
                        self.chosen[i].index, self.chosen[j].index
                    ));
                }
            }
        }
        Ok(())
    }
}

pub(crate) const SEPARATION: f64 = 3.0;

/// Accepted open boxes, kept sorted by their first lower coordinate.
pub(crate) struct BoxIndex {
    boxes: Vec<Aabb>,
    widest: f64,
}

impl BoxIndex {
    pub(crate) fn new() -> Self {
        BoxIndex { boxes: Vec::new(), widest: 0.0 }
    }

    pub(crate) fn meets_any(&self, q: &Aabb) -> bool {
        let lo = q.lo[0] - self.widest;
        let start = self.boxes.partition_point(|b| b.lo[0] <= lo);
        self.boxes[start..]
            .iter()
            .take_while(|b| b.lo[0] < q.hi[0])
            .any(|b| b.meets(q))
    }

    pub(crate) fn insert(&mut self, b: Aabb) {
        self.widest = self.widest.max(b.hi[0] - b.lo[0]);
        let at = self.boxes.partition_point(|x| x.lo[0] <= b.lo[0]);
        self.boxes.insert(at, b);
    }
}

pub(crate) fn greedy_order(sizes: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].total_cmp(&sizes[a]).then(a.cmp(&b)));
    order
}

/// Vitali selection: pairwise disjoint balls such that every input ball lies
/// in the 5-dilate of a selected one. Returns indices into `family`, in
/// selection order.
pub fn five_r_cover_indices(family: &[Ball]) -> Vec<usize> {
    let radii: Vec<f64> = family.iter().map(|b| b.radius).collect();
    let mut acc = BoxIndex::new();
    let mut out = Vec::new();
    for i in greedy_order(&radii) {
        let b = family[i].to_box();
        if !acc.meets_any(&b) {
            acc.insert(b);
            out.push(i);
        }
    }
    out
}

pub fn five_r_cover(family: &[Ball]) -> Vec<Ball> {
    five_r_cover_indices(family).into_iter().map(|i| family[i].clone()).collect()
}

/// Candidates with index `>= g` lying in the closed container, greedily packed
/// by nonincreasing radius with pairwise disjoint 3-dilates.
pub fn select_kgb_balls(container: &Ball, candidates: &[Ball], g: usize) -> Result<Selection> {
    if g == 0 {
        return Err(MtpError::Precondition("G must be at least 1".into()));
    }
    let cb = container.to_box();
    let pool: Vec<usize> = (0..candidates.len())
        .filter(|&i| i + 1 >= g && candidates[i].dim() == container.dim() && cb.contains_box(&candidates[i].to_box()))
        .collect();
    let radii: Vec<f64> = pool.iter().map(|&i| candidates[i].radius).collect();
    let mut acc = BoxIndex::new();
    let mut chosen = Vec::new();
    for k in greedy_order(&radii) {
        let i = pool[k];
        let d = candidates[i].scaled(SEPARATION).to_box();
        if !acc.meets_any(&d) {
            acc.insert(d);
            chosen.push(Chosen { index: i + 1, shape: Shape::Ball(candidates[i].clone()) });
        }
    }
    Ok(Selection::from_chosen(chosen, container))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RectangleMode {
    /// All rectangles share one sidelength vector.
    Ubiquity,
    /// Mixed sidelengths allowed.
    FullMeasure,
}

/// Rectangle analogue of [`select_kgb_balls`] with per-axis 3-dilates,
/// greedy by nonincreasing volume.
pub fn select_kgb_rectangles(container: &Ball, rectangles: &[Rectangle], mode: RectangleMode) -> Result<Selection> {
    if mode == RectangleMode::Ubiquity {
        if let Some(first) = rectangles.first() {
            let r0 = first.radii();
            for (i, r) in rectangles.iter().enumerate() {
                let same = r
                    .radii()
                    .iter()
                    .zip(&r0)
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs());
                if !same || r.dim() != first.dim() {
                    return Err(MtpError::Precondition(format!(
                        "rectangle {} has different sidelengths in ubiquity mode",
                        i + 1
                    )));
                }
            }
        }
    }
    let cb = container.to_box();
    let pool: Vec<usize> = (0..rectangles.len())
        .filter(|&i| rectangles[i].dim() == container.dim() && cb.contains_box(&rectangles[i].to_box()))
        .collect();
    let vols: Vec<f64> = pool.iter().map(|&i| rectangles[i].volume()).collect();
    let mut acc = BoxIndex::new();
    let mut chosen = Vec::new();
    for k in greedy_order(&vols) {
        let i = pool[k];
        let d = rectangles[i].dilate_box(SEPARATION);
        if !acc.meets_any(&d) {
            acc.insert(d);
            chosen.push(Chosen { index: i + 1, shape: Shape::Rectangle(rectangles[i].clone()) });
        }
    }
    Ok(Selection::from_chosen(chosen, container))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(c: f64, r: f64) -> Ball {
        Ball::new(vec![c], r).unwrap()
    }

    #[test]
    fn five_r_examples() {
        let fam = vec![b(0.0, 1.0), b(0.5, 1.0), b(10.0, 1.0)];
        assert_eq!(five_r_cover(&fam), vec![b(0.0, 1.0), b(10.0, 1.0)]);
        assert!(fam[0].scaled(5.0).contains_ball(&fam[1]));
        assert_eq!(five_r_cover(&[b(0.3, 0.1)]), vec![b(0.3, 0.1)]);
        assert!(five_r_cover(&[]).is_empty());
    }

    #[test]
    fn kgb_ball_examples() {
        let unit = b(0.5, 0.5);
        let cands: Vec<Ball> = (1..=7).map(|k| b(k as f64 / 8.0, 1.0 / 64.0)).collect();
        let s = select_kgb_balls(&unit, &cands, 1).unwrap();
        assert_eq!(s.chosen.len(), 7);
        assert!((s.achieved_ratio - 0.21875).abs() < 1e-15);
        s.verify().unwrap();
        let far = select_kgb_balls(&b(5.0, 0.1), &cands, 1).unwrap();
        assert!(far.chosen.is_empty() && far.achieved_ratio == 0.0);
        let one = select_kgb_balls(&unit, &[b(0.5, 0.125)], 1).unwrap();
        assert_eq!(one.chosen.len(), 1);
        assert!((one.achieved_ratio - 0.25).abs() < 1e-15);
        assert_eq!(select_kgb_balls(&unit, &cands, 3).unwrap().chosen.len(), 5);
    }

    #[test]
    fn kgb_rectangle_grid() {
        let unit = Ball::new(vec![0.5, 0.5], 0.5).unwrap();
        let mut rects = Vec::new();
        for i in 0..8 {
            for j in 0..32 {
                let c = vec![(2 * i + 1) as f64 / 16.0, (2 * j + 1) as f64 / 64.0];
                rects.push(Rectangle::new(c, 0.5f64.powi(4), vec![1.0, 1.5]).unwrap());
            }
        }
        assert_eq!(rects[0].radii(), vec![1.0 / 16.0, 1.0 / 64.0]);
        let s = select_kgb_rectangles(&unit, &rects, RectangleMode::Ubiquity).unwrap();
        assert!(!s.chosen.is_empty());
        s.verify().unwrap();
        let mut mixed = rects.clone();
        mixed.push(Rectangle::new(vec![0.5, 0.5], 0.01, vec![1.0, 1.0]).unwrap());
        assert!(select_kgb_rectangles(&unit, &mixed, RectangleMode::Ubiquity).is_err());
        assert!(select_kgb_rectangles(&unit, &mixed, RectangleMode::FullMeasure).is_ok());
    }
}
