//! Small linear programs: a dense two-phase simplex, and a
//! multiplicative-weights solver for 0/1 packing programs too large for it.

mod mw;
mod simplex;

pub use mw::{pack_mw, MwSolution};
pub use simplex::solve_dense;

/// Row count above which the packing programs switch to multiplicative weights.
pub const DENSE_ROW_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Row {
    pub fn le(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Row { coeffs, cmp: Cmp::Le, rhs }
    }

    pub fn ge(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Row { coeffs, cmp: Cmp::Ge, rhs }
    }

    pub fn eq(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Row { coeffs, cmp: Cmp::Eq, rhs }
    }
}

/// `min objective·x` subject to `rows`, `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    /// Pivot cap; `None` picks `50 (m + n) + 1000`.
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}
