use super::{Cmp, LinearProgram, LpSolution};
use crate::error::{MtpError, Result};

const PIVOT_EPS: f64 = 1e-11;
const DEGENERATE_SWITCH: usize = 64;

struct Tableau {
    m: usize,
    width: usize,
    a: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    max_iter: usize,
    bland: bool,
    degenerate_run: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.width + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.a[i * (self.width + 1) + self.width]
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let w = self.width + 1;
        let p = self.a[r * w + c];
        let row: Vec<f64> = self.a[r * w..(r + 1) * w].iter().map(|v| v / p).collect();
        self.a[r * w..(r + 1) * w].copy_from_slice(&row);
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f != 0.0 {
                let dst = &mut self.a[i * w..(i + 1) * w];
                for (d, s) in dst.iter_mut().zip(&row) {
                    *d -= f * s;
                }
                dst[c] = 0.0;
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (d, s) in obj.iter_mut().zip(&row) {
                *d -= f * s;
            }
            obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs primal simplex on reduced-cost row `obj` (last entry is minus the
    /// objective value). Columns with `allowed[j] == false` never enter.
    fn optimize(&mut self, obj: &mut [f64], allowed: &[bool], scale: f64) -> Result<()> {
        let tol = PIVOT_EPS * scale.max(1.0);
        loop {
            let mut enter = None;
            let mut best = -tol;
            for j in 0..self.width {
                if !allowed[j] || obj[j] >= -tol {
                    continue;
                }
                if self.bland {
                    enter = Some(j);
                    break;
                }
                if obj[j] < best {
                    best = obj[j];
                    enter = Some(j);
                }
            }
            let Some(c) = enter else { return Ok(()) };
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..self.m {
                let v = self.at(i, c);
                if v > PIVOT_EPS {
                    let q = self.rhs(i).max(0.0) / v;
                    let better = match leave {
                        None => true,
                        Some(l) => q < ratio - 1e-14 || (q <= ratio + 1e-14 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        ratio = q;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Err(MtpError::Precondition("linear program is unbounded".into()));
            };
            if ratio <= 1e-14 {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_SWITCH {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(r, c, obj);
            self.iterations += 1;
            if self.iterations > self.max_iter {
                let v = -obj[self.width];
                return Err(MtpError::Convergence {
                    iterations: self.iterations,
                    lower: v,
                    upper: v,
                });
            }
        }
    }
}

/// Two-phase dense tableau simplex. Dantzig pricing, switching to Bland's rule
/// after a run of degenerate pivots.
pub fn solve_dense(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.n_vars;
    let m = lp.rows.len();
    let mut n_slack = 0;
    let mut n_art = 0;
    let mut rows = Vec::with_capacity(m);
    for row in &lp.rows {
        let (sign, cmp) = if row.rhs < 0.0 {
            (
                -1.0,
                match row.cmp {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                },
            )
        } else {
            (1.0, row.cmp)
        };
        match cmp {
            Cmp::Le => n_slack += 1,
            Cmp::Ge => {
                n_slack += 1;
                n_art += 1
            }
            Cmp::Eq => n_art += 1,
        }
        rows.push((sign, cmp));
    }
    let width = n + n_slack + n_art;
    let w = width + 1;
    let mut t = Tableau {
        m,
        width,
        a: vec![0.0; m * w],
        basis: vec![0; m],
        iterations: 0,
        max_iter: lp.max_iterations.unwrap_or(50 * (m + width) + 1000),
        bland: false,
        degenerate_run: 0,
    };
    let mut slack = n;
    let mut art = n + n_slack;
    let mut is_art = vec![false; width];
    for (i, row) in lp.rows.iter().enumerate() {
        let (sign, cmp) = rows[i];
        for &(j, v) in &row.coeffs {
            if j >= n {
                return Err(MtpError::Invalid(format!("column {j} out of range")));
            }
            t.a[i * w + j] += sign * v;
        }
        t.a[i * w + width] = sign * row.rhs;
        match cmp {
            Cmp::Le => {
                t.a[i * w + slack] = 1.0;
                t.basis[i] = slack;
                slack += 1;
            }
            Cmp::Ge => {
                t.a[i * w + slack] = -1.0;
                slack += 1;
                t.a[i * w + art] = 1.0;
                t.basis[i] = art;
                is_art[art] = true;
                art += 1;
            }
            Cmp::Eq => {
                t.a[i * w + art] = 1.0;
                t.basis[i] = art;
                is_art[art] = true;
                art += 1;
            }
        }
    }
    let scale = lp
        .objective
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));

    if n_art > 0 {
        let mut obj = vec![0.0; w];
        for i in 0..m {
            if is_art[t.basis[i]] {
                for j in 0..w {
                    obj[j] -= t.at(i, j);
                }
            }
        }
        for j in 0..width {
            if is_art[j] {
                obj[j] = 0.0;
            }
        }
        let allowed = vec![true; width];
        t.optimize(&mut obj, &allowed, 1.0)?;
        let infeas = -obj[width];
        let rhs_scale = lp.rows.iter().fold(1.0f64, |a, r| a.max(r.rhs.abs()));
        if infeas > 1e-9 * rhs_scale {
            return Err(MtpError::Precondition(format!(
                "linear program is infeasible (phase one residual {infeas:.3e})"
            )));
        }
        // drive remaining artificials out of the basis
        for i in 0..m {
            if is_art[t.basis[i]] {
                if let Some(j) = (0..width).find(|&j| !is_art[j] && t.at(i, j).abs() > 1e-9) {
                    let mut dummy = vec![0.0; w];
                    t.pivot(i, j, &mut dummy);
                }
            }
        }
        t.bland = false;
        t.degenerate_run = 0;
    }

    let mut obj = vec![0.0; w];
    obj[..n].copy_from_slice(&lp.objective);
    for i in 0..m {
        let b = t.basis[i];
        let cb = if b < n { lp.objective[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..w {
                obj[j] -= cb * t.at(i, j);
            }
        }
    }
    let allowed: Vec<bool> = (0..width).map(|j| !is_art[j]).collect();
    t.optimize(&mut obj, &allowed, scale)?;

    let mut x = vec![0.0; n];
    for i in 0..m {
        if t.basis[i] < n {
            x[t.basis[i]] = t.rhs(i).max(0.0);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        x,
        objective,
        iterations: t.iterations,
    })
}
