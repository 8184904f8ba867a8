use crate::error::{MtpError, Result};

/// Output of [`pack_mw`]: a feasible packing, a feasible cover of the dual,
/// and the bracket they give on the common optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct MwSolution {
    /// Feasible `x` with `sum_{j ∋ i} x_j <= b_i`.
    pub x: Vec<f64>,
    /// Feasible `y` with `sum_{i ∈ col j} y_i >= 1`.
    pub y: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

/// Garg–Könemann for `max sum x_j` s.t. `sum_{j: i ∈ cols[j]} x_j <= b_i`.
/// Every column must touch at least one row and every `b_i` must be positive.
pub fn pack_mw(cols: &[Vec<usize>], b: &[f64], eps: f64, max_iter: usize) -> Result<MwSolution> {
    let m = b.len();
    if b.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(MtpError::Invalid("packing capacities must be positive".into()));
    }
    if cols.iter().any(|c| c.is_empty() || c.iter().any(|&i| i >= m)) {
        return Err(MtpError::Invalid("every packing column needs rows in range".into()));
    }
    if cols.is_empty() {
        return Ok(MwSolution { x: vec![], y: vec![0.0; m], lower: 0.0, upper: 0.0, iterations: 0 });
    }
    let delta = (1.0 + eps) * ((1.0 + eps) * m as f64).powf(-1.0 / eps);
    let mut y: Vec<f64> = b.iter().map(|bi| delta / bi).collect();
    let mut x = vec![0.0; cols.len()];
    let mut best_upper = f64::INFINITY;
    let mut best_y = y.clone();
    let mut it = 0;
    loop {
        let dual: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();
        let (j, alpha) = cols
            .iter()
            .enumerate()
            .map(|(j, c)| (j, c.iter().map(|&i| y[i]).sum::<f64>()))
            .fold((0, f64::INFINITY), |a, v| if v.1 < a.1 { v } else { a });
        if dual / alpha < best_upper {
            best_upper = dual / alpha;
            best_y = y.iter().map(|v| v / alpha).collect();
        }
        if dual >= 1.0 {
            break;
        }
        it += 1;
        if it > max_iter {
            return Err(MtpError::Convergence { iterations: it, lower: 0.0, upper: best_upper });
        }
        let c = cols[j].iter().map(|&i| b[i]).fold(f64::INFINITY, f64::min);
        x[j] += c;
        for &i in &cols[j] {
            y[i] *= 1.0 + eps * c / b[i];
        }
    }
    // scale to exact feasibility
    let mut load = vec![0.0; m];
    for (j, c) in cols.iter().enumerate() {
        for &i in c {
            load[i] += x[j];
        }
    }
    let worst = load.iter().zip(b).map(|(l, bi)| l / bi).fold(0.0f64, f64::max);
    if worst > 0.0 {
        for v in &mut x {
            *v /= worst;
        }
    }
    let lower = x.iter().sum();
    Ok(MwSolution { x, y: best_y, lower, upper: best_upper, iterations: it })
}
