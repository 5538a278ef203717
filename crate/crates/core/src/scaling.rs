//! Least-squares line fits and grid helpers used by the scaling analyses.

/// Ordinary least-squares fit `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "a line fit needs two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
    let ss_res: f64 = resid.iter().map(|r| r * r).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    let max_residual = resid.iter().map(|r| r.abs()).fold(0.0, f64::max);
    LinearFit { slope, intercept, r_squared, max_residual }
}

/// Index of the largest `|v|`, ties broken toward the smaller index.
pub fn argmax_abs(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in v.iter().enumerate() {
        if !x.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if x.abs() <= b => {}
            _ => best = Some((i, x.abs())),
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the largest value, ties broken toward the smaller index.
pub fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if x <= b => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}

/// `count` points `start + j·(end−start)/count`, end excluded.
pub fn uniform_grid(start: f64, end: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| start + (end - start) * j as f64 / count as f64).collect()
}
