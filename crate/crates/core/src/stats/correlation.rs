use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::mean;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrResult {
    pub r: f64,
    pub n: usize,
    pub p_two_sided: f64,
}

impl CorrResult {
    /// Attach the two-sided t-test p-value (df = n - 2) to a coefficient.
    pub fn from_r(r: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!("correlation needs n >= 3, got {n}")));
        }
        if !r.is_finite() || r.abs() > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!("correlation out of range: {r}")));
        }
        let r = r.clamp(-1.0, 1.0);
        Ok(CorrResult { r, n, p_two_sided: p_value(r, n) })
    }
}

// P(|T| >= |t|) with t = r*sqrt(df)/sqrt(1-r^2) equals I_{1-r^2}(df/2, 1/2).
fn p_value(r: f64, n: usize) -> f64 {
    let x = 1.0 - r * r;
    if x <= 0.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InvalidInput(format!("correlation needs n >= 3, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in correlation input".into()));
    }
    Ok(())
}

/// Pearson product-moment correlation (population moments) with a two-sided
/// t-test against zero.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrResult> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance in correlation input".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    CorrResult::from_r(r, x.len())
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrResult> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}
