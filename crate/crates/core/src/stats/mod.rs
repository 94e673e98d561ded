//! Statistical kernels shared by every pipeline stage.

mod correlation;
mod deviation;
mod vif;

pub use correlation::{average_ranks, pearson, spearman, CorrResult};
pub use deviation::{deviation_scores, DeviationScoreSet};
pub(crate) use deviation::deviation_values;
pub use vif::vif;

/// Two-pass mean; the second pass removes most of the first pass's rounding
/// error, which matters when the spread is tiny next to the magnitude.
pub(crate) fn mean(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    m + x.iter().map(|v| v - m).sum::<f64>() / n
}

/// Population (divide-by-n) variance.
pub(crate) fn pop_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}
