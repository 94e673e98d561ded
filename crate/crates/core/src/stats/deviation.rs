use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mean, pop_variance};
use crate::error::{Error, Result};

/// Cohort-normalized scores `T = 10 (x - mu) / sigma + 50`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationScoreSet {
    pub scores: BTreeMap<String, f64>,
    pub mu: f64,
    /// Population standard deviation of the raw scores.
    pub sigma: f64,
    /// Set when sigma was zero and the all-50 fallback was applied.
    pub degenerate: bool,
}

/// Deviation scores for a cohort. With `allow_degenerate`, a zero-variance
/// cohort maps every student to 50 instead of failing.
pub fn deviation_scores(
    raw: &BTreeMap<String, f64>,
    allow_degenerate: bool,
) -> Result<DeviationScoreSet> {
    let values: Vec<f64> = raw.values().copied().collect();
    let (t, mu, sigma, degenerate) = deviation_values(&values, allow_degenerate)?;
    Ok(DeviationScoreSet {
        scores: raw.keys().cloned().zip(t).collect(),
        mu,
        sigma,
        degenerate,
    })
}

pub(crate) fn deviation_values(
    values: &[f64],
    allow_degenerate: bool,
) -> Result<(Vec<f64>, f64, f64, bool)> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "deviation scores need at least 2 students, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite raw score".into()));
    }
    let mu = mean(values);
    let sigma = pop_variance(values).sqrt();
    if sigma == 0.0 {
        if allow_degenerate {
            return Ok((vec![50.0; values.len()], mu, 0.0, true));
        }
        return Err(Error::Degenerate(
            "all raw scores are equal; deviation scores undefined".into(),
        ));
    }
    let t = values.iter().map(|x| 10.0 * (x - mu) / sigma + 50.0).collect();
    Ok((t, mu, sigma, false))
}
