//! Logistic regression by Newton-Raphson (IRLS) with step-halving.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use super::design::DesignMatrix;
use crate::error::{Error, Result};

/// |β| beyond which a coefficient is treated as diverging.
pub const SEPARATION_BOUND: f64 = 15.0;
/// Penalty used by the optional ridge fallback.
pub const RIDGE_FALLBACK: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// L2 penalty on the slopes (not the intercept). 0 = plain MLE.
    pub ridge: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions { max_iter: 100, tol: 1e-8, ridge: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub estimate: f64,
    pub se: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub names: Vec<String>,
    pub intercept: Coefficient,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub p_wald: Vec<f64>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub mcfadden_r2: f64,
    pub lr_stat: f64,
    pub lr_test_p: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub ridge: f64,
    pub n: usize,
    pub n_positive: usize,
}

impl LogisticFit {
    pub fn coefficient(&self, name: &str) -> Option<Coefficient> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(Coefficient { estimate: self.coef[j], se: self.se[j], p: self.p_wald[j] })
    }
}

/// log(1 + e^x) without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn linear(columns: &[Vec<f64>], beta: &[f64], i: usize) -> f64 {
    beta[0] + columns.iter().zip(&beta[1..]).map(|(c, b)| c[i] * b).sum::<f64>()
}

/// Log-likelihood at `beta = [intercept, slopes...]`.
pub fn log_likelihood(columns: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
    (0..y.len())
        .map(|i| {
            let eta = linear(columns, beta, i);
            y[i] * eta - log1p_exp(eta)
        })
        .sum()
}

/// Gradient of [`log_likelihood`] with respect to `beta`.
pub fn log_likelihood_gradient(columns: &[Vec<f64>], y: &[f64], beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for i in 0..y.len() {
        let r = y[i] - sigmoid(linear(columns, beta, i));
        g[0] += r;
        for (gj, c) in g[1..].iter_mut().zip(columns) {
            *gj += r * c[i];
        }
    }
    g
}

fn penalized(columns: &[Vec<f64>], y: &[f64], beta: &[f64], ridge: f64) -> f64 {
    log_likelihood(columns, y, beta) - 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

/// Penalized gradient and information matrix at `beta`.
fn newton_terms(columns: &[Vec<f64>], y: &[f64], beta: &[f64], ridge: f64) -> (DVector<f64>, DMatrix<f64>) {
    let q = beta.len();
    let mut g = DVector::zeros(q);
    let mut h = DMatrix::zeros(q, q);
    let mut row = vec![1.0; q];
    for i in 0..y.len() {
        for (j, c) in columns.iter().enumerate() {
            row[j + 1] = c[i];
        }
        let mu = sigmoid(linear(columns, beta, i));
        let w = mu * (1.0 - mu);
        let r = y[i] - mu;
        for a in 0..q {
            g[a] += r * row[a];
            for b in a..q {
                h[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    for j in 1..q {
        g[j] -= ridge * beta[j];
        h[(j, j)] += ridge;
    }
    (g, h)
}

fn invert(h: DMatrix<f64>) -> Result<DMatrix<f64>> {
    match h.clone().cholesky() {
        Some(c) => Ok(c.inverse()),
        None => h
            .try_inverse()
            .ok_or_else(|| Error::Singular("information matrix is not invertible".into())),
    }
}

fn separation_error(names: &[String], beta: &[f64]) -> Error {
    let mut cols: Vec<String> = names
        .iter()
        .zip(&beta[1..])
        .filter(|(_, b)| b.abs() > SEPARATION_BOUND)
        .map(|(n, _)| n.clone())
        .collect();
    if cols.is_empty() {
        let worst = beta[1..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(j, _)| j);
        cols.extend(worst.map(|j| names[j].clone()));
    }
    Error::Separation { columns: cols }
}

/// Maximum-likelihood logistic fit with intercept. `columns[j]` holds
/// predictor `j`; `y` must be 0/1 with both classes present.
pub fn logistic_mle(
    columns: &[Vec<f64>],
    y: &[f64],
    names: &[String],
    opts: &LogisticOptions,
) -> Result<LogisticFit> {
    let n = y.len();
    let p = columns.len();
    if names.len() != p {
        return Err(Error::InvalidInput("one name per predictor required".into()));
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("predictor and target lengths differ".into()));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput("target must be 0/1".into()));
    }
    if columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite predictor value".into()));
    }
    if n <= p + 1 {
        return Err(Error::InvalidInput(format!("{n} rows cannot support {p} predictors and an intercept")));
    }
    let n_pos = y.iter().filter(|&&v| v == 1.0).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::Degenerate("target has a single class".into()));
    }
    if !(opts.ridge >= 0.0) {
        return Err(Error::InvalidInput("ridge penalty must be non-negative".into()));
    }

    let penalized_fit = opts.ridge > 0.0;
    let ybar = n_pos as f64 / n as f64;
    let null_ll = n as f64 * (ybar * ybar.ln() + (1.0 - ybar) * (1.0 - ybar).ln());

    let mut beta = vec![0.0; p + 1];
    beta[0] = (ybar / (1.0 - ybar)).ln();
    let mut ll = penalized(columns, y, &beta, opts.ridge);
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        let (g, h) = newton_terms(columns, y, &beta, opts.ridge);
        let delta = match h.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => h.lu().solve(&g).ok_or_else(|| {
                Error::Singular("information matrix is singular during IRLS".into())
            })?,
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(delta.iter()).map(|(b, d)| b + step * d).collect();
            let cand_ll = penalized(columns, y, &cand, opts.ridge);
            if cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                accepted = Some((cand, cand_ll));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_ll)) = accepted else {
            break;
        };
        let shift = delta.iter().map(|d| (step * d).abs()).fold(0.0, f64::max);
        beta = cand;
        ll = cand_ll;
        if shift < opts.tol {
            converged = true;
            break;
        }
        if !penalized_fit && beta[1..].iter().any(|b| b.abs() > 2.0 * SEPARATION_BOUND) {
            break;
        }
    }

    // A ridge-penalized optimum is finite by construction, so only the
    // plain MLE is screened for divergence.
    if !penalized_fit && beta[1..].iter().any(|b| b.abs() > SEPARATION_BOUND) {
        return Err(separation_error(names, &beta));
    }
    let (g, h) = newton_terms(columns, y, &beta, opts.ridge);
    let gradient_norm = g.norm();
    if !converged && gradient_norm > 1e-6 {
        return Err(separation_error(names, &beta));
    }
    let mu_saturated = (0..n).any(|i| {
        let mu = sigmoid(linear(columns, &beta, i));
        !(1e-12..=1.0 - 1e-12).contains(&mu)
    });
    if mu_saturated && !penalized_fit {
        return Err(separation_error(names, &beta));
    }

    let cov = invert(h)?;
    let se: Vec<f64> = (0..=p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let wald = |b: f64, s: f64| if s > 0.0 { erfc((b / s).abs() / std::f64::consts::SQRT_2) } else { f64::NAN };

    let model_ll = log_likelihood(columns, y, &beta);
    let (mcfadden, lr_stat, lr_p) = if p == 0 {
        (0.0, 0.0, 1.0)
    } else {
        let lr = (2.0 * (model_ll - null_ll)).max(0.0);
        let chi = ChiSquared::new(p as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
        ((1.0 - model_ll / null_ll).max(0.0), lr, if lr == 0.0 { 1.0 } else { chi.sf(lr) })
    };

    Ok(LogisticFit {
        names: names.to_vec(),
        intercept: Coefficient { estimate: beta[0], se: se[0], p: wald(beta[0], se[0]) },
        coef: beta[1..].to_vec(),
        p_wald: (1..=p).map(|j| wald(beta[j], se[j])).collect(),
        se: se[1..].to_vec(),
        log_likelihood: model_ll,
        null_log_likelihood: null_ll,
        mcfadden_r2: mcfadden,
        lr_stat,
        lr_test_p: lr_p,
        converged,
        iterations,
        gradient_norm,
        ridge: opts.ridge,
        n,
        n_positive: n_pos,
    })
}

/// Fit the reduced design. With `ridge_fallback`, a separated or singular
/// fit is retried with a small ridge penalty and flagged via `ridge`.
pub fn fit_logistic(design: &DesignMatrix, opts: &LogisticOptions, ridge_fallback: bool) -> Result<LogisticFit> {
    match logistic_mle(&design.columns, &design.target, &design.item_ids, opts) {
        Err(Error::Separation { .. } | Error::Singular(_)) if ridge_fallback && opts.ridge == 0.0 => {
            logistic_mle(
                &design.columns,
                &design.target,
                &design.item_ids,
                &LogisticOptions { ridge: RIDGE_FALLBACK, ..*opts },
            )
        }
        other => other,
    }
}
