//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams { k, seed, max_iter: 300, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Inertia after each Lloyd update; non-increasing.
    pub inertia_trace: Vec<f64>,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn validate(data: &[Vec<f64>], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if data.len() < k {
        return Err(Error::InvalidInput(format!(
            "k = {k} exceeds the number of vectors ({})",
            data.len()
        )));
    }
    let dim = data[0].len();
    if data.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidInput("vectors differ in dimension".into()));
    }
    if data.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in clustering input".into()));
    }
    Ok(dim)
}

fn plus_plus_init(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(data[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = data.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = data[pick].clone();
        for (i, p) in data.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Move the point farthest from its centroid (taken from a cluster with more
/// than one member) into each empty cluster.
fn repair_empty(
    data: &[Vec<f64>],
    centroids: &[Vec<f64>],
    assignment: &mut [usize],
    k: usize,
) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far: Option<(usize, f64)> = None;
        for (i, p) in data.iter().enumerate() {
            if counts[assignment[i]] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[assignment[i]]);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        match far {
            Some((i, _)) => assignment[i] = empty,
            None => return,
        }
    }
}

fn inertia(data: &[Vec<f64>], centroids: &[Vec<f64>], assignment: &[usize]) -> f64 {
    data.iter()
        .zip(assignment)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

pub fn kmeans(data: &[Vec<f64>], params: &KMeansParams) -> Result<KMeansFit> {
    let dim = validate(data, params.k)?;
    let k = params.k;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = plus_plus_init(data, k, &mut rng);
    let mut assignment = vec![0usize; data.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..params.max_iter.max(1) {
        iterations += 1;
        for (i, p) in data.iter().enumerate() {
            assignment[i] = nearest(p, &centroids).0;
        }
        repair_empty(data, &centroids, &mut assignment, k);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in data.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let new: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        let current = inertia(data, &centroids, &assignment);
        if let Some(&prev) = trace.last() {
            debug_assert!(current <= prev * (1.0 + 1e-12) + 1e-12, "inertia increased");
        }
        trace.push(current);
        if shift < params.tol {
            break;
        }
    }

    Ok(KMeansFit {
        inertia: inertia(data, &centroids, &assignment),
        centroids,
        assignment,
        iterations,
        seed: params.seed,
        inertia_trace: trace,
    })
}

/// Run `restarts` seeds (`seed`, `seed + 1`, …) and keep the lowest inertia;
/// ties keep the lowest seed.
pub fn kmeans_restarts(data: &[Vec<f64>], params: &KMeansParams, restarts: usize) -> Result<KMeansFit> {
    let mut best: Option<KMeansFit> = None;
    for r in 0..restarts.max(1) as u64 {
        let fit = kmeans(data, &KMeansParams { seed: params.seed.wrapping_add(r), ..*params })?;
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one run"))
}
