use std::collections::BTreeMap;

use crate::error::{Error, Result};

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two partitions of the same students.
pub fn adjusted_rand_index<A: Ord + Clone, B: Ord + Clone>(
    a: &BTreeMap<String, A>,
    b: &BTreeMap<String, B>,
) -> Result<f64> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(Error::InvalidInput(
            "partitions cover different student sets".into(),
        ));
    }
    let n = a.len() as u64;
    if n < 2 {
        return Err(Error::InvalidInput("ARI needs at least two students".into()));
    }
    let mut table: BTreeMap<(A, B), u64> = BTreeMap::new();
    let mut rows: BTreeMap<A, u64> = BTreeMap::new();
    let mut cols: BTreeMap<B, u64> = BTreeMap::new();
    for (s, la) in a {
        let lb = &b[s];
        *table.entry((la.clone(), lb.clone())).or_default() += 1;
        *rows.entry(la.clone()).or_default() += 1;
        *cols.entry(lb.clone()).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        // Both partitions trivial in the same way (all singletons or one block).
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
