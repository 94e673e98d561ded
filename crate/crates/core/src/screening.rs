//! Coherence screening of a chronological test chain.
//!
//! Tests whose evaluation criteria drift away from the rest of the chain show
//! up as depressed correlations with their chronological neighbours. The
//! screen repeatedly removes the least coherent test until every consecutive
//! pair of surviving tests correlates at or above `theta_low`.

use serde::{Deserialize, Serialize};

use crate::data_model::{ScoreKind, ScorePanel, TestKey};
use crate::error::{Error, Result};
use crate::stats::{pearson, CorrResult};

/// Symmetric matrix of pairwise test correlations; the diagonal is unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCorrelationMatrix {
    pub tests: Vec<TestKey>,
    cells: Vec<Vec<Option<CorrResult>>>,
}

impl TestCorrelationMatrix {
    /// Build from the upper triangle in row-major order
    /// (`(0,1), (0,2), …, (1,2), …`), as correlation tables are printed.
    /// `n` is the number of students behind each coefficient.
    pub fn from_upper(tests: Vec<TestKey>, upper: &[f64], n: usize) -> Result<Self> {
        let m = tests.len();
        if upper.len() != m * (m.saturating_sub(1)) / 2 {
            return Err(Error::InvalidInput(format!(
                "{} tests need {} upper-triangle values, got {}",
                m,
                m * (m.saturating_sub(1)) / 2,
                upper.len()
            )));
        }
        let mut cells = vec![vec![None; m]; m];
        let mut it = upper.iter();
        for i in 0..m {
            for j in i + 1..m {
                let c = CorrResult::from_r(*it.next().expect("length checked"), n)?;
                cells[i][j] = Some(c);
                cells[j][i] = Some(c);
            }
        }
        let matrix = TestCorrelationMatrix { tests, cells };
        matrix.check_order()?;
        Ok(matrix)
    }

    fn check_order(&self) -> Result<()> {
        if self.tests.windows(2).any(|w| w[0].order_index >= w[1].order_index) {
            return Err(Error::InvalidInput(
                "correlation matrix tests must be in strictly increasing order_index".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&CorrResult> {
        self.cells.get(i)?.get(j)?.as_ref()
    }

    /// Correlation coefficient between tests `i` and `j` (`i != j`).
    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).map(|c| c.r).expect("off-diagonal cell")
    }

    pub fn index_of(&self, test_id: &str) -> Option<usize> {
        self.tests.iter().position(|t| t.test_id == test_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreeningPolicy {
    pub theta_low: f64,
    pub min_chain: usize,
    pub score_kind: ScoreKind,
}

impl Default for ScreeningPolicy {
    fn default() -> Self {
        ScreeningPolicy {
            theta_low: 0.70,
            min_chain: 3,
            score_kind: ScoreKind::CorrectRatio,
        }
    }
}

impl ScreeningPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_low > 0.0 && self.theta_low < 1.0) {
            return Err(Error::InvalidInput(format!(
                "theta_low must lie in (0, 1), got {}",
                self.theta_low
            )));
        }
        if self.min_chain < 2 {
            return Err(Error::InvalidInput("min_chain must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub test: TestKey,
    pub reason: String,
    /// Correlations with the test's retained chronological neighbours at the
    /// moment of removal.
    pub offending_r: Vec<f64>,
    /// Mean correlation with every other retained test at removal.
    pub coherence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningOutcome {
    pub retained: Vec<TestKey>,
    /// In removal order.
    pub excluded: Vec<Exclusion>,
    pub final_consecutive_r: Vec<f64>,
}

/// Pairwise Pearson correlations over students of each test's aggregate score.
pub fn correlation_matrix(
    panel: &ScorePanel,
    policy: &ScreeningPolicy,
) -> Result<TestCorrelationMatrix> {
    if panel.students.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "correlation screening needs at least 3 students, got {}",
            panel.students.len()
        )));
    }
    let scores: Vec<Vec<f64>> = panel
        .tests
        .iter()
        .map(|t| panel.scores(&t.test_id, policy.score_kind))
        .collect::<Result<_>>()?;
    let m = panel.tests.len();
    let mut cells = vec![vec![None; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let c = pearson(&scores[i], &scores[j]).map_err(|e| match e {
                Error::Degenerate(_) => {
                    let which = if crate::stats::pop_variance(&scores[i]) == 0.0 { i } else { j };
                    Error::Degenerate(format!(
                        "test {} has zero score variance",
                        panel.tests[which].test_id
                    ))
                }
                other => other,
            })?;
            cells[i][j] = Some(c);
            cells[j][i] = Some(c);
        }
    }
    let matrix = TestCorrelationMatrix {
        tests: panel.tests.clone(),
        cells,
    };
    matrix.check_order()?;
    Ok(matrix)
}

fn consecutive_r(matrix: &TestCorrelationMatrix, kept: &[usize]) -> Vec<f64> {
    kept.windows(2).map(|w| matrix.r(w[0], w[1])).collect()
}

/// Greedy exclusion loop. While any consecutive retained pair falls below
/// `theta_low`, remove the retained test with the lowest mean correlation to
/// all other retained tests (ties remove the later test) and re-evaluate.
pub fn screen_tests(
    matrix: &TestCorrelationMatrix,
    policy: &ScreeningPolicy,
) -> Result<ScreeningOutcome> {
    policy.validate()?;
    if matrix.len() < policy.min_chain {
        return Err(Error::ScreeningFailed {
            reason: format!(
                "chain has {} tests, fewer than min_chain {}",
                matrix.len(),
                policy.min_chain
            ),
            removals: Vec::new(),
        });
    }

    let mut kept: Vec<usize> = (0..matrix.len()).collect();
    let mut excluded = Vec::new();
    loop {
        let cons = consecutive_r(matrix, &kept);
        if cons.iter().all(|&r| r >= policy.theta_low) {
            return Ok(ScreeningOutcome {
                retained: kept.iter().map(|&i| matrix.tests[i].clone()).collect(),
                excluded,
                final_consecutive_r: cons,
            });
        }

        let mut worst: Option<(usize, f64)> = None;
        for (pos, &i) in kept.iter().enumerate() {
            let others: Vec<f64> = kept.iter().filter(|&&j| j != i).map(|&j| matrix.r(i, j)).collect();
            let score = others.iter().sum::<f64>() / others.len() as f64;
            // `<=` so that a tie moves the choice to the later test.
            if worst.is_none_or(|(_, s)| score <= s) {
                worst = Some((pos, score));
            }
        }
        let (pos, coherence) = worst.expect("non-empty chain");
        let idx = kept[pos];
        let neighbours: Vec<f64> = [pos.checked_sub(1), Some(pos + 1)]
            .into_iter()
            .flatten()
            .filter_map(|q| kept.get(q))
            .map(|&j| matrix.r(idx, j))
            .collect();
        let below = cons.iter().filter(|&&r| r < policy.theta_low).count();
        excluded.push(Exclusion {
            test: matrix.tests[idx].clone(),
            reason: format!(
                "{below} consecutive pair(s) below {:.2}; lowest coherence ({coherence:.4}) with the retained chain",
                policy.theta_low
            ),
            offending_r: neighbours,
            coherence,
        });
        kept.remove(pos);

        if kept.len() < policy.min_chain {
            return Err(Error::ScreeningFailed {
                reason: format!(
                    "only {} tests left after {} removals (min_chain {})",
                    kept.len(),
                    excluded.len(),
                    policy.min_chain
                ),
                removals: excluded,
            });
        }
    }
}

/// Post-hoc audit of a screening outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAudit {
    pub passed: bool,
    pub lines: Vec<String>,
}

/// Re-assert the retained chain's invariants and render one audit line per
/// exclusion.
pub fn validate_chain(outcome: &ScreeningOutcome, policy: &ScreeningPolicy) -> Result<ChainAudit> {
    if outcome.retained.windows(2).any(|w| w[0].order_index >= w[1].order_index) {
        return Err(Error::Consistency("retained chain is not chronological".into()));
    }
    if outcome.final_consecutive_r.len() + 1 != outcome.retained.len() {
        return Err(Error::Consistency(
            "consecutive correlations do not match the retained chain".into(),
        ));
    }
    for (w, r) in outcome.retained.windows(2).zip(&outcome.final_consecutive_r) {
        if *r < policy.theta_low {
            return Err(Error::Consistency(format!(
                "retained pair {} -> {} has r = {r:.4} < {:.2}",
                w[0].test_id, w[1].test_id, policy.theta_low
            )));
        }
    }
    if outcome
        .excluded
        .iter()
        .any(|e| outcome.retained.iter().any(|t| t.test_id == e.test.test_id))
    {
        return Err(Error::Consistency("a test is both retained and excluded".into()));
    }
    let lines = outcome
        .excluded
        .iter()
        .map(|e| {
            let rs: Vec<String> = e.offending_r.iter().map(|r| format!("{r:.2}")).collect();
            format!(
                "excluded {} ({}): {}; neighbour r = [{}]",
                e.test.test_id,
                e.test.label(),
                e.reason,
                rs.join(", ")
            )
        })
        .collect();
    Ok(ChainAudit { passed: true, lines })
}

/// `correlations.csv`: an r block and a p block, each a square matrix with
/// test ids as header row and column, separated by a blank line.
pub fn correlations_csv(matrix: &TestCorrelationMatrix) -> String {
    let ids: Vec<&str> = matrix.tests.iter().map(|t| t.test_id.as_str()).collect();
    let mut out = String::new();
    for (corner, pick) in [("r", 0usize), ("p", 1usize)] {
        if pick == 1 {
            out.push('\n');
        }
        out.push_str(corner);
        for id in &ids {
            out.push(',');
            out.push_str(&csv_field(id));
        }
        out.push('\n');
        for (i, id) in ids.iter().enumerate() {
            out.push_str(&csv_field(id));
            for j in 0..ids.len() {
                out.push(',');
                if let Some(c) = matrix.get(i, j) {
                    let v = if pick == 0 { c.r } else { c.p_two_sided };
                    out.push_str(&format!("{v:.4}"));
                }
            }
            out.push('\n');
        }
    }
    out
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::Subject;

    fn chain(n: usize) -> Vec<TestKey> {
        (0..n)
            .map(|i| TestKey {
                test_id: format!("T{}", i + 1),
                organization: "X".into(),
                subject: Subject::Mathematics,
                grade: 4 + i as u32,
                variant: None,
                year: 2014 + i as i32,
                order_index: i as u32,
            })
            .collect()
    }

    fn table1() -> TestCorrelationMatrix {
        TestCorrelationMatrix::from_upper(
            chain(5),
            &[0.84, 0.23, 0.91, 0.88, 0.50, 0.92, 0.81, 0.23, 0.58, 0.83],
            100,
        )
        .unwrap()
    }

    #[test]
    fn table1_excludes_test3() {
        let out = screen_tests(&table1(), &ScreeningPolicy::default()).unwrap();
        let ids: Vec<&str> = out.retained.iter().map(|t| t.test_id.as_str()).collect();
        assert_eq!(ids, vec!["T1", "T2", "T4", "T5"]);
        assert_eq!(out.excluded.len(), 1);
        assert_eq!(out.excluded[0].test.test_id, "T3");
        assert_eq!(out.final_consecutive_r, vec![0.84, 0.92, 0.83]);
        assert_eq!(out.excluded[0].offending_r, vec![0.50, 0.23]);
    }

    #[test]
    fn coherent_chain_untouched() {
        let m = TestCorrelationMatrix::from_upper(chain(4), &[0.9; 6], 50).unwrap();
        let out = screen_tests(&m, &ScreeningPolicy::default()).unwrap();
        assert_eq!(out.retained.len(), 4);
        assert!(out.excluded.is_empty());
    }

    #[test]
    fn collapse_below_min_chain_errors_with_log() {
        let m = TestCorrelationMatrix::from_upper(chain(3), &[0.1, 0.2, 0.3], 50).unwrap();
        match screen_tests(&m, &ScreeningPolicy::default()) {
            Err(Error::ScreeningFailed { removals, .. }) => assert_eq!(removals.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tie_removes_later_test() {
        // T2 and T3 have identical coherence; the later one goes.
        let m = TestCorrelationMatrix::from_upper(chain(4), &[0.9, 0.9, 0.9, 0.5, 0.9, 0.9], 50)
            .unwrap();
        let out = screen_tests(&m, &ScreeningPolicy::default()).unwrap();
        assert_eq!(out.excluded[0].test.test_id, "T3");
    }

    #[test]
    fn audit_passes_and_fails() {
        let policy = ScreeningPolicy::default();
        let out = screen_tests(&table1(), &policy).unwrap();
        let audit = validate_chain(&out, &policy).unwrap();
        assert!(audit.passed);
        assert_eq!(audit.lines.len(), 1);

        let bad = ScreeningOutcome {
            retained: chain(2),
            excluded: vec![],
            final_consecutive_r: vec![0.5],
        };
        assert!(matches!(validate_chain(&bad, &policy), Err(Error::Consistency(_))));
    }

    #[test]
    fn policy_validation() {
        let p = ScreeningPolicy { theta_low: 1.2, ..Default::default() };
        assert!(p.validate().is_err());
        let p = ScreeningPolicy { min_chain: 1, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let m = TestCorrelationMatrix::from_upper(chain(3), &[0.5, 0.25, 0.75], 30).unwrap();
        let csv = correlations_csv(&m);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "r,T1,T2,T3");
        assert_eq!(lines[1], "T1,,0.5000,0.2500");
        assert_eq!(lines[4], "");
        assert!(lines[5].starts_with("p,T1"));
        assert_eq!(lines.len(), 9);
    }
}
