use serde::{Deserialize, Serialize};

use crate::data_model::{ScorePanel, TestKey};
use crate::error::{Error, Result};
use crate::stats::{pearson, vif};
use crate::trend::{ArchetypeLabel, Clustering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    ZeroVariance,
    Collinear,
    Vif,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub item_id: String,
    pub reason: RemovalReason,
    /// VIF at removal time (vif removals only; `None` when infinite).
    pub vif: Option<f64>,
    /// Earlier item this one duplicates (collinear removals only).
    pub duplicate_of: Option<String>,
}

/// Binary item predictors for students from two clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub cohort_id: String,
    pub baseline_test: String,
    pub positive: ArchetypeLabel,
    pub negative: ArchetypeLabel,
    pub students: Vec<String>,
    /// 1 for the positive cluster.
    pub target: Vec<f64>,
    pub item_ids: Vec<String>,
    pub topics: Vec<String>,
    /// `columns[j][i]`: item `j`, student `i`.
    pub columns: Vec<Vec<f64>>,
    pub removal_log: Vec<Removal>,
    /// Clustered students without baseline responses.
    pub missing_baseline: usize,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.students.len()
    }

    pub fn n_positive(&self) -> usize {
        self.target.iter().filter(|&&y| y == 1.0).count()
    }

    fn drop_column(&mut self, j: usize, removal: Removal) {
        self.item_ids.remove(j);
        self.topics.remove(j);
        self.columns.remove(j);
        self.removal_log.push(removal);
    }
}

/// Rows are students carrying `positive` or `negative` in `clustering` that
/// also answered `baseline_test` in `baseline`.
pub fn build_design(
    baseline: &ScorePanel,
    baseline_test: &TestKey,
    clustering: &Clustering,
    positive: &ArchetypeLabel,
    negative: &ArchetypeLabel,
) -> Result<DesignMatrix> {
    if positive == negative {
        return Err(Error::InvalidInput(format!("positive and negative label are both {positive}")));
    }
    if baseline.test(&baseline_test.test_id).is_none() {
        return Err(Error::InvalidInput(format!(
            "baseline test {} is not in the {} panel of cohort {}",
            baseline_test.test_id,
            baseline.subject.as_str(),
            baseline.cohort_id
        )));
    }
    let mut students = Vec::new();
    let mut target = Vec::new();
    let mut missing = 0;
    let mut counts = [0usize; 2];
    for (student, &c) in &clustering.assignment {
        let label = &clustering.labels[c];
        let y = if label == positive {
            1.0
        } else if label == negative {
            0.0
        } else {
            continue;
        };
        if baseline.items(student, &baseline_test.test_id).is_none() {
            missing += 1;
            continue;
        }
        counts[(y == 0.0) as usize] += 1;
        students.push(student.clone());
        target.push(y);
    }
    for (label, n) in [(positive, counts[0]), (negative, counts[1])] {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "cluster `{label}` has {n} student(s) with baseline scores; need at least 2"
            )));
        }
    }
    let first = baseline.items(&students[0], &baseline_test.test_id).expect("checked above");
    if first.is_empty() {
        return Err(Error::InvalidInput(format!("baseline test {} has no items", baseline_test.test_id)));
    }
    let item_ids: Vec<String> = first.iter().map(|r| r.item_id.clone()).collect();
    let topics: Vec<String> = first.iter().map(|r| r.topic.clone()).collect();
    let mut columns = vec![Vec::with_capacity(students.len()); item_ids.len()];
    for s in &students {
        let recs = baseline.items(s, &baseline_test.test_id).expect("checked above");
        if recs.len() != item_ids.len() || recs.iter().zip(&item_ids).any(|(r, id)| &r.item_id != id) {
            return Err(Error::InvalidInput(format!("student {s} has a different item layout")));
        }
        for (col, r) in columns.iter_mut().zip(recs) {
            col.push(f64::from(r.score));
        }
    }
    Ok(DesignMatrix {
        cohort_id: clustering.cohort_id.clone(),
        baseline_test: baseline_test.test_id.clone(),
        positive: positive.clone(),
        negative: negative.clone(),
        students,
        target,
        item_ids,
        topics,
        columns,
        removal_log: Vec::new(),
        missing_baseline: missing,
    })
}

fn has_variance(col: &[f64]) -> bool {
    col.iter().any(|&v| v != col[0])
}

/// Drop zero-variance columns, exact duplicates (keeping the earliest), then
/// repeatedly the column with the largest VIF above `threshold`. Equal VIFs
/// drop the later column.
pub fn reduce_variables(design: &DesignMatrix, threshold: f64) -> Result<DesignMatrix> {
    if !(threshold >= 1.0) {
        return Err(Error::InvalidInput(format!("VIF threshold {threshold} must be >= 1")));
    }
    let mut d = design.clone();

    let mut j = 0;
    while j < d.columns.len() {
        if has_variance(&d.columns[j]) {
            j += 1;
        } else {
            let id = d.item_ids[j].clone();
            d.drop_column(j, Removal { item_id: id, reason: RemovalReason::ZeroVariance, vif: None, duplicate_of: None });
        }
    }

    let mut j = 1;
    while j < d.columns.len() {
        let dup = (0..j).find(|&i| {
            pearson(&d.columns[i], &d.columns[j])
                .map(|c| c.r.abs() >= 1.0 - 1e-12)
                .unwrap_or(false)
        });
        match dup {
            Some(i) => {
                let (id, of) = (d.item_ids[j].clone(), d.item_ids[i].clone());
                d.drop_column(j, Removal { item_id: id, reason: RemovalReason::Collinear, vif: None, duplicate_of: Some(of) });
            }
            None => j += 1,
        }
    }

    while d.columns.len() >= 2 {
        let v = vif(&d.columns)?;
        let mut worst = 0;
        for (i, &x) in v.iter().enumerate() {
            if x >= v[worst] {
                worst = i;
            }
        }
        if v[worst] <= threshold {
            break;
        }
        let id = d.item_ids[worst].clone();
        let value = v[worst].is_finite().then_some(v[worst]);
        d.drop_column(worst, Removal { item_id: id, reason: RemovalReason::Vif, vif: value, duplicate_of: None });
    }

    if d.columns.is_empty() {
        return Err(Error::Degenerate(format!(
            "no baseline item of {} survives variable reduction",
            d.baseline_test
        )));
    }
    Ok(d)
}
