//! Trajectory clustering: shape-and-value trend vectors, k-means, archetype
//! labels and cross-cohort consistency.

mod ari;
mod kmeans;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ari::adjusted_rand_index;
pub use kmeans::{kmeans, kmeans_restarts, KMeansFit, KMeansParams};

use crate::data_model::{ScoreKind, ScorePanel, TestKey};
use crate::error::{Error, Result};
use crate::screening::csv_field;
use crate::stats::deviation_values;

/// Scale of the level components of a trend vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelScale {
    /// Per-test deviation scores (mean 50, SD 10).
    #[default]
    Deviation,
    /// Raw correct-answer ratios.
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendVector {
    pub student_id: String,
    /// One level per retained test, chronological.
    pub levels: Vec<f64>,
    /// All later-minus-earlier differences, see [`diff_pairs`].
    pub diffs: Vec<f64>,
}

impl TrendVector {
    pub fn from_levels(student_id: impl Into<String>, levels: Vec<f64>) -> Self {
        let diffs = diff_pairs(levels.len())
            .into_iter()
            .map(|(later, earlier)| levels[later] - levels[earlier])
            .collect();
        TrendVector { student_id: student_id.into(), levels, diffs }
    }

    pub fn features(&self) -> Vec<f64> {
        self.levels.iter().chain(&self.diffs).copied().collect()
    }
}

/// Index pairs `(later, earlier)` of the difference block: later index
/// descending, then earlier index ascending. For three tests this is
/// `(2,0), (2,1), (1,0)`.
pub fn diff_pairs(m: usize) -> Vec<(usize, usize)> {
    (1..m)
        .rev()
        .flat_map(|later| (0..later).map(move |earlier| (later, earlier)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendOptions {
    pub scale: LevelScale,
    pub score_kind: ScoreKind,
    pub allow_degenerate: bool,
}

impl Default for TrendOptions {
    fn default() -> Self {
        TrendOptions {
            scale: LevelScale::Deviation,
            score_kind: ScoreKind::CorrectRatio,
            allow_degenerate: false,
        }
    }
}

/// One trend vector per panel student over the `retained` tests.
pub fn build_trend_vectors(
    panel: &ScorePanel,
    retained: &[TestKey],
    opts: &TrendOptions,
) -> Result<Vec<TrendVector>> {
    if retained.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "trend vectors need at least 2 tests, got {}",
            retained.len()
        )));
    }
    let mut per_test = Vec::with_capacity(retained.len());
    for t in retained {
        if panel.test(&t.test_id).is_none() {
            return Err(Error::InvalidInput(format!(
                "test {} is not part of panel {}",
                t.test_id, panel.cohort_id
            )));
        }
        let raw = panel.scores(&t.test_id, opts.score_kind)?;
        let levels = match opts.scale {
            LevelScale::Ratio => raw,
            LevelScale::Deviation => {
                deviation_values(&raw, opts.allow_degenerate)
                    .map_err(|e| match e {
                        Error::Degenerate(_) => Error::Degenerate(format!(
                            "test {}: all students scored the same",
                            t.test_id
                        )),
                        other => other,
                    })?
                    .0
            }
        };
        per_test.push(levels);
    }
    Ok(panel
        .students
        .iter()
        .enumerate()
        .map(|(i, s)| TrendVector::from_levels(s.clone(), per_test.iter().map(|l| l[i]).collect()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchetypeLabel {
    StayHighStably,
    StayLowStably,
    IncreaseFromLow,
    DecreaseFromHigh,
    Other(usize),
}

impl ArchetypeLabel {
    pub const NAMED: [ArchetypeLabel; 4] = [
        ArchetypeLabel::StayHighStably,
        ArchetypeLabel::StayLowStably,
        ArchetypeLabel::IncreaseFromLow,
        ArchetypeLabel::DecreaseFromHigh,
    ];

    pub fn is_named(&self) -> bool {
        !matches!(self, ArchetypeLabel::Other(_))
    }

    /// Display name, e.g. "stay high stably".
    pub fn human(&self) -> String {
        match self {
            ArchetypeLabel::Other(i) => format!("other {i}"),
            named => named.to_string().replace('_', " "),
        }
    }

    /// Label from the start and end levels of a deviation-score trajectory.
    pub fn from_levels(start: f64, end: f64) -> Self {
        match (start >= 50.0, end >= 50.0) {
            (true, true) => ArchetypeLabel::StayHighStably,
            (false, false) => ArchetypeLabel::StayLowStably,
            (false, true) => ArchetypeLabel::IncreaseFromLow,
            (true, false) => ArchetypeLabel::DecreaseFromHigh,
        }
    }
}

impl fmt::Display for ArchetypeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArchetypeLabel::StayHighStably => f.write_str("stay_high_stably"),
            ArchetypeLabel::StayLowStably => f.write_str("stay_low_stably"),
            ArchetypeLabel::IncreaseFromLow => f.write_str("increase_from_low"),
            ArchetypeLabel::DecreaseFromHigh => f.write_str("decrease_from_high"),
            ArchetypeLabel::Other(i) => write!(f, "other_{i}"),
        }
    }
}

impl FromStr for ArchetypeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Ok(match norm.as_str() {
            "stay_high_stably" => ArchetypeLabel::StayHighStably,
            "stay_low_stably" => ArchetypeLabel::StayLowStably,
            "increase_from_low" => ArchetypeLabel::IncreaseFromLow,
            "decrease_from_high" => ArchetypeLabel::DecreaseFromHigh,
            other => match other.strip_prefix("other_").and_then(|i| i.parse().ok()) {
                Some(i) => ArchetypeLabel::Other(i),
                None => return Err(Error::InvalidInput(format!("unknown archetype label `{s}`"))),
            },
        })
    }
}

impl Serialize for ArchetypeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ArchetypeLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Labels for each centroid. Only deviation-score levels carry the midpoint
/// 50 that the archetype rule needs; other scales get `Other(index)`.
pub fn label_clusters(centroids: &[Vec<f64>], m: usize, scale: LevelScale) -> Vec<ArchetypeLabel> {
    centroids
        .iter()
        .enumerate()
        .map(|(i, c)| match scale {
            LevelScale::Deviation if m >= 1 && c.len() >= m => {
                ArchetypeLabel::from_levels(c[0], c[m - 1])
            }
            _ => ArchetypeLabel::Other(i),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub cohort_id: String,
    pub k: usize,
    pub scale: LevelScale,
    /// Retained tests the vectors were built on.
    pub tests: Vec<TestKey>,
    pub centroids: Vec<Vec<f64>>,
    pub assignment: BTreeMap<String, usize>,
    pub labels: Vec<ArchetypeLabel>,
    pub inertia: f64,
    pub seed: u64,
    pub iterations: usize,
}

impl Clustering {
    pub fn m(&self) -> usize {
        self.tests.len()
    }

    pub fn label_of(&self, student: &str) -> Option<&ArchetypeLabel> {
        self.assignment.get(student).map(|&c| &self.labels[c])
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in self.assignment.values() {
            sizes[c] += 1;
        }
        sizes
    }

    /// Students carrying `label`, sorted.
    pub fn students_with(&self, label: &ArchetypeLabel) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &c)| &self.labels[c] == label)
            .map(|(s, _)| s.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams { k: 4, seed: 0, restarts: 10, max_iter: 300, tol: 1e-6 }
    }
}

/// Cluster trend vectors and label the clusters.
pub fn cluster_trends(
    cohort_id: &str,
    tests: &[TestKey],
    vectors: &[TrendVector],
    scale: LevelScale,
    params: &ClusterParams,
) -> Result<Clustering> {
    if vectors.iter().any(|v| v.levels.len() != tests.len()) {
        return Err(Error::InvalidInput("trend vectors do not match the test list".into()));
    }
    let data: Vec<Vec<f64>> = vectors.iter().map(TrendVector::features).collect();
    let fit = kmeans_restarts(
        &data,
        &KMeansParams { k: params.k, seed: params.seed, max_iter: params.max_iter, tol: params.tol },
        params.restarts,
    )?;
    let labels = label_clusters(&fit.centroids, tests.len(), scale);
    Ok(Clustering {
        cohort_id: cohort_id.to_string(),
        k: params.k,
        scale,
        tests: tests.to_vec(),
        assignment: vectors
            .iter()
            .zip(&fit.assignment)
            .map(|(v, &c)| (v.student_id.clone(), c))
            .collect(),
        centroids: fit.centroids,
        labels,
        inertia: fit.inertia,
        seed: fit.seed,
        iterations: fit.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPair {
    pub label: ArchetypeLabel,
    pub a_index: usize,
    pub b_index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub cohorts: [String; 2],
    pub verdict: Verdict,
    /// Sorted label multisets, one per cohort.
    pub label_multisets: [Vec<ArchetypeLabel>; 2],
    pub pairing: Vec<ClusterPair>,
}

/// Compare two clusterings by their label multisets. Unlabelled (`Other`)
/// clusters have no cross-cohort meaning, so any of them makes the verdict
/// inconsistent.
pub fn match_clusterings(a: &Clustering, b: &Clustering) -> Result<ConsistencyReport> {
    let dim = |c: &Clustering| c.centroids.first().map(Vec::len).unwrap_or(0);
    if dim(a) != dim(b) {
        return Err(Error::InvalidInput(format!(
            "centroid dimensions differ: {} vs {}",
            dim(a),
            dim(b)
        )));
    }
    let mut la = a.labels.clone();
    let mut lb = b.labels.clone();
    la.sort();
    lb.sort();
    let all_named = la.iter().chain(&lb).all(ArchetypeLabel::is_named);
    let verdict = if all_named && la == lb { Verdict::Consistent } else { Verdict::Inconsistent };

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, l) in a.labels.iter().enumerate() {
        for (j, m) in b.labels.iter().enumerate() {
            if l == m && l.is_named() {
                let d = kmeans::sq_dist(&a.centroids[i], &b.centroids[j]).sqrt();
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.labels.len()];
    let mut used_b = vec![false; b.labels.len()];
    let mut pairing = Vec::new();
    for (d, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairing.push(ClusterPair { label: a.labels[i].clone(), a_index: i, b_index: j, distance: d });
        }
    }
    pairing.sort_by_key(|p| p.a_index);

    Ok(ConsistencyReport {
        cohorts: [a.cohort_id.clone(), b.cohort_id.clone()],
        verdict,
        label_multisets: [la, lb],
        pairing,
    })
}

/// `clusters.csv`: student_id, cluster_index, label.
pub fn clusters_csv(c: &Clustering) -> String {
    let mut out = String::from("student_id,cluster_index,label\n");
    for (s, &idx) in &c.assignment {
        out.push_str(&format!("{},{idx},{}\n", csv_field(s), c.labels[idx]));
    }
    out
}

/// Parse `clusters.csv` back into (student → cluster index, cluster labels).
pub fn parse_clusters_csv(text: &str) -> Result<(BTreeMap<String, usize>, BTreeMap<usize, ArchetypeLabel>)> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut assignment = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(Error::Parse { line, msg: "expected 3 columns".into() });
        }
        let idx: usize = rec[1]
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad cluster index `{}`", &rec[1]) })?;
        let label: ArchetypeLabel = rec[2].parse()?;
        if let Some(prev) = labels.insert(idx, label.clone()) {
            if prev != label {
                return Err(Error::Parse { line, msg: format!("cluster {idx} has two labels") });
            }
        }
        assignment.insert(rec[0].to_string(), idx);
    }
    Ok((assignment, labels))
}

/// `centroids.csv`: cluster_index, label, n_students, then level and
/// difference components named after the test ids.
pub fn centroids_csv(c: &Clustering) -> String {
    let mut out = String::from("cluster_index,label,n_students");
    for t in &c.tests {
        out.push(',');
        out.push_str(&csv_field(&format!("level_{}", t.test_id)));
    }
    for (later, earlier) in diff_pairs(c.m()) {
        out.push(',');
        out.push_str(&csv_field(&format!(
            "diff_{}_minus_{}",
            c.tests[later].test_id, c.tests[earlier].test_id
        )));
    }
    out.push('\n');
    let sizes = c.cluster_sizes();
    for (i, centroid) in c.centroids.iter().enumerate() {
        out.push_str(&format!("{i},{},{}", c.labels[i], sizes[i]));
        for v in centroid {
            out.push_str(&format!(",{v:.6}"));
        }
        out.push('\n');
    }
    out
}

/// Polyline chart of centroid levels across the retained tests.
pub fn centroid_svg(c: &Clustering) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 180.0;
    const TOP: f64 = 30.0;
    const BOTTOM: f64 = 50.0;
    const COLORS: [&str; 8] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    ];

    let m = c.m();
    let levels: Vec<&[f64]> = c.centroids.iter().map(|v| &v[..m]).collect();
    let mut lo = levels.iter().flat_map(|l| l.iter()).copied().fold(f64::INFINITY, f64::min);
    let mut hi = levels.iter().flat_map(|l| l.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    if c.scale == LevelScale::Deviation {
        lo = lo.min(50.0);
        hi = hi.max(50.0);
    }
    let pad = ((hi - lo) * 0.1).max(1e-6);
    lo -= pad;
    hi += pad;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let x = |i: usize| LEFT + if m > 1 { plot_w * i as f64 / (m - 1) as f64 } else { plot_w / 2.0 };
    let y = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"18\" font-size=\"14\" text-anchor=\"middle\">Centroid trajectories ({})</text>\n",
        LEFT + plot_w / 2.0,
        xml_escape(&c.cohort_id)
    ));
    s.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    ));
    s.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + plot_h
    ));
    for tick in 0..=4 {
        let v = lo + (hi - lo) * tick as f64 / 4.0;
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{v:.2}</text>\n",
            LEFT - 6.0,
            y(v) + 3.0
        ));
    }
    for (i, t) in c.tests.iter().enumerate() {
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
            x(i),
            TOP + plot_h + 18.0,
            xml_escape(&t.label())
        ));
    }
    if c.scale == LevelScale::Deviation {
        s.push_str(&format!(
            "<line x1=\"{LEFT}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n",
            y(50.0),
            LEFT + plot_w
        ));
    }
    let sizes = c.cluster_sizes();
    for (ci, lv) in levels.iter().enumerate() {
        let color = COLORS[ci % COLORS.len()];
        let pts: Vec<String> = lv.iter().enumerate().map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v))).collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        let ly = TOP + 16.0 * ci as f64 + 8.0;
        s.push_str(&format!(
            "<line x1=\"{0:.2}\" y1=\"{ly:.2}\" x2=\"{1:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            W - RIGHT + 10.0,
            W - RIGHT + 30.0
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{} (n={})</text>\n",
            W - RIGHT + 36.0,
            ly + 4.0,
            xml_escape(&c.labels[ci].human()),
            sizes[ci]
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::Subject;

    #[test]
    fn eq2_layout() {
        let v = TrendVector::from_levels("s", vec![50.0, 55.0, 60.0]);
        assert_eq!(v.features(), vec![50.0, 55.0, 60.0, 10.0, 5.0, 5.0]);
    }

    #[test]
    fn five_tests_give_fifteen_dims() {
        let v = TrendVector::from_levels("s", vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(v.features().len(), 15);
        // later index descending, earlier ascending
        assert_eq!(
            diff_pairs(5),
            vec![(4, 0), (4, 1), (4, 2), (4, 3), (3, 0), (3, 1), (3, 2), (2, 0), (2, 1), (1, 0)]
        );
    }

    #[test]
    fn constant_levels_zero_diffs() {
        let v = TrendVector::from_levels("s", vec![50.0; 3]);
        assert!(v.diffs.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn labelling_rule() {
        assert_eq!(ArchetypeLabel::from_levels(57.93, 60.33), ArchetypeLabel::StayHighStably);
        assert_eq!(ArchetypeLabel::from_levels(44.41, 52.70), ArchetypeLabel::IncreaseFromLow);
        assert_eq!(ArchetypeLabel::from_levels(50.0, 50.0), ArchetypeLabel::StayHighStably);
        let c = vec![vec![50.0, 49.0, 50.0]];
        assert_eq!(label_clusters(&c, 3, LevelScale::Deviation), vec![ArchetypeLabel::StayHighStably]);
        assert_eq!(label_clusters(&c, 3, LevelScale::Ratio), vec![ArchetypeLabel::Other(0)]);
    }

    #[test]
    fn label_round_trip() {
        for l in ArchetypeLabel::NAMED.iter().cloned().chain([ArchetypeLabel::Other(3)]) {
            assert_eq!(l.to_string().parse::<ArchetypeLabel>().unwrap(), l);
        }
        assert_eq!("stay high stably".parse::<ArchetypeLabel>().unwrap(), ArchetypeLabel::StayHighStably);
        assert!("sideways".parse::<ArchetypeLabel>().is_err());
    }

    fn clustering(labels: Vec<ArchetypeLabel>, shift: f64) -> Clustering {
        let tests: Vec<TestKey> = (0..3)
            .map(|i| TestKey {
                test_id: format!("t{i}"),
                organization: "A".into(),
                subject: Subject::Mathematics,
                grade: 5 + i,
                variant: None,
                year: 2014 + i as i32,
                order_index: i,
            })
            .collect();
        let centroids = (0..labels.len())
            .map(|i| TrendVector::from_levels("c", vec![40.0 + 5.0 * i as f64 + shift; 3]).features())
            .collect();
        Clustering {
            cohort_id: format!("c{shift}"),
            k: labels.len(),
            scale: LevelScale::Deviation,
            tests,
            centroids,
            assignment: BTreeMap::new(),
            labels,
            inertia: 0.0,
            seed: 0,
            iterations: 1,
        }
    }

    #[test]
    fn matching_verdicts() {
        use ArchetypeLabel::*;
        let four = vec![StayHighStably, StayLowStably, IncreaseFromLow, DecreaseFromHigh];
        let a = clustering(four.clone(), 0.0);
        let mut rev = four.clone();
        rev.reverse();
        let b = clustering(rev, 1.0);
        let r = match_clusterings(&a, &b).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        assert_eq!(r.pairing.len(), 4);

        let same = match_clusterings(&a, &a).unwrap();
        assert!(same.pairing.iter().all(|p| p.distance == 0.0 && p.a_index == p.b_index));

        let c = clustering(vec![StayHighStably, StayHighStably, StayLowStably, StayLowStably], 0.0);
        assert_eq!(match_clusterings(&a, &c).unwrap().verdict, Verdict::Inconsistent);

        let o = clustering(vec![Other(0), Other(1), Other(2), Other(3)], 0.0);
        assert_eq!(match_clusterings(&o, &o).unwrap().verdict, Verdict::Inconsistent);
    }

    #[test]
    fn clusters_csv_round_trip() {
        let mut c = clustering(vec![ArchetypeLabel::StayHighStably, ArchetypeLabel::Other(1)], 0.0);
        c.assignment.insert("s1".into(), 0);
        c.assignment.insert("s2".into(), 1);
        let (assign, labels) = parse_clusters_csv(&clusters_csv(&c)).unwrap();
        assert_eq!(assign, c.assignment);
        assert_eq!(labels[&1], ArchetypeLabel::Other(1));
    }
}
