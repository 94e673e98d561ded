//! Score tables, test manifests and longitudinal panels.
//!
//! Two CSV files describe a cohort. The manifest lists every test with its
//! metadata and item catalogue:
//!
//! ```text
//! test_id,organization,subject,grade,variant,year,order_index,item_id,topic
//! ```
//!
//! The score table is long format, one binary item response per row:
//!
//! ```text
//! cohort_id,student_id,test_id,item_id,score
//! ```
//!
//! `test_id` is an opaque join key between the two. Students that lack any
//! test of the panel (or any item of a test) are dropped with a warning.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SCORE_HEADER: [&str; 5] = ["cohort_id", "student_id", "test_id", "item_id", "score"];
const MANIFEST_HEADER: [&str; 9] = [
    "test_id",
    "organization",
    "subject",
    "grade",
    "variant",
    "year",
    "order_index",
    "item_id",
    "topic",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Subject {
    NationalLanguage,
    Mathematics,
    Other(String),
}

impl Subject {
    pub fn as_str(&self) -> &str {
        match self {
            Subject::NationalLanguage => "national_language",
            Subject::Mathematics => "mathematics",
            Subject::Other(s) => s,
        }
    }

    pub fn abbreviation(&self) -> &str {
        match self {
            Subject::NationalLanguage => "NL.",
            Subject::Mathematics => "M.",
            Subject::Other(s) => s,
        }
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subject {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "" => Err(Error::InvalidInput("empty subject".into())),
            "national_language" => Ok(Subject::NationalLanguage),
            "mathematics" => Ok(Subject::Mathematics),
            other => Ok(Subject::Other(other.to_string())),
        }
    }
}

impl From<Subject> for String {
    fn from(s: Subject) -> String {
        s.as_str().to_string()
    }
}

impl TryFrom<String> for Subject {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Identity and chronology of one achievement test.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestKey {
    pub test_id: String,
    pub organization: String,
    pub subject: Subject,
    pub grade: u32,
    pub variant: Option<String>,
    pub year: i32,
    pub order_index: u32,
}

/// Year-independent identity used to match the same grade-test across cohorts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TestIdentity {
    pub organization: String,
    pub subject: Subject,
    pub grade: u32,
    pub variant: Option<String>,
}

impl TestKey {
    pub fn identity(&self) -> TestIdentity {
        TestIdentity {
            organization: self.organization.clone(),
            subject: self.subject.clone(),
            grade: self.grade,
            variant: self.variant.clone(),
        }
    }

    /// True when both keys name the same grade-test, ignoring calendar year.
    pub fn same_test(&self, other: &TestKey) -> bool {
        self.organization == other.organization
            && self.subject == other.subject
            && self.grade == other.grade
            && self.variant == other.variant
    }

    /// Human-readable label such as `[Org. A] 5 M.` or `[Org. B] 6 NL. A`.
    pub fn label(&self) -> String {
        let mut s = format!(
            "[Org. {}] {} {}",
            self.organization,
            self.grade,
            self.subject.abbreviation()
        );
        if let Some(v) = &self.variant {
            s.push(' ');
            s.push_str(v);
        }
        s
    }
}

impl PartialOrd for TestKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TestKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_index
            .cmp(&other.order_index)
            .then_with(|| self.test_id.cmp(&other.test_id))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub item_id: String,
    pub topic: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub key: TestKey,
    pub items: Vec<ManifestItem>,
}

/// Item catalogue for a set of tests, keyed by `test_id`. Items keep file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: impl IntoIterator<Item = ManifestEntry>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for e in entries {
            if e.items.is_empty() {
                return Err(Error::Manifest(format!("test {} lists no items", e.key.test_id)));
            }
            let mut seen = BTreeSet::new();
            for it in &e.items {
                if it.topic.is_empty() {
                    return Err(Error::Manifest(format!(
                        "empty topic for test {} item {}",
                        e.key.test_id, it.item_id
                    )));
                }
                if !seen.insert(it.item_id.as_str()) {
                    return Err(Error::Manifest(format!(
                        "duplicate item {} in test {}",
                        it.item_id, e.key.test_id
                    )));
                }
            }
            if map.insert(e.key.test_id.clone(), e).is_some() {
                return Err(Error::Manifest("duplicate test entry".into()));
            }
        }
        Ok(Manifest { entries: map })
    }

    pub fn get(&self, test_id: &str) -> Option<&ManifestEntry> {
        self.entries.get(test_id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn topic(&self, test_id: &str, item_id: &str) -> Option<&str> {
        self.get(test_id)?
            .items
            .iter()
            .find(|it| it.item_id == item_id)
            .map(|it| it.topic.as_str())
    }

    /// Find the test matching `identity` (year ignored) among tests of this manifest.
    pub fn find_identity(&self, identity: &TestIdentity) -> Vec<&TestKey> {
        let mut found: Vec<&TestKey> = self
            .entries
            .values()
            .map(|e| &e.key)
            .filter(|k| k.identity() == *identity)
            .collect();
        found.sort();
        found
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(MANIFEST_HEADER)?;
        let mut entries: Vec<&ManifestEntry> = self.entries.values().collect();
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        for e in entries {
            let k = &e.key;
            for it in &e.items {
                w.write_record([
                    k.test_id.as_str(),
                    k.organization.as_str(),
                    k.subject.as_str(),
                    &k.grade.to_string(),
                    k.variant.as_deref().unwrap_or(""),
                    &k.year.to_string(),
                    &k.order_index.to_string(),
                    it.item_id.as_str(),
                    it.topic.as_str(),
                ])?;
            }
        }
        into_string(w)
    }
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv writer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(bytes)
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?.clone();
    let got: Vec<&str> = header.iter().map(|h| h.trim_start_matches('\u{feff}').trim()).collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Parse a manifest CSV into per-test item catalogues.
pub fn parse_test_manifest(csv_bytes: &[u8]) -> Result<Manifest> {
    let mut rdr = reader(csv_bytes);
    check_header(&mut rdr, &MANIFEST_HEADER)?;

    let mut order: Vec<String> = Vec::new();
    let mut entries: BTreeMap<String, ManifestEntry> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != MANIFEST_HEADER.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} columns, found {}", MANIFEST_HEADER.len(), rec.len()),
            });
        }
        let field = |i: usize| rec.get(i).unwrap_or("");
        let parse_int = |i: usize| -> Result<i64> {
            field(i).trim().parse::<i64>().map_err(|_| Error::Parse {
                line,
                msg: format!("column {} is not an integer: `{}`", MANIFEST_HEADER[i], field(i)),
            })
        };
        let test_id = field(0).trim().to_string();
        if test_id.is_empty() {
            return Err(Error::Parse { line, msg: "empty test_id".into() });
        }
        let grade = parse_int(3)?;
        let year = parse_int(5)?;
        let order_index = parse_int(6)?;
        if grade < 0 || order_index < 0 {
            return Err(Error::Parse { line, msg: "grade and order_index must be non-negative".into() });
        }
        let variant = match field(4).trim() {
            "" => None,
            v => Some(v.to_string()),
        };
        let subject: Subject = field(2).parse().map_err(|_| Error::Parse {
            line,
            msg: "empty subject".into(),
        })?;
        let key = TestKey {
            test_id: test_id.clone(),
            organization: field(1).trim().to_string(),
            subject,
            grade: grade as u32,
            variant,
            year: year as i32,
            order_index: order_index as u32,
        };
        let item_id = field(7).trim().to_string();
        if item_id.is_empty() {
            return Err(Error::Parse { line, msg: "empty item_id".into() });
        }
        // Topics are kept byte-for-byte; factor matching relies on exact equality.
        let topic = field(8).to_string();
        if topic.trim().is_empty() {
            return Err(Error::Manifest(format!(
                "line {line}: empty topic for test {test_id} item {item_id}"
            )));
        }
        let entry = entries.entry(test_id.clone()).or_insert_with(|| {
            order.push(test_id.clone());
            ManifestEntry { key: key.clone(), items: Vec::new() }
        });
        if entry.key != key {
            return Err(Error::Manifest(format!(
                "line {line}: metadata for test {test_id} disagrees with an earlier row"
            )));
        }
        if entry.items.iter().any(|it| it.item_id == item_id) {
            return Err(Error::Manifest(format!(
                "line {line}: duplicate item {item_id} in test {test_id}"
            )));
        }
        entry.items.push(ManifestItem { item_id, topic });
    }
    Manifest::new(order.into_iter().filter_map(|id| entries.remove(&id)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub item_id: String,
    pub topic: String,
    pub score: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub total_points: Option<f64>,
    pub correct_ratio: f64,
}

/// Which per-test aggregate feeds correlations and trend levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    #[default]
    CorrectRatio,
    TotalPoints,
}

/// A complete students × tests panel for one cohort and subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePanel {
    pub cohort_id: String,
    pub subject: Subject,
    /// Chronological (by `order_index`).
    pub tests: Vec<TestKey>,
    /// Sorted student ids.
    pub students: Vec<String>,
    /// Keyed by (student_id, test_id); items in manifest order.
    pub item_scores: BTreeMap<(String, String), Vec<ItemRecord>>,
    pub aggregate: BTreeMap<(String, String), Aggregate>,
    pub warnings: Vec<String>,
}

impl ScorePanel {
    pub fn test(&self, test_id: &str) -> Option<&TestKey> {
        self.tests.iter().find(|t| t.test_id == test_id)
    }

    /// Aggregate score of every student (in `students` order) on one test.
    pub fn scores(&self, test_id: &str, kind: ScoreKind) -> Result<Vec<f64>> {
        self.students
            .iter()
            .map(|s| {
                let agg = self
                    .aggregate
                    .get(&(s.clone(), test_id.to_string()))
                    .ok_or_else(|| Error::InvalidInput(format!("no score for {s} on {test_id}")))?;
                match kind {
                    ScoreKind::CorrectRatio => Ok(agg.correct_ratio),
                    ScoreKind::TotalPoints => agg.total_points.ok_or_else(|| {
                        Error::InvalidInput(format!("total points unavailable for test {test_id}"))
                    }),
                }
            })
            .collect()
    }

    pub fn items(&self, student_id: &str, test_id: &str) -> Option<&[ItemRecord]> {
        self.item_scores
            .get(&(student_id.to_string(), test_id.to_string()))
            .map(Vec::as_slice)
    }

    /// Serialize back to the long-format score CSV.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SCORE_HEADER)?;
        write_rows(&mut w, self)?;
        into_string(w)
    }
}

fn write_rows(w: &mut csv::Writer<Vec<u8>>, panel: &ScorePanel) -> Result<()> {
    for s in &panel.students {
        for t in &panel.tests {
            if let Some(items) = panel.items(s, &t.test_id) {
                for it in items {
                    w.write_record([
                        panel.cohort_id.as_str(),
                        s.as_str(),
                        t.test_id.as_str(),
                        it.item_id.as_str(),
                        if it.score == 1 { "1" } else { "0" },
                    ])?;
                }
            }
        }
    }
    Ok(())
}

/// Serialize several panels of one cohort (e.g. two subjects) into one score CSV.
pub fn panels_to_csv(panels: &[&ScorePanel]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCORE_HEADER)?;
    for p in panels {
        write_rows(&mut w, p)?;
    }
    into_string(w)
}

/// Parse a single-subject score table. Use [`parse_score_tables`] when the
/// file mixes subjects.
pub fn parse_score_table(csv_bytes: &[u8], manifest: &Manifest) -> Result<ScorePanel> {
    let mut panels = parse_score_tables(csv_bytes, manifest)?;
    match panels.len() {
        1 => Ok(panels.pop().expect("one panel")),
        _ => Err(Error::InvalidInput(format!(
            "score table mixes {} subjects; parse with parse_score_tables",
            panels.len()
        ))),
    }
}

/// Parse a score table into one complete panel per subject.
pub fn parse_score_tables(csv_bytes: &[u8], manifest: &Manifest) -> Result<Vec<ScorePanel>> {
    let mut rdr = reader(csv_bytes);
    check_header(&mut rdr, &SCORE_HEADER)?;

    let mut cohort: Option<String> = None;
    // (student, test) -> item -> score
    let mut raw: BTreeMap<(String, String), BTreeMap<String, u8>> = BTreeMap::new();
    let mut tests_seen: BTreeSet<String> = BTreeSet::new();
    let mut students: BTreeSet<String> = BTreeSet::new();

    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != SCORE_HEADER.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} columns, found {}", SCORE_HEADER.len(), rec.len()),
            });
        }
        let cohort_id = rec[0].trim();
        let student_id = rec[1].trim();
        let test_id = rec[2].trim();
        let item_id = rec[3].trim();
        let score: u8 = match rec[4].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("score must be 0 or 1, found `{other}`"),
                })
            }
        };
        if student_id.is_empty() {
            return Err(Error::Parse { line, msg: "empty student_id".into() });
        }
        match &cohort {
            None => cohort = Some(cohort_id.to_string()),
            Some(c) if c != cohort_id => {
                return Err(Error::Parse {
                    line,
                    msg: format!("score table mixes cohorts `{c}` and `{cohort_id}`"),
                })
            }
            Some(_) => {}
        }
        let entry = manifest.get(test_id).ok_or_else(|| {
            Error::ManifestMismatch(format!("line {line}: unknown test_id `{test_id}`"))
        })?;
        if !entry.items.iter().any(|it| it.item_id == item_id) {
            return Err(Error::ManifestMismatch(format!(
                "line {line}: item `{item_id}` is not listed for test `{test_id}`"
            )));
        }
        let cell = raw
            .entry((student_id.to_string(), test_id.to_string()))
            .or_default();
        if cell.insert(item_id.to_string(), score).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate response for {student_id}/{test_id}/{item_id}"),
            });
        }
        tests_seen.insert(test_id.to_string());
        students.insert(student_id.to_string());
    }

    let cohort_id = cohort.ok_or_else(|| Error::EmptyPanel("score table has no rows".into()))?;

    let mut by_subject: BTreeMap<Subject, Vec<TestKey>> = BTreeMap::new();
    for t in &tests_seen {
        let key = manifest.get(t).expect("checked above").key.clone();
        by_subject.entry(key.subject.clone()).or_default().push(key);
    }

    let mut panels = Vec::with_capacity(by_subject.len());
    for (subject, mut tests) in by_subject {
        tests.sort();
        validate_chronology(&cohort_id, &tests)?;

        let mut warnings = Vec::new();
        let mut kept = Vec::new();
        for s in &students {
            let missing: Vec<&str> = tests
                .iter()
                .filter(|t| {
                    let items = &manifest.get(&t.test_id).expect("known").items;
                    match raw.get(&(s.clone(), t.test_id.clone())) {
                        None => true,
                        Some(cell) => items.iter().any(|it| !cell.contains_key(&it.item_id)),
                    }
                })
                .map(|t| t.test_id.as_str())
                .collect();
            if missing.is_empty() {
                kept.push(s.clone());
            } else {
                warnings.push(format!(
                    "student {s} excluded from {subject} panel: incomplete {}",
                    missing.join(", ")
                ));
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyPanel(format!(
                "no student of cohort {cohort_id} has every {subject} test"
            )));
        }

        let mut item_scores = BTreeMap::new();
        let mut aggregate = BTreeMap::new();
        for s in &kept {
            for t in &tests {
                let entry = manifest.get(&t.test_id).expect("known");
                let cell = &raw[&(s.clone(), t.test_id.clone())];
                let records: Vec<ItemRecord> = entry
                    .items
                    .iter()
                    .map(|it| ItemRecord {
                        item_id: it.item_id.clone(),
                        topic: it.topic.clone(),
                        score: cell[&it.item_id],
                    })
                    .collect();
                let correct: u32 = records.iter().map(|r| r.score as u32).sum();
                let ratio = correct as f64 / records.len() as f64;
                let k = (s.clone(), t.test_id.clone());
                aggregate.insert(
                    k.clone(),
                    Aggregate { total_points: None, correct_ratio: ratio },
                );
                item_scores.insert(k, records);
            }
        }

        panels.push(ScorePanel {
            cohort_id: cohort_id.clone(),
            subject,
            tests,
            students: kept,
            item_scores,
            aggregate,
            warnings,
        });
    }
    Ok(panels)
}

fn validate_chronology(cohort_id: &str, tests: &[TestKey]) -> Result<()> {
    for w in tests.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.order_index == b.order_index {
            return Err(Error::Manifest(format!(
                "cohort {cohort_id}: tests {} and {} share order_index {}",
                a.test_id, b.test_id, a.order_index
            )));
        }
        if b.grade < a.grade || b.year < a.year {
            return Err(Error::Manifest(format!(
                "cohort {cohort_id}: grade/year decrease between {} and {}",
                a.test_id, b.test_id
            )));
        }
    }
    Ok(())
}

/// Tests present in every chain, matched on organization, subject, grade and
/// variant (calendar year ignored). Returns the first chain's keys in
/// chronological order.
pub fn intersect_common_tests(chains: &[&[TestKey]]) -> Result<Vec<TestKey>> {
    if chains.len() < 2 {
        return Err(Error::InvalidInput("need at least two cohorts to intersect".into()));
    }
    let subject = chains[0].first().map(|t| t.subject.clone());
    for c in chains {
        if c.iter().any(|t| Some(&t.subject) != subject.as_ref()) {
            return Err(Error::InvalidInput("cohort chains mix subjects".into()));
        }
    }
    let mut common: Vec<TestKey> = chains[0]
        .iter()
        .filter(|t| chains[1..].iter().all(|c| c.iter().any(|o| o.same_test(t))))
        .cloned()
        .collect();
    common.sort();
    if common.is_empty() {
        return Err(Error::EmptyIntersection(format!(
            "{} chains share no grade-test",
            chains.len()
        )));
    }
    Ok(common)
}

/// Map tests (by identity) onto the matching keys of another chain.
pub fn resolve_tests(tests: &[TestKey], chain: &[TestKey]) -> Result<Vec<TestKey>> {
    tests
        .iter()
        .map(|t| {
            chain
                .iter()
                .find(|o| o.same_test(t))
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("test {} not found in chain", t.label())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MANIFEST: &str = "\
test_id,organization,subject,grade,variant,year,order_index,item_id,topic
T1,A,mathematics,5,,2014,0,1,add fractions
T1,A,mathematics,5,,2014,0,2,\"read a graph, then answer\"
T2,A,mathematics,7,,2016,1,1,solve equations
T2,A,mathematics,7,,2016,1,2,geometry
";

    fn manifest() -> Manifest {
        parse_test_manifest(MANIFEST.as_bytes()).unwrap()
    }

    #[test]
    fn all_correct_panel() {
        let scores = "cohort_id,student_id,test_id,item_id,score\n\
            g1,a,T1,1,1\ng1,a,T1,2,1\ng1,a,T2,1,1\ng1,a,T2,2,1\n\
            g1,b,T1,1,1\ng1,b,T1,2,1\ng1,b,T2,1,1\ng1,b,T2,2,1\n";
        let p = parse_score_table(scores.as_bytes(), &manifest()).unwrap();
        assert_eq!(p.students, vec!["a", "b"]);
        assert_eq!(p.tests.len(), 2);
        assert!(p.aggregate.values().all(|a| a.correct_ratio == 1.0));
        assert!(p.warnings.is_empty());
        assert_eq!(p.item_scores.len(), 4);
    }

    #[test]
    fn incomplete_student_dropped_with_warning() {
        let scores = "cohort_id,student_id,test_id,item_id,score\n\
            g1,a,T1,1,1\ng1,a,T1,2,0\ng1,a,T2,1,1\ng1,a,T2,2,1\n\
            g1,b,T1,1,1\ng1,b,T1,2,1\n";
        let p = parse_score_table(scores.as_bytes(), &manifest()).unwrap();
        assert_eq!(p.students, vec!["a"]);
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.aggregate[&("a".into(), "T1".into())].correct_ratio, 0.5);
    }

    #[test]
    fn partial_items_count_as_missing_test() {
        let scores = "cohort_id,student_id,test_id,item_id,score\n\
            g1,a,T1,1,1\ng1,a,T1,2,0\ng1,a,T2,1,1\ng1,a,T2,2,1\n\
            g1,b,T1,1,1\ng1,b,T1,2,1\ng1,b,T2,1,1\n";
        let p = parse_score_table(scores.as_bytes(), &manifest()).unwrap();
        assert_eq!(p.students, vec!["a"]);
    }

    #[test]
    fn non_binary_score_names_line() {
        let scores = "cohort_id,student_id,test_id,item_id,score\ng1,a,T1,1,1\ng1,a,T1,2,2\n";
        match parse_score_table(scores.as_bytes(), &manifest()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_is_parse_error() {
        let scores = "cohort_id,student_id,test_id,item_id,score\ng1,a,T1,1\n";
        assert!(matches!(
            parse_score_table(scores.as_bytes(), &manifest()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_test_or_item_is_mismatch() {
        let s1 = "cohort_id,student_id,test_id,item_id,score\ng1,a,T9,1,1\n";
        assert!(matches!(
            parse_score_table(s1.as_bytes(), &manifest()),
            Err(Error::ManifestMismatch(_))
        ));
        let s2 = "cohort_id,student_id,test_id,item_id,score\ng1,a,T1,7,1\n";
        assert!(matches!(
            parse_score_table(s2.as_bytes(), &manifest()),
            Err(Error::ManifestMismatch(_))
        ));
    }

    #[test]
    fn nobody_complete_is_empty_panel() {
        let scores = "cohort_id,student_id,test_id,item_id,score\n\
            g1,a,T1,1,1\ng1,a,T1,2,1\ng1,b,T2,1,1\ng1,b,T2,2,1\n";
        assert!(matches!(
            parse_score_table(scores.as_bytes(), &manifest()),
            Err(Error::EmptyPanel(_))
        ));
    }

    #[test]
    fn manifest_keeps_file_order_and_quoted_topics() {
        let m = manifest();
        let t1 = m.get("T1").unwrap();
        assert_eq!(t1.items[0].item_id, "1");
        assert_eq!(t1.items[1].topic, "read a graph, then answer");
        assert_eq!(m.topic("T2", "2"), Some("geometry"));
    }

    #[test]
    fn manifest_item_ids_are_test_scoped() {
        // both tests list item "1"
        assert_eq!(manifest().len(), 2);
    }

    #[test]
    fn manifest_duplicate_item_rejected() {
        let dup = format!("{MANIFEST}T1,A,mathematics,5,,2014,0,2,again\n");
        assert!(matches!(parse_test_manifest(dup.as_bytes()), Err(Error::Manifest(_))));
    }

    #[test]
    fn manifest_empty_topic_rejected() {
        let bad = format!("{MANIFEST}T2,A,mathematics,7,,2016,1,3,\n");
        assert!(matches!(parse_test_manifest(bad.as_bytes()), Err(Error::Manifest(_))));
    }

    #[test]
    fn manifest_28_items_in_order() {
        let mut s = MANIFEST_HEADER.join(",");
        s.push('\n');
        for i in 1..=28 {
            s.push_str(&format!("NL5,A,national_language,5,,2014,0,2014-{i},topic {i}\n"));
        }
        let m = parse_test_manifest(s.as_bytes()).unwrap();
        let items = &m.get("NL5").unwrap().items;
        assert_eq!(items.len(), 28);
        assert_eq!(items[0].item_id, "2014-1");
        assert_eq!(items[27].item_id, "2014-28");
    }

    fn key(id: &str, org: &str, grade: u32, variant: Option<&str>, year: i32, ord: u32) -> TestKey {
        TestKey {
            test_id: id.into(),
            organization: org.into(),
            subject: Subject::NationalLanguage,
            grade,
            variant: variant.map(str::to_string),
            year,
            order_index: ord,
        }
    }

    #[test]
    fn intersection_ignores_year() {
        let g1 = vec![
            key("g1a5", "A", 5, None, 2015, 1),
            key("g1a7", "A", 7, None, 2017, 3),
            key("g1a8", "A", 8, None, 2018, 4),
            key("g1b9", "B", 9, Some("A"), 2019, 5),
        ];
        let g2 = vec![
            key("g2a5", "A", 5, None, 2014, 0),
            key("g2a7", "A", 7, None, 2016, 2),
            key("g2a8", "A", 8, None, 2017, 3),
        ];
        let common = intersect_common_tests(&[&g1, &g2]).unwrap();
        let ids: Vec<&str> = common.iter().map(|t| t.test_id.as_str()).collect();
        assert_eq!(ids, vec!["g1a5", "g1a7", "g1a8"]);
        let mapped = resolve_tests(&common, &g2).unwrap();
        assert_eq!(mapped[2].test_id, "g2a8");
    }

    #[test]
    fn intersection_of_identical_chains_is_full() {
        let g = vec![key("a", "A", 5, None, 2014, 0), key("b", "A", 7, None, 2016, 1)];
        assert_eq!(intersect_common_tests(&[&g, &g]).unwrap(), g);
    }

    #[test]
    fn disjoint_chains_error() {
        let g1 = vec![key("a", "A", 5, None, 2014, 0)];
        let g2 = vec![key("b", "B", 6, None, 2015, 0)];
        assert!(matches!(
            intersect_common_tests(&[&g1, &g2]),
            Err(Error::EmptyIntersection(_))
        ));
    }

    #[test]
    fn label_format() {
        assert_eq!(key("x", "B", 6, Some("A"), 2016, 2).label(), "[Org. B] 6 NL. A");
    }
}
