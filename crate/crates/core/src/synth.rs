//! Synthetic cohorts with planted archetypes, criterion-shifted tests and
//! causal baseline items.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data_model::{
    parse_score_tables, parse_test_manifest, Manifest, ManifestEntry, ManifestItem, ScorePanel, Subject, TestKey,
};
use crate::error::{Error, Result};
use crate::trend::ArchetypeLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalSpec {
    /// 0-based index into the baseline test's items.
    pub item: usize,
    /// Log-odds difference between the rising/high and the falling/low archetypes.
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub cohort_id: String,
    pub n_students: usize,
    pub n_tests: usize,
    pub items_per_test: usize,
    pub archetype_mix: BTreeMap<ArchetypeLabel, f64>,
    /// 0-based test positions whose items follow an unrelated ability.
    pub shift_positions: Vec<usize>,
    pub noise_sd: f64,
    pub causal_items: Vec<CausalSpec>,
    pub baseline_items: usize,
    pub discrimination: f64,
    pub baseline_discrimination: f64,
    pub start_year: i32,
    pub start_grade: u32,
    pub organization: String,
    pub subject: Subject,
    pub baseline_subject: Subject,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            cohort_id: "g1".into(),
            n_students: 200,
            n_tests: 5,
            items_per_test: 40,
            archetype_mix: ArchetypeLabel::NAMED.iter().map(|l| (l.clone(), 0.25)).collect(),
            shift_positions: vec![2],
            noise_sd: 3.0,
            causal_items: vec![CausalSpec { item: 3, effect: 2.5 }, CausalSpec { item: 8, effect: -2.5 }],
            baseline_items: 12,
            discrimination: 2.0,
            baseline_discrimination: 1.0,
            start_year: 2014,
            start_grade: 5,
            organization: "A".into(),
            subject: Subject::Mathematics,
            baseline_subject: Subject::NationalLanguage,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedItem {
    pub test_id: String,
    pub item_id: String,
    pub topic: String,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub cohort_id: String,
    pub seed: u64,
    pub archetype: BTreeMap<String, ArchetypeLabel>,
    pub shifted_tests: Vec<TestKey>,
    pub causal_items: Vec<PlantedItem>,
}

#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub manifest: Manifest,
    /// Trajectory tests.
    pub panel: ScorePanel,
    /// Single baseline test in `baseline_subject`.
    pub baseline: ScorePanel,
    pub baseline_test: TestKey,
    pub truth: GroundTruth,
    pub score_csv: String,
    pub manifest_csv: String,
}

/// Level template on the deviation-score scale at start, middle and end.
pub fn template(label: &ArchetypeLabel) -> Option<[f64; 3]> {
    match label {
        ArchetypeLabel::StayHighStably => Some([58.0, 59.0, 60.0]),
        ArchetypeLabel::StayLowStably => Some([33.0, 35.0, 38.0]),
        ArchetypeLabel::IncreaseFromLow => Some([44.0, 46.0, 53.0]),
        ArchetypeLabel::DecreaseFromHigh => Some([52.0, 51.0, 46.0]),
        ArchetypeLabel::Other(_) => None,
    }
}

/// Template stretched piecewise-linearly over `m` tests.
pub fn template_levels(label: &ArchetypeLabel, m: usize) -> Option<Vec<f64>> {
    let t = template(label)?;
    Some(
        (0..m)
            .map(|i| {
                let x = if m > 1 { 2.0 * i as f64 / (m - 1) as f64 } else { 0.0 };
                let (lo, frac) = if x >= 1.0 { (1, x - 1.0) } else { (0, x) };
                t[lo] + frac * (t[lo + 1] - t[lo])
            })
            .collect(),
    )
}

const BASELINE_TOPICS: [&str; 12] = [
    "listen to the conversation considering the theme",
    "collaborate with others considering their ideas",
    "read a kanji character",
    "write a kanji character",
    "interpret grammar",
    "use a dictionary",
    "read a character's feelings",
    "read the situation of the text",
    "read the text considering the connection between sentences",
    "interpret the information of the text and make a supplementary statement",
    "write a sentence within a word limit",
    "summarize the content of the interview",
];

fn baseline_topic(j: usize) -> String {
    let base = BASELINE_TOPICS[j % BASELINE_TOPICS.len()];
    match j / BASELINE_TOPICS.len() {
        0 => base.to_string(),
        round => format!("{base} ({})", round + 1),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.cohort_id.is_empty() || self.cohort_id.contains(['/', '\\']) {
            return bad(format!("invalid cohort id `{}`", self.cohort_id));
        }
        if self.n_tests < 2 {
            return bad("need at least 2 tests".into());
        }
        if self.items_per_test == 0 || self.baseline_items == 0 {
            return bad("tests need at least one item".into());
        }
        let total: f64 = self.archetype_mix.values().sum();
        if (total - 1.0).abs() > 1e-9 || self.archetype_mix.values().any(|&f| !(f >= 0.0)) {
            return bad(format!("archetype fractions must be non-negative and sum to 1 (got {total})"));
        }
        if self.archetype_mix.keys().any(|l| !l.is_named()) {
            return bad("archetype mix may only use the four named archetypes".into());
        }
        let k = self.archetype_mix.values().filter(|&&f| f > 0.0).count();
        if self.n_students < 4 * k {
            return bad(format!("{} students are too few for {k} archetypes", self.n_students));
        }
        if let Some(&s) = self.shift_positions.iter().find(|&&s| s >= self.n_tests) {
            return bad(format!("shift position {s} is outside 0..{}", self.n_tests));
        }
        if let Some(c) = self.causal_items.iter().find(|c| c.item >= self.baseline_items) {
            return bad(format!("causal item {} is outside the baseline test", c.item));
        }
        if !(self.noise_sd >= 0.0) || !self.discrimination.is_finite() || !self.baseline_discrimination.is_finite() {
            return bad("noise_sd and discriminations must be finite, noise_sd >= 0".into());
        }
        if self.subject == self.baseline_subject {
            return bad("baseline subject must differ from the trajectory subject".into());
        }
        Ok(())
    }

    /// Largest-remainder student counts per archetype.
    pub fn archetype_counts(&self) -> Result<Vec<(ArchetypeLabel, usize)>> {
        let n = self.n_students as f64;
        let mut counts: Vec<(ArchetypeLabel, usize, f64)> = self
            .archetype_mix
            .iter()
            .map(|(l, &f)| (l.clone(), (f * n).floor() as usize, f * n - (f * n).floor()))
            .collect();
        let assigned: usize = counts.iter().map(|c| c.1).sum();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2).then(a.cmp(&b)));
        for &i in order.iter().take(self.n_students.saturating_sub(assigned)) {
            counts[i].1 += 1;
        }
        for (l, c, _) in &counts {
            if self.archetype_mix[l] > 0.0 && *c < 2 {
                return Err(Error::InvalidInput(format!("archetype {l} would get {c} student(s); need at least 2")));
            }
        }
        Ok(counts.into_iter().filter(|c| c.1 > 0).map(|(l, c, _)| (l, c)).collect())
    }

    fn test_key(&self, t: usize) -> TestKey {
        let grade = self.start_grade + t as u32;
        let year = self.start_year + t as i32;
        TestKey {
            test_id: format!("{}{}{}-{}", self.organization, grade, self.subject.abbreviation().trim_end_matches('.'), year),
            organization: self.organization.clone(),
            subject: self.subject.clone(),
            grade,
            variant: None,
            year,
            order_index: t as u32 + 1,
        }
    }

    fn baseline_key(&self) -> TestKey {
        TestKey {
            test_id: format!(
                "{}{}{}-{}",
                self.organization,
                self.start_grade,
                self.baseline_subject.abbreviation().trim_end_matches('.'),
                self.start_year
            ),
            organization: self.organization.clone(),
            subject: self.baseline_subject.clone(),
            grade: self.start_grade,
            variant: None,
            year: self.start_year,
            order_index: 0,
        }
    }
}

/// Generate one cohort. Fully determined by `spec`.
pub fn generate_cohort(spec: &SynthSpec) -> Result<SynthCohort> {
    spec.validate()?;
    let m = spec.n_tests;
    let n = spec.n_students;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut labels: Vec<ArchetypeLabel> = spec
        .archetype_counts()?
        .into_iter()
        .flat_map(|(l, c)| std::iter::repeat_n(l, c))
        .collect();
    labels.shuffle(&mut rng);

    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let shifted = Normal::new(50.0, 10.0).expect("valid");
    let mut latent: Vec<Vec<f64>> = labels
        .iter()
        .map(|l| {
            template_levels(l, m)
                .expect("named")
                .into_iter()
                .map(|v| v + noise.sample(&mut rng))
                .collect()
        })
        .collect();
    let mut shift_positions = spec.shift_positions.clone();
    shift_positions.sort_unstable();
    shift_positions.dedup();
    for &s in &shift_positions {
        for row in latent.iter_mut() {
            row[s] = shifted.sample(&mut rng);
        }
    }

    let tests: Vec<TestKey> = (0..m).map(|t| spec.test_key(t)).collect();
    let base_key = spec.baseline_key();
    let item_id = |key: &TestKey, j: usize| format!("{}-{}", key.year, j + 1);
    let mut entries = vec![ManifestEntry {
        key: base_key.clone(),
        items: (0..spec.baseline_items)
            .map(|j| ManifestItem { item_id: item_id(&base_key, j), topic: baseline_topic(j) })
            .collect(),
    }];
    for key in &tests {
        entries.push(ManifestEntry {
            key: key.clone(),
            items: (0..spec.items_per_test)
                .map(|j| ManifestItem {
                    item_id: item_id(key, j),
                    topic: format!("{} grade {} item {}", key.subject.as_str(), key.grade, j + 1),
                })
                .collect(),
        });
    }
    let manifest = Manifest::new(entries)?;
    let manifest_csv = manifest.to_csv()?;

    let students: Vec<String> = (0..n).map(|i| format!("{}-s{:04}", spec.cohort_id, i + 1)).collect();
    let difficulties = linspace(-2.0, 1.0, spec.items_per_test);
    let base_difficulties = linspace(-1.5, 1.5, spec.baseline_items);
    let causal: BTreeMap<usize, f64> = spec.causal_items.iter().map(|c| (c.item, c.effect)).collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cohort_id", "student_id", "test_id", "item_id", "score"])?;
    let mut scores = vec![vec![Vec::with_capacity(spec.items_per_test); m]; n];
    for (t, _) in tests.iter().enumerate() {
        for (i, lat) in latent.iter().enumerate() {
            let theta = (lat[t] - 50.0) / 10.0;
            for b in &difficulties {
                let p = sigmoid(spec.discrimination * (theta - b));
                scores[i][t].push(rng.random::<f64>() < p);
            }
        }
    }
    let mut base_scores = Vec::with_capacity(n);
    for (i, lat) in latent.iter().enumerate() {
        let theta = (lat[0] - 50.0) / 10.0;
        let pos = matches!(labels[i], ArchetypeLabel::StayHighStably | ArchetypeLabel::IncreaseFromLow);
        let row: Vec<bool> = base_difficulties
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let logit = match causal.get(&j) {
                    Some(e) => e * (if pos { 0.5 } else { -0.5 }),
                    None => spec.baseline_discrimination * (theta - b),
                };
                rng.random::<f64>() < sigmoid(logit)
            })
            .collect();
        base_scores.push(row);
    }
    for (i, s) in students.iter().enumerate() {
        for (j, &ok) in base_scores[i].iter().enumerate() {
            w.write_record([spec.cohort_id.as_str(), s, &base_key.test_id, &item_id(&base_key, j), if ok { "1" } else { "0" }])?;
        }
        for (t, key) in tests.iter().enumerate() {
            for (j, &ok) in scores[i][t].iter().enumerate() {
                w.write_record([spec.cohort_id.as_str(), s, &key.test_id, &item_id(key, j), if ok { "1" } else { "0" }])?;
            }
        }
    }
    let score_csv = String::from_utf8(w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?)
        .expect("ascii csv");

    let mut panels = parse_score_tables(score_csv.as_bytes(), &manifest)?;
    let pick = |panels: &mut Vec<ScorePanel>, subject: &Subject| -> Result<ScorePanel> {
        let idx = panels
            .iter()
            .position(|p| &p.subject == subject)
            .ok_or_else(|| Error::Consistency(format!("generated data lost subject {}", subject.as_str())))?;
        Ok(panels.remove(idx))
    };
    let panel = pick(&mut panels, &spec.subject)?;
    let baseline = pick(&mut panels, &spec.baseline_subject)?;

    let truth = GroundTruth {
        cohort_id: spec.cohort_id.clone(),
        seed: spec.seed,
        archetype: students.iter().cloned().zip(labels).collect(),
        shifted_tests: shift_positions.iter().map(|&s| tests[s].clone()).collect(),
        causal_items: spec
            .causal_items
            .iter()
            .map(|c| PlantedItem {
                test_id: base_key.test_id.clone(),
                item_id: item_id(&base_key, c.item),
                topic: baseline_topic(c.item),
                effect: c.effect,
            })
            .collect(),
    };
    Ok(SynthCohort { manifest, panel, baseline, baseline_test: base_key, truth, score_csv, manifest_csv })
}

/// Specs for `seeds.len()` cohorts sharing one design: ids `{base}1`,
/// `{base}2`, … and calendar years shifted by one per cohort.
pub fn cohort_series(spec: &SynthSpec, seeds: &[u64]) -> Vec<SynthSpec> {
    seeds
        .iter()
        .enumerate()
        .map(|(i, &seed)| SynthSpec {
            cohort_id: if seeds.len() == 1 { spec.cohort_id.clone() } else { format!("{}{}", spec.cohort_id, i + 1) },
            start_year: spec.start_year + i as i32,
            seed,
            ..spec.clone()
        })
        .collect()
}

/// Write `score.csv`, `manifest.csv` and `truth.json` into `dir`.
pub fn emit_truth(cohort: &SynthCohort, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("score.csv", cohort.score_csv.clone()),
        ("manifest.csv", cohort.manifest_csv.clone()),
        ("truth.json", serde_json::to_string_pretty(&cohort.truth)? + "\n"),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

/// Re-read a cohort written by [`emit_truth`].
pub fn read_cohort_dir(dir: &Path) -> Result<(Manifest, Vec<ScorePanel>, GroundTruth)> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read(&p).map_err(|e| Error::io(&p, e))
    };
    let manifest = parse_test_manifest(&read("manifest.csv")?)?;
    let panels = parse_score_tables(&read("score.csv")?, &manifest)?;
    let truth = serde_json::from_slice(&read("truth.json")?)?;
    Ok((manifest, panels, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_interpolate() {
        assert_eq!(template_levels(&ArchetypeLabel::StayHighStably, 3).unwrap(), vec![58.0, 59.0, 60.0]);
        assert_eq!(
            template_levels(&ArchetypeLabel::IncreaseFromLow, 5).unwrap(),
            vec![44.0, 45.0, 46.0, 49.5, 53.0]
        );
    }

    #[test]
    fn counts_use_largest_remainder() {
        let spec = SynthSpec { n_students: 10, ..Default::default() };
        let c = spec.archetype_counts().unwrap();
        assert_eq!(c.iter().map(|x| x.1).sum::<usize>(), 10);
        let infeasible = SynthSpec {
            n_students: 20,
            archetype_mix: [(ArchetypeLabel::StayHighStably, 0.96), (ArchetypeLabel::StayLowStably, 0.04)]
                .into_iter()
                .collect(),
            ..Default::default()
        };
        assert!(generate_cohort(&infeasible).is_err());
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec { n_students: 40, seed: 9, ..Default::default() };
        let a = generate_cohort(&spec).unwrap();
        let b = generate_cohort(&spec).unwrap();
        assert_eq!(a.score_csv, b.score_csv);
        assert_eq!(a.truth, b.truth);
    }
}
