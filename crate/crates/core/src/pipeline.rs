//! Stage orchestration: screen → intersect → cluster → match → infer.
//!
//! Every stage reads its inputs from the config and from files written by
//! earlier stages, so running the stages one by one produces the same reports
//! as `run_all`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data_model::{
    intersect_common_tests, parse_score_tables, parse_test_manifest, Manifest, ScorePanel, Subject, TestIdentity,
    TestKey,
};
use crate::error::{Error, Result};
use crate::inference::{
    build_design, extract_common_factors, fit_logistic, reduce_variables, regression_csv, significance_tiers,
    CohortRegression, FactorReport, LogisticOptions,
};
use crate::screening::{
    correlation_matrix, correlations_csv, screen_tests, validate_chain, ChainAudit, Exclusion, ScreeningPolicy,
};
use crate::trend::{
    build_trend_vectors, centroid_svg, centroids_csv, cluster_trends, clusters_csv, match_clusterings,
    ArchetypeLabel, ClusterParams, Clustering, ConsistencyReport, LevelScale, TrendOptions, Verdict,
};

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortInput {
    pub id: String,
    pub scores: PathBuf,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub mode: LevelScale,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { k: 4, seed: 0, restarts: 10, mode: LevelScale::Deviation, max_iter: 300, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    /// Baseline test identity; calendar year is ignored.
    pub baseline: TestIdentity,
    /// (positive, negative) cluster labels.
    pub pairs: Vec<(ArchetypeLabel, ArchetypeLabel)>,
    #[serde(default = "default_vif")]
    pub vif_threshold: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub ridge_fallback: bool,
}

fn default_vif() -> f64 {
    10.0
}

fn default_alpha() -> f64 {
    0.10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub cohorts: Vec<CohortInput>,
    pub subject: Subject,
    #[serde(default)]
    pub screening: ScreeningPolicy,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub inference: Option<InferenceConfig>,
    #[serde(default)]
    pub skip_screening: bool,
    #[serde(default)]
    pub allow_degenerate: bool,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub skip_screening: bool,
    pub require_consistency: bool,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// A loaded config with paths resolved against the config file.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub overrides: Overrides,
    base: PathBuf,
    config_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

impl Run {
    pub fn load(config_path: &Path, overrides: Overrides) -> Result<Run> {
        let bytes = read(config_path)?;
        let config: RunConfig = serde_json::from_slice(&bytes)?;
        let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
        Run::new(config, base, &bytes, overrides)
    }

    /// `base` resolves relative paths in `config`.
    pub fn new(mut config: RunConfig, base: PathBuf, raw: &[u8], overrides: Overrides) -> Result<Run> {
        if let Some(seed) = overrides.seed {
            config.clustering.seed = seed;
        }
        if overrides.skip_screening {
            config.skip_screening = true;
        }
        if config.skip_screening {
            config.clustering.mode = LevelScale::Ratio;
        }
        let run = Run { config, overrides, base, config_sha256: sha256_hex(raw) };
        run.validate()?;
        Ok(run)
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        if c.cohorts.is_empty() {
            return Err(Error::InvalidInput("config lists no cohorts".into()));
        }
        let mut ids: Vec<&str> = c.cohorts.iter().map(|x| x.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("cohort ids must be unique".into()));
        }
        if ids.iter().any(|id| id.is_empty() || id.contains(['/', '\\']) || *id == "." || *id == "..") {
            return Err(Error::InvalidInput("cohort ids must be plain directory names".into()));
        }
        c.screening.validate()?;
        if c.clustering.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if let Some(inf) = &c.inference {
            if c.clustering.k < 2 {
                return Err(Error::InvalidInput("inference needs k >= 2".into()));
            }
            if inf.pairs.iter().any(|(a, b)| a == b) {
                return Err(Error::InvalidInput("a cluster pair repeats one label".into()));
            }
            if !(inf.alpha > 0.0 && inf.alpha < 1.0) {
                return Err(Error::InvalidInput("alpha must lie in (0, 1)".into()));
            }
        }
        for cohort in &c.cohorts {
            for p in [&cohort.scores, &cohort.manifest] {
                let path = self.resolve(p);
                if !path.is_file() {
                    return Err(Error::io(
                        path,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        match &self.overrides.out {
            Some(o) => o.clone(),
            None => self.resolve(&self.config.out),
        }
    }

    fn write(&self, rel: &str, body: &[u8]) -> Result<()> {
        let path = self.out_dir().join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_vec_pretty(value)?;
        body.push(b'\n');
        self.write(rel, &body)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, rel: &str) -> Result<T> {
        let path = self.out_dir().join(rel);
        let bytes = fs::read(&path).map_err(|e| {
            Error::io(&path, std::io::Error::new(e.kind(), format!("{e}; run the earlier stage first")))
        })?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    fn load_cohort(&self, cohort: &CohortInput) -> Result<(Manifest, Vec<ScorePanel>)> {
        let manifest = parse_test_manifest(&read(&self.resolve(&cohort.manifest))?)?;
        let panels = parse_score_tables(&read(&self.resolve(&cohort.scores))?, &manifest)?;
        if let Some(p) = panels.iter().find(|p| p.cohort_id != cohort.id) {
            return Err(Error::InvalidInput(format!(
                "score file for cohort {} contains cohort {}",
                cohort.id, p.cohort_id
            )));
        }
        Ok((manifest, panels))
    }

    fn subject_panel<'a>(&self, panels: &'a [ScorePanel], subject: &Subject, cohort: &str) -> Result<&'a ScorePanel> {
        panels.iter().find(|p| &p.subject == subject).ok_or_else(|| {
            Error::EmptyPanel(format!("cohort {cohort} has no complete {} panel", subject.as_str()))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub tests: Vec<String>,
    pub n: usize,
    /// Diagonal is null.
    pub r: Vec<Vec<Option<f64>>>,
    pub p: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub cohort_id: String,
    pub subject: Subject,
    pub policy: ScreeningPolicy,
    pub skipped: bool,
    pub n_students: usize,
    pub panel_warnings: Vec<String>,
    pub tests: Vec<TestKey>,
    pub correlations: CorrelationTable,
    pub retained: Vec<TestKey>,
    pub excluded: Vec<Exclusion>,
    pub final_consecutive_r: Vec<f64>,
    pub audit: ChainAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonTests {
    pub tests: Vec<TestIdentity>,
    /// Cohort id → matching test ids in chronological order.
    pub per_cohort: BTreeMap<String, Vec<TestKey>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySummary {
    pub verdict: Verdict,
    pub scale: LevelScale,
    /// Every later cohort compared with the first.
    pub comparisons: Vec<ConsistencyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFactors {
    pub positive: ArchetypeLabel,
    pub negative: ArchetypeLabel,
    pub regressions: Vec<CohortRegression>,
    pub factors: FactorReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorsReport {
    /// Why inference did not run, if it did not.
    pub skipped: Option<String>,
    pub pairs: Vec<PairFactors>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub overrides: Overrides,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub stages: Vec<StageTiming>,
    /// Hash over everything above except stage timings.
    pub content_hash: String,
}

fn correlation_table(m: &crate::screening::TestCorrelationMatrix, n: usize) -> CorrelationTable {
    let k = m.len();
    let pick = |f: fn(&crate::stats::CorrResult) -> f64| {
        (0..k).map(|i| (0..k).map(|j| m.get(i, j).map(f)).collect()).collect()
    };
    CorrelationTable {
        tests: m.tests.iter().map(|t| t.test_id.clone()).collect(),
        n,
        r: pick(|c| c.r),
        p: pick(|c| c.p_two_sided),
    }
}

fn pair_file(cohort: &str, pos: &ArchetypeLabel, neg: &ArchetypeLabel) -> String {
    format!("regression_{cohort}_{pos}_vs_{neg}.csv")
}

/// Screen every cohort and intersect the retained chains.
pub fn stage_screen(run: &Run) -> Result<CommonTests> {
    let cfg = &run.config;
    let mut reports = Vec::new();
    for cohort in &cfg.cohorts {
        let (_, panels) = run.load_cohort(cohort)?;
        let panel = run.subject_panel(&panels, &cfg.subject, &cohort.id)?;
        let matrix = correlation_matrix(panel, &cfg.screening)?;
        let (outcome, audit) = if cfg.skip_screening {
            let outcome = crate::screening::ScreeningOutcome {
                retained: panel.tests.clone(),
                excluded: Vec::new(),
                final_consecutive_r: (1..matrix.len()).map(|i| matrix.r(i - 1, i)).collect(),
            };
            let audit = ChainAudit { passed: true, lines: vec!["screening skipped; full chain retained".into()] };
            (outcome, audit)
        } else {
            let outcome = screen_tests(&matrix, &cfg.screening)?;
            let audit = validate_chain(&outcome, &cfg.screening)?;
            (outcome, audit)
        };
        let report = ScreeningReport {
            cohort_id: cohort.id.clone(),
            subject: cfg.subject.clone(),
            policy: cfg.screening,
            skipped: cfg.skip_screening,
            n_students: panel.students.len(),
            panel_warnings: panel.warnings.clone(),
            tests: panel.tests.clone(),
            correlations: correlation_table(&matrix, panel.students.len()),
            retained: outcome.retained.clone(),
            excluded: outcome.excluded,
            final_consecutive_r: outcome.final_consecutive_r,
            audit,
        };
        run.write_json(&format!("{}/screening_report.json", cohort.id), &report)?;
        run.write(&format!("{}/correlations.csv", cohort.id), correlations_csv(&matrix).as_bytes())?;
        reports.push((cohort.id.clone(), outcome.retained));
    }

    let chains: Vec<&[TestKey]> = reports.iter().map(|(_, r)| r.as_slice()).collect();
    let common = if chains.len() == 1 { chains[0].to_vec() } else { intersect_common_tests(&chains)? };
    let mut per_cohort = BTreeMap::new();
    for (id, chain) in &reports {
        per_cohort.insert(id.clone(), crate::data_model::resolve_tests(&common, chain)?);
    }
    let summary = CommonTests { tests: common.iter().map(TestKey::identity).collect(), per_cohort };
    run.write_json("common_tests.json", &summary)?;
    Ok(summary)
}

/// Cluster every cohort on the common tests and compare the clusterings.
pub fn stage_cluster(run: &Run) -> Result<ConsistencySummary> {
    let cfg = &run.config;
    let common: CommonTests = run.read_json("common_tests.json")?;
    let params = ClusterParams {
        k: cfg.clustering.k,
        seed: cfg.clustering.seed,
        restarts: cfg.clustering.restarts,
        max_iter: cfg.clustering.max_iter,
        tol: cfg.clustering.tol,
    };
    let opts = TrendOptions {
        scale: cfg.clustering.mode,
        score_kind: cfg.screening.score_kind,
        allow_degenerate: cfg.allow_degenerate,
    };
    let mut clusterings = Vec::new();
    for cohort in &cfg.cohorts {
        let (_, panels) = run.load_cohort(cohort)?;
        let panel = run.subject_panel(&panels, &cfg.subject, &cohort.id)?;
        let tests = common.per_cohort.get(&cohort.id).ok_or_else(|| {
            Error::InvalidInput(format!("common_tests.json has no entry for cohort {}", cohort.id))
        })?;
        if tests.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "cohort {} has {} common test(s); trend vectors need 2",
                cohort.id,
                tests.len()
            )));
        }
        let vectors = build_trend_vectors(panel, tests, &opts)?;
        let c = cluster_trends(&cohort.id, tests, &vectors, opts.scale, &params)?;
        run.write(&format!("{}/clusters.csv", cohort.id), clusters_csv(&c).as_bytes())?;
        run.write(&format!("{}/centroids.csv", cohort.id), centroids_csv(&c).as_bytes())?;
        run.write(&format!("{}/centroid_trajectories.svg", cohort.id), centroid_svg(&c).as_bytes())?;
        run.write_json(&format!("{}/clustering.json", cohort.id), &c)?;
        clusterings.push(c);
    }
    let comparisons = clusterings[1..]
        .iter()
        .map(|c| match_clusterings(&clusterings[0], c))
        .collect::<Result<Vec<_>>>()?;
    let verdict = if comparisons.iter().all(|r| r.verdict == Verdict::Consistent)
        && clusterings.iter().all(|c| c.labels.iter().all(ArchetypeLabel::is_named))
    {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    let summary = ConsistencySummary { verdict, scale: opts.scale, comparisons };
    run.write_json("consistency.json", &summary)?;
    if run.overrides.require_consistency && verdict == Verdict::Inconsistent {
        return Err(Error::Inconsistent(
            "cluster label multisets differ across cohorts; see consistency.json".into(),
        ));
    }
    Ok(summary)
}

/// Regressions per cohort and cluster pair, then common factors.
pub fn stage_infer(run: &Run) -> Result<FactorsReport> {
    let cfg = &run.config;
    let skipped = match (&cfg.inference, cfg.clustering.mode) {
        (None, _) => Some("no inference section in the config".to_string()),
        (Some(_), LevelScale::Ratio) => {
            Some("ratio-scale clusters carry no archetype labels; inference not run".to_string())
        }
        _ => None,
    };
    let Some(inf) = cfg.inference.as_ref().filter(|_| skipped.is_none()) else {
        let report = FactorsReport { skipped, pairs: Vec::new() };
        run.write_json("factors.json", &report)?;
        return Ok(report);
    };

    let mut loaded = Vec::new();
    for cohort in &cfg.cohorts {
        let clustering: Clustering = run.read_json(&format!("{}/clustering.json", cohort.id))?;
        let (manifest, panels) = run.load_cohort(cohort)?;
        let candidates = manifest.find_identity(&inf.baseline);
        let key = match candidates.as_slice() {
            [one] => (*one).clone(),
            [] => {
                return Err(Error::ManifestMismatch(format!(
                    "cohort {} has no baseline test [Org. {}] {} grade {}",
                    cohort.id,
                    inf.baseline.organization,
                    inf.baseline.subject.as_str(),
                    inf.baseline.grade
                )))
            }
            _ => return Err(Error::ManifestMismatch(format!("baseline test is ambiguous in cohort {}", cohort.id))),
        };
        loaded.push((cohort.id.clone(), clustering, manifest, panels, key));
    }

    let opts = LogisticOptions::default();
    let mut pairs = Vec::new();
    for (pos, neg) in &inf.pairs {
        let mut regressions = Vec::new();
        for (id, clustering, manifest, panels, key) in &loaded {
            let baseline = run.subject_panel(panels, &key.subject, id)?;
            let design = build_design(baseline, key, clustering, pos, neg)?;
            let reduced = reduce_variables(&design, inf.vif_threshold)?;
            let fit = fit_logistic(&reduced, &opts, inf.ridge_fallback)?;
            let items = significance_tiers(&fit, manifest, &key.test_id)?;
            run.write(&pair_file(id, pos, neg), regression_csv(&items).as_bytes())?;
            regressions.push(CohortRegression::new(&reduced, &fit, items));
        }
        let views: Vec<(&str, &[crate::inference::TieredItem])> =
            regressions.iter().map(|r| (r.cohort_id.as_str(), r.items.as_slice())).collect();
        let factors = extract_common_factors(&views, inf.alpha);
        pairs.push(PairFactors { positive: pos.clone(), negative: neg.clone(), regressions, factors });
    }
    let report = FactorsReport { skipped: None, pairs };
    run.write_json("factors.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Screen,
    Cluster,
    Infer,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Screen => "screen",
            Stage::Cluster => "cluster",
            Stage::Infer => "infer",
        }
    }
}

/// Run `stages` in order and write `run_manifest.json`.
pub fn run_stages(run: &Run, stages: &[Stage]) -> Result<RunManifest> {
    let mut timings = Vec::new();
    for &stage in stages {
        let start = Instant::now();
        let result = match stage {
            Stage::Screen => stage_screen(run).map(|_| ()),
            Stage::Cluster => stage_cluster(run).map(|_| ()),
            Stage::Infer => stage_infer(run).map(|_| ()),
        };
        timings.push(StageTiming { stage: stage.name().into(), millis: start.elapsed().as_millis() });
        result?;
    }
    let manifest = build_run_manifest(run, timings)?;
    run.write_json(RUN_MANIFEST, &manifest)?;
    Ok(manifest)
}

pub fn run_all(run: &Run) -> Result<RunManifest> {
    run_stages(run, &[Stage::Screen, Stage::Cluster, Stage::Infer])
}

/// Relative path → sha256 for every report file under `dir` (run manifest excluded).
pub fn output_digests(dir: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("under root");
                let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                if rel != RUN_MANIFEST {
                    out.insert(rel, sha256_hex(&read(&path)?));
                }
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    if dir.is_dir() {
        walk(dir, dir, &mut out)?;
    }
    Ok(out)
}

fn build_run_manifest(run: &Run, stages: Vec<StageTiming>) -> Result<RunManifest> {
    let mut inputs = BTreeMap::new();
    for c in &run.config.cohorts {
        for p in [&c.scores, &c.manifest] {
            inputs.insert(p.to_string_lossy().into_owned(), sha256_hex(&read(&run.resolve(p))?));
        }
    }
    let mut seeds = BTreeMap::new();
    seeds.insert("clustering.seed".to_string(), run.config.clustering.seed);
    seeds.insert("clustering.restarts".to_string(), run.config.clustering.restarts as u64);
    let mut m = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: run.config_sha256.clone(),
        overrides: run.overrides.clone(),
        seeds,
        inputs,
        outputs: output_digests(&run.out_dir())?,
        stages: Vec::new(),
        content_hash: String::new(),
    };
    m.content_hash = sha256_hex(&serde_json::to_vec(&m)?);
    m.stages = stages;
    Ok(m)
}
