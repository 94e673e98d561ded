use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cohort-trends");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().unwrap()
}

fn config(inference: bool) -> String {
    let inf = if inference {
        r#","inference": {
    "baseline": {"organization": "A", "subject": "national_language", "grade": 5, "variant": null},
    "pairs": [["stay_high_stably", "decrease_from_high"]],
    "ridge_fallback": true
  }"#
    } else {
        ""
    };
    format!(
        r#"{{
  "cohorts": [
    {{"id": "g1", "scores": "data/g1/score.csv", "manifest": "data/g1/manifest.csv"}},
    {{"id": "g2", "scores": "data/g2/score.csv", "manifest": "data/g2/manifest.csv"}}
  ],
  "subject": "mathematics",
  "clustering": {{"seed": 1, "restarts": 4}}{inf}
}}"#
    )
}

fn simulated() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("spec.json"), r#"{"cohort_id": "g", "n_students": 200}"#).unwrap();
    let o = run(tmp.path(), &["simulate", "--spec", "spec.json", "--out", "data", "--seed", "31", "--seed", "32"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    tmp
}

#[test]
fn simulate_writes_one_directory_per_seed() {
    let tmp = simulated();
    for c in ["g1", "g2"] {
        for f in ["score.csv", "manifest.csv", "truth.json"] {
            assert!(tmp.path().join("data").join(c).join(f).is_file(), "{c}/{f}");
        }
    }
}

#[test]
fn simulate_single_seed_writes_flat_directory() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("spec.json"), r#"{"n_students": 40, "seed": 3}"#).unwrap();
    let o = run(tmp.path(), &["simulate", "--spec", "spec.json", "--out", "data"]);
    assert!(o.status.success());
    let truth: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("data/truth.json")).unwrap()).unwrap();
    assert_eq!(truth["seed"], 3);
}

#[test]
fn missing_spec_is_an_input_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["simulate", "--spec", "nope.json", "--out", "data"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
}

#[test]
fn bad_arguments_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["run-all"]).status.code(), Some(1));
}

#[test]
fn missing_input_file_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("config.json"), config(false)).unwrap();
    let o = run(tmp.path(), &["run-all", "--config", "config.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn cluster_without_screen_output_fails() {
    let tmp = simulated();
    std::fs::write(tmp.path().join("config.json"), config(false)).unwrap();
    let o = run(tmp.path(), &["cluster", "--config", "config.json", "--out", "fresh"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_all_recovers_structure_and_writes_manifest() {
    let tmp = simulated();
    std::fs::write(tmp.path().join("config.json"), config(true)).unwrap();
    let o = run(tmp.path(), &["run-all", "--config", "config.json", "--out", "out", "--require-consistency"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    let read = |f: &str| -> serde_json::Value { serde_json::from_slice(&std::fs::read(out.join(f)).unwrap()).unwrap() };
    assert_eq!(read("consistency.json")["verdict"], "consistent");
    let factors = read("factors.json");
    assert!(!factors["pairs"][0]["factors"]["common_factors"].as_array().unwrap().is_empty(), "{factors}");
    let manifest = read("run_manifest.json");
    assert_eq!(manifest["seeds"]["clustering.seed"], 1);
    assert!(manifest["inputs"].as_object().unwrap().len() >= 4);
    for f in ["g1/clusters.csv", "g1/centroids.csv", "g1/centroid_trajectories.svg", "g2/screening_report.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = simulated();
    std::fs::write(tmp.path().join("config.json"), config(false)).unwrap();
    let o = run(tmp.path(), &["run-all", "--config", "config.json", "--out", "out", "--seed", "77"]);
    assert!(o.status.success());
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("out/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seeds"]["clustering.seed"], 77);
}

#[test]
fn skip_screening_labels_clusters_other_and_skips_inference() {
    let tmp = simulated();
    std::fs::write(tmp.path().join("config.json"), config(true)).unwrap();
    let o = run(tmp.path(), &["run-all", "--config", "config.json", "--out", "out", "--skip-screening"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let clusters = std::fs::read_to_string(tmp.path().join("out/g1/clusters.csv")).unwrap();
    assert!(clusters.lines().skip(1).all(|l| l.contains(",other_")), "{clusters}");
    let f: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("out/factors.json")).unwrap()).unwrap();
    assert!(f["skipped"].is_string(), "{f}");
    // other labels never count as a consistent match
    let o = run(
        tmp.path(),
        &["cluster", "--config", "config.json", "--out", "out", "--skip-screening", "--require-consistency"],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn separation_exits_two_unless_ridge_fallback_is_enabled() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("spec.json"), r#"{"cohort_id": "g", "n_students": 40}"#).unwrap();
    let o = run(tmp.path(), &["simulate", "--spec", "spec.json", "--out", "data", "--seed", "31", "--seed", "32"]);
    assert!(o.status.success());
    let strict = config(true).replace(r#""ridge_fallback": true"#, r#""ridge_fallback": false"#);
    std::fs::write(tmp.path().join("strict.json"), strict).unwrap();
    let o = run(tmp.path(), &["run-all", "--config", "strict.json", "--out", "strict"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("separation"));
    std::fs::write(tmp.path().join("ridge.json"), config(true)).unwrap();
    let o = run(tmp.path(), &["run-all", "--config", "ridge.json", "--out", "ridge"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = std::fs::read_to_string(tmp.path().join("ridge/factors.json")).unwrap();
    assert!(f.contains("\"ridge\": 0.0001"), "ridge use is reported");
}
